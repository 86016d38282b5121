"""Cadlag paths on finite time grids with explicitly declared jumps.

A path is sampled right-continuously on a finite grid 0 = t_0 < ... < t_N = T.
Jumps live only at grid times and are declared, never inferred: the left limit
at a jump time is the stored value minus the declared jump, and the path is
regarded as continuous at every other grid time.  The convention at the
origin is X_{0-} = X_0, i.e. a jump at time 0 is forbidden.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "TimeGrid",
    "GridPath",
    "FVPath",
    "dyadic_grid",
    "eval_left_limit",
    "left_values",
    "value_at",
    "running_maximum",
    "total_variation",
    "as_fv",
    "add_paths",
    "scale_path",
    "reciprocal_path",
    "PathGenerator",
    "FormulaGenerator",
    "StepGenerator",
    "DyadicBrownianGenerator",
    "CompoundJumpGenerator",
    "AffineCombinationGenerator",
    "GeometricGenerator",
    "generate",
    "write_path_csv",
    "read_path_csv",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing evaluation times starting at 0."""

    times: np.ndarray

    def __post_init__(self):
        t = _readonly(self.times)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("grid needs at least two times")
        if t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "_index", None)

    def __len__(self) -> int:
        return self.times.size

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        """Exact grid index of time t.  Membership is exact, never fuzzy."""
        i = int(np.searchsorted(self.times, t))
        if i >= len(self) or self.times[i] != t:
            raise KeyError(f"{t!r} is not a grid time")
        return i

    def clamp_index(self, t: float) -> int:
        """Largest grid index i with times[i] <= t (right-continuous lookup)."""
        if t < 0:
            raise ValueError("negative time")
        return int(np.searchsorted(self.times, t, side="right")) - 1


def dyadic_grid(T: float = 1.0, level: int = 0) -> TimeGrid:
    """Grid {k * T * 2^-level}.  k/2^level is exact in binary floats."""
    n = 1 << level
    return TimeGrid(T * (np.arange(n + 1) / n))


def _freeze_jumps(jumps, dim: int) -> Mapping[int, np.ndarray]:
    out = {}
    for i, dx in (jumps or {}).items():
        v = _readonly(np.broadcast_to(np.asarray(dx, dtype=float), (dim,)).copy())
        out[int(i)] = v
    return MappingProxyType(out)


@dataclass(frozen=True)
class GridPath:
    """Right-continuous path values on a grid plus a declared jump set.

    values[i] = X_{t_i}; jumps maps a grid index i to the vector
    dX_{t_i} = X_{t_i} - X_{t_i-}.  Indices absent from the jump map are
    continuity points of the discrete path.
    """

    grid: TimeGrid
    values: np.ndarray
    jumps: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != len(self.grid):
            raise ValueError("values length must match grid length")
        object.__setattr__(self, "values", _readonly(v))
        jm = _freeze_jumps(self.jumps, v.shape[1])
        for i in jm:
            if i == 0:
                raise ValueError("a jump at t=0 is forbidden (X_{0-} = X_0)")
            if not 0 < i < len(self.grid):
                raise ValueError("jump index outside the grid")
        object.__setattr__(self, "jumps", jm)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        """1-d view of a scalar path's values."""
        if self.dim != 1:
            raise ValueError("path is not one-dimensional")
        return self.values[:, 0]

    def component(self, k: int) -> "GridPath":
        jumps = {i: dx[k : k + 1] for i, dx in self.jumps.items() if dx[k] != 0.0}
        return GridPath(self.grid, self.values[:, k : k + 1], jumps)

    def jump_at(self, i: int) -> np.ndarray:
        return self.jumps.get(i, np.zeros(self.dim))

    def with_jumps(self, jumps) -> "GridPath":
        return GridPath(self.grid, self.values, jumps)

    def jump_indices(self) -> np.ndarray:
        return np.array(sorted(self.jumps), dtype=int)


class FVPath(GridPath):
    """GridPath flagged as having finite variation on the grid.

    Carries the total variation V(A)_t accumulated over grid increments and
    the exact decomposition A = A^c + A^d, where A^d_t = sum_{0<s<=t} dA_s is
    the pure-jump part built from the declared jumps.
    """

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        inc = np.vstack([np.zeros((1, self.dim)), np.abs(np.diff(v, axis=0))])
        object.__setattr__(self, "variation", _readonly(np.cumsum(inc, axis=0)))
        jump_part = np.zeros_like(v)
        for i, dx in self.jumps.items():
            jump_part[i:] += dx
        object.__setattr__(self, "jump_part", _readonly(jump_part))
        object.__setattr__(self, "cont_part", _readonly(v - jump_part))

    def continuous(self) -> GridPath:
        """The continuous part A^c (empty jump set)."""
        return GridPath(self.grid, self.cont_part)

    def discontinuous(self) -> GridPath:
        """The pure-jump part A^d."""
        return GridPath(self.grid, self.jump_part, dict(self.jumps))


def as_fv(path: GridPath) -> FVPath:
    if isinstance(path, FVPath):
        return path
    return FVPath(path.grid, path.values, dict(path.jumps))


def eval_left_limit(path: GridPath, i: int) -> np.ndarray:
    """X_{t_i-}: the stored value minus the declared jump; X_{0-} = X_0."""
    if not 0 <= i < len(path.grid):
        raise IndexError(f"grid index {i} out of range")
    v = path.values[i].copy()
    if i in path.jumps:
        v -= path.jumps[i]
    return v


def left_values(path: GridPath) -> np.ndarray:
    """Array of left limits X_{t_i-} at every grid time."""
    out = path.values.copy()
    for i, dx in path.jumps.items():
        out[i] -= dx
    return out


def value_at(path: GridPath, t: float) -> np.ndarray:
    """X_t for arbitrary t in [0, T], right-continuous between samples."""
    return path.values[path.grid.clamp_index(t)].copy()


def running_maximum(path: GridPath) -> tuple[GridPath, bool]:
    """Running maximum of a scalar path and its grid-scale continuity flag.

    The maximum is continuous at grid scale iff no declared upward jump ever
    attains a new maximum.  Returns (maximum path, continuous flag).
    """
    xs = path.x
    m = np.maximum.accumulate(xs)
    lv = left_values(path)[:, 0]
    jumps = {}
    for i in sorted(path.jumps):
        m_left = max(m[i - 1], lv[i])
        if xs[i] > m_left:
            jumps[i] = xs[i] - m_left
    return GridPath(path.grid, m, jumps), not jumps


def total_variation(path: FVPath, t: float, component: int = 0) -> float:
    """V(A)_t: sum of absolute grid increments up to time t."""
    if t > path.grid.T:
        raise ValueError("t beyond the horizon")
    return float(path.variation[path.grid.clamp_index(t), component])


def add_paths(a: GridPath, b: GridPath, ca: float = 1.0, cb: float = 1.0) -> GridPath:
    """ca*A + cb*B on a shared grid; the jump set is the union."""
    if a.grid is not b.grid and not np.array_equal(a.grid.times, b.grid.times):
        raise ValueError("paths live on different grids")
    jumps = {}
    for i in set(a.jumps) | set(b.jumps):
        dx = ca * a.jump_at(i) + cb * b.jump_at(i)
        if np.any(dx != 0.0):
            jumps[i] = dx
    return GridPath(a.grid, ca * a.values + cb * b.values, jumps)


def scale_path(a: GridPath, c: float) -> GridPath:
    jumps = {i: c * dx for i, dx in a.jumps.items()}
    return GridPath(a.grid, c * a.values, jumps)


def reciprocal_path(a: GridPath) -> GridPath:
    """1/A for a scalar path that never touches 0, with its jumps declared."""
    xs = a.x
    lv = left_values(a)[:, 0]
    if np.any(xs == 0.0) or np.any(lv == 0.0):
        raise ValueError("path touches zero; reciprocal undefined")
    jumps = {i: 1.0 / xs[i] - 1.0 / lv[i] for i in a.jumps}
    return GridPath(a.grid, 1.0 / xs, jumps)


# ---------------------------------------------------------------------------
# Generators.  Each is a pure function of (its parameters, the grid); kinds
# with randomness are keyed by a 64-bit seed and are bit-reproducible.
# ---------------------------------------------------------------------------


class PathGenerator:
    kind = "abstract"

    def generate(self, grid: TimeGrid) -> GridPath:
        raise NotImplementedError


def generate(gen: PathGenerator, grid: TimeGrid) -> GridPath:
    return gen.generate(grid)


@dataclass(frozen=True)
class FormulaGenerator(PathGenerator):
    """Deterministic continuous path t -> fn(t) (vectorized callable)."""

    fn: Callable[[np.ndarray], np.ndarray]
    kind = "deterministic-formula"

    def generate(self, grid: TimeGrid) -> GridPath:
        return GridPath(grid, np.asarray(self.fn(grid.times), dtype=float))


@dataclass(frozen=True)
class StepGenerator(PathGenerator):
    """Piecewise-constant path with a single jump of size c at time t0."""

    c: float = 1.0
    t0: float = 0.5
    x0: float = 0.0
    kind = "step"

    def generate(self, grid: TimeGrid) -> GridPath:
        i0 = grid.index_of(self.t0)
        v = np.full(len(grid), self.x0)
        v[i0:] += self.c
        return GridPath(grid, v, {i0: self.c})


def _dyadic_level_of(grid: TimeGrid) -> int:
    n = len(grid) - 1
    level = n.bit_length() - 1
    if (1 << level) != n:
        raise ValueError("grid is not dyadic")
    expect = grid.T * (np.arange(n + 1) / n)
    if not np.array_equal(expect, grid.times):
        raise ValueError("grid is not dyadic")
    return level


@dataclass(frozen=True)
class DyadicBrownianGenerator(PathGenerator):
    """Brownian-type path by midpoint refinement, keyed by dyadic address.

    The normal draw for the midpoint k*T/2^l (k odd) comes from an RNG seeded
    by (seed, l, k-block), so sampling at a finer level never resamples the
    values already fixed at coarser levels: refinement consistency is exact,
    bitwise, for a fixed seed.
    """

    seed: int = 0
    sigma: float = 1.0
    x0: float = 0.0
    kind = "dyadic-brownian"

    def _level_draws(self, level: int, count: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), 7, level]))
        return rng.standard_normal(count)

    def generate(self, grid: TimeGrid) -> GridPath:
        L = _dyadic_level_of(grid)
        T = grid.T
        w = np.zeros(len(grid))
        w[-1] = math.sqrt(T) * self._level_draws(0, 1)[0]
        for lev in range(1, L + 1):
            stride = 1 << (L - lev)
            mids = np.arange(stride, len(grid), 2 * stride)
            z = self._level_draws(lev, mids.size)
            half_var = T / (1 << (lev + 1))
            w[mids] = 0.5 * (w[mids - stride] + w[mids + stride]) + math.sqrt(half_var) * z
        return GridPath(grid, self.x0 + self.sigma * w)


@dataclass(frozen=True)
class CompoundJumpGenerator(PathGenerator):
    """Pure-jump path: Poisson(intensity*T) many jumps at grid times.

    Jump times are drawn uniformly over interior grid points; sizes come from
    the declared sampler ('coin' gives +/-size, 'uniform' gives U(-size, size)).
    """

    seed: int = 0
    intensity: float = 1.0
    size: float = 1.0
    sampler: str = "coin"
    x0: float = 0.0
    kind = "compound-jump"

    def generate(self, grid: TimeGrid) -> GridPath:
        rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), 11]))
        count = rng.poisson(self.intensity * grid.T)
        count = min(count, len(grid) - 1)
        idx = np.sort(rng.choice(np.arange(1, len(grid)), size=count, replace=False))
        if self.sampler == "coin":
            sizes = self.size * rng.choice([-1.0, 1.0], size=count)
        elif self.sampler == "uniform":
            sizes = rng.uniform(-self.size, self.size, size=count)
        else:
            raise ValueError(f"unknown jump sampler {self.sampler!r}")
        v = np.full(len(grid), self.x0)
        for i, s in zip(idx, sizes):
            v[i:] += s
        return GridPath(grid, v, {int(i): s for i, s in zip(idx, sizes)})


@dataclass(frozen=True)
class AffineCombinationGenerator(PathGenerator):
    """a*X + b*Y pointwise; the jump set is the union of the parents'."""

    gen_x: PathGenerator
    gen_y: PathGenerator
    a: float = 1.0
    b: float = 1.0
    kind = "affine-combination"

    def generate(self, grid: TimeGrid) -> GridPath:
        return add_paths(self.gen_x.generate(grid), self.gen_y.generate(grid), self.a, self.b)


@dataclass(frozen=True)
class GeometricGenerator(PathGenerator):
    """Strictly positive price path s0 exp(sigma W + mu t) with optional
    multiplicative jumps (1 + J) at Poisson times; J > -1 by construction."""

    seed: int = 0
    s0: float = 1.0
    sigma: float = 0.2
    mu: float = 0.0
    jump_intensity: float = 0.0
    jump_size: float = 0.1
    kind = "geometric"

    def generate(self, grid: TimeGrid) -> GridPath:
        if abs(self.jump_size) >= 1.0:
            raise ValueError("jump size must stay below 1 in magnitude")
        w = DyadicBrownianGenerator(seed=self.seed, sigma=self.sigma).generate(grid)
        vals = self.s0 * np.exp(w.x + self.mu * grid.times)
        jumps = {}
        if self.jump_intensity > 0.0:
            overlay = CompoundJumpGenerator(
                seed=self.seed,
                intensity=self.jump_intensity,
                size=self.jump_size,
                sampler="uniform",
            ).generate(grid)
            for i, dj in sorted(overlay.jumps.items()):
                vals[i:] *= 1.0 + float(dj[0])
            for i, dj in sorted(overlay.jumps.items()):
                jumps[i] = vals[i] - vals[i] / (1.0 + float(dj[0]))
        return GridPath(grid, vals, jumps)


# ---------------------------------------------------------------------------
# Serialization: CSV with header t,x1,...,xd,dx1,...,dxd.
# ---------------------------------------------------------------------------


def write_path_csv(path: GridPath, fp) -> None:
    d = path.dim
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["t"] + [f"x{k+1}" for k in range(d)] + [f"dx{k+1}" for k in range(d)])
    for i, t in enumerate(path.grid.times):
        dx = path.jump_at(i)
        w.writerow([repr(float(t))] + [repr(float(v)) for v in path.values[i]] + [repr(float(v)) for v in dx])


def read_path_csv(fp) -> GridPath:
    r = csv.reader(row for row in fp if not row.startswith("#"))
    header = next(r)
    d = (len(header) - 1) // 2
    times, values, jumps = [], [], {}
    for i, row in enumerate(r):
        times.append(float(row[0]))
        values.append([float(v) for v in row[1 : 1 + d]])
        dx = np.array([float(v) for v in row[1 + d : 1 + 2 * d]])
        if np.any(dx != 0.0):
            jumps[i] = dx
    return GridPath(TimeGrid(np.array(times)), np.array(values), jumps)
