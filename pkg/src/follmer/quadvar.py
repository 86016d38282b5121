"""Quadratic variation and covariation along refining partition sequences.

The discrete quadratic variation of a scalar path along a partition is

    [X,X]^pi_t = sum over t_i in pi of (X_{t_{i+1} ^ t} - X_{t_i ^ t})^2.

A path has quadratic variation along a sequence when these curves converge
pointwise to a cadlag increasing limit whose jumps are exactly (dX_t)^2;
increasingness belongs to the limit and can fail transiently at coarse
levels.  On a grid the limit is estimated by the top-level curve and
certified by a convergence trend; for paths declared to have finite
variation the limit is the accumulated squared jumps, exactly.

Covariation is defined by polarization and therefore satisfies the
polarization identity to the last bit at every grid point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .diagnostics import DETERMINISTIC_TOL, TREND_WINDOW, TrendReport, sup_distance
from .partitions import Partition, PartitionSequence
from .paths import FVPath, GridPath, TimeGrid, add_paths, eval_left_limit, left_values

__all__ = [
    "QVResult",
    "CovMatrix",
    "DiscreteMeasure",
    "discrete_qv",
    "qv_curve",
    "product_curve",
    "qv_sequence",
    "covariation",
    "qv_measure",
    "measure_vs_qv_check",
    "weighted_sum_limit",
    "measure_convergence_check",
]


# ---------------------------------------------------------------------------
# Discrete curves
# ---------------------------------------------------------------------------


def _anchor_map(p: Partition, n: int) -> np.ndarray:
    """For every grid index g, the position k of the last partition point <= g."""
    return np.searchsorted(p.indices, np.arange(n), side="right") - 1


def product_curve(x: np.ndarray, y: np.ndarray, p: Partition) -> np.ndarray:
    """t -> sum of (X_{t_{i+1}^t} - X_{t_i^t})(Y_{t_{i+1}^t} - Y_{t_i^t}) on the grid."""
    idx = p.indices
    inc = np.diff(x[idx]) * np.diff(y[idx])
    csum = np.concatenate([[0.0], np.cumsum(inc)])
    k = _anchor_map(p, x.size)
    a = idx[k]
    return csum[k] + (x - x[a]) * (y - y[a])


def qv_curve(path: GridPath, p: Partition) -> np.ndarray:
    """The step function [X,X]^pi evaluated at every grid time."""
    x = path.x
    return product_curve(x, x, p)


def discrete_qv(path: GridPath, p: Partition, t: float) -> float:
    """[X,X]^pi_t for arbitrary t <= T (path right-continuous between samples)."""
    if t > path.grid.T:
        raise ValueError("t beyond the horizon")
    g = path.grid.clamp_index(t)
    j = np.minimum(p.indices, g)
    d = np.diff(path.x[j])
    return float(np.sum(d * d))


# ---------------------------------------------------------------------------
# Limits along a sequence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QVResult:
    """Per-level QV curves, the limit estimate, and its decomposition.

    ``estimate`` is the top-level curve (or the exact jump sum for paths
    declared finite-variation).  ``jump_part`` is J_t = sum of squared jumps
    up to t, ``continuous_part`` is the estimate minus J.  ``level_gaps``
    hold the sup-distance of each non-top level to the estimate; ``cond2``
    reports the worst violation of the jump identity d[X,X]_t = (dX_t)^2 at
    the declared jump times.
    """

    grid: TimeGrid
    level_curves: tuple
    estimate: np.ndarray
    jump_part: np.ndarray
    continuous_part: np.ndarray
    level_gaps: tuple
    trend: TrendReport
    cond2_worst: float
    cond2_ok: bool
    status: str
    diagonal: bool = True
    fv_exact: bool = False
    estimate_nondecreasing: bool = True

    @property
    def ok(self) -> bool:
        return self.status in ("converged", "exact-fv")

    def at(self, t: float) -> float:
        return float(self.estimate[self.grid.clamp_index(t)])

    def continuous_at(self, t: float) -> float:
        return float(self.continuous_part[self.grid.clamp_index(t)])

    def to_report(self) -> dict:
        return {
            "levels": len(self.level_curves),
            "gaps": list(self.level_gaps),
            "cond2_worst": self.cond2_worst,
            "status": self.status,
        }


def _jump_square_curve(path: GridPath, other: GridPath | None = None) -> np.ndarray:
    n = len(path.grid)
    out = np.zeros(n)
    o = other if other is not None else path
    for i in sorted(set(path.jumps) | set(o.jumps)):
        out[i:] += path.jump_at(i)[0] * o.jump_at(i)[0]
    return out


def _assemble(
    x: GridPath,
    y: GridPath,
    seq: PartitionSequence,
    curves: list[np.ndarray],
    tol: float,
    cond2_abs: float,
    cond2_rel: float,
    fv_exact: bool,
) -> QVResult:
    jump_part = _jump_square_curve(x, y)
    if fv_exact:
        estimate = jump_part.copy()
    else:
        estimate = curves[-1]
    cont = estimate - jump_part
    gaps = tuple(sup_distance(c, estimate) for c in curves[: len(curves) - (0 if fv_exact else 1)])
    trend = TrendReport(gaps, tol, TREND_WINDOW)

    xs, ys = x.x, y.x
    xl, yl = left_values(x)[:, 0], left_values(y)[:, 0]
    top = seq.top
    worst = 0.0
    ok = True
    for j in sorted(set(x.jumps) | set(y.jumps)):
        k = int(np.searchsorted(top.indices, j, side="left")) - 1
        a = int(top.indices[max(k, 0)])
        measured = (xs[j] - xs[a]) * (ys[j] - ys[a]) - (xl[j] - xs[a]) * (yl[j] - ys[a])
        dx, dy = xs[j] - xl[j], ys[j] - yl[j]
        target = dx * dy
        v = abs(measured - target)
        worst = max(worst, v)
        # the violation is the pre-jump anchor motion times the jump: zero
        # for paths flat before their jumps, tol-scaled slack otherwise
        if v > max(cond2_abs, cond2_rel * abs(target)) + tol * (abs(dx) + abs(dy)):
            ok = False

    if not ok:
        status = "no-qv"
    elif fv_exact:
        status = "exact-fv"
    else:
        status = trend.status
    scale = float(np.max(np.abs(estimate))) or 1.0
    monotone = bool(np.all(np.diff(estimate) >= -1e-12 * scale)) if x is y else True
    return QVResult(
        grid=x.grid,
        level_curves=tuple(curves),
        estimate=estimate,
        jump_part=jump_part,
        continuous_part=cont,
        level_gaps=gaps,
        trend=trend,
        cond2_worst=worst,
        cond2_ok=ok,
        status=status,
        diagonal=x is y,
        fv_exact=fv_exact,
        estimate_nondecreasing=monotone,
    )


def qv_sequence(
    path: GridPath,
    seq: PartitionSequence,
    tol: float = DETERMINISTIC_TOL,
    cond2_abs: float = 1e-9,
    cond2_rel: float = 1e-6,
    fv_exact: bool | None = None,
) -> QVResult:
    """Quadratic variation of a scalar path along a partition sequence.

    For ``FVPath`` inputs the limit is the accumulated squared jumps (the
    finite-variation rule), exactly; the per-level curves then only document
    the trend.  Otherwise the top-level curve is the limit estimate and the
    trend plus the jump identity decide the status.
    """
    if fv_exact is None:
        fv_exact = isinstance(path, FVPath)
    curves = [qv_curve(path, p) for p in seq]
    return _assemble(path, path, seq, curves, tol, cond2_abs, cond2_rel, fv_exact)


def covariation(
    x: GridPath,
    y: GridPath,
    seq: PartitionSequence,
    tol: float = DETERMINISTIC_TOL,
    cond2_abs: float = 1e-9,
    cond2_rel: float = 1e-6,
    fv_exact: bool | None = None,
) -> QVResult:
    """[X,Y] by polarization of the squared-increment curves.

    The per-level curves are (1/2)([X+Y] - [X] - [Y]), which coincides bit
    for bit with the product-increment curve.  The jump identity checked is
    d[X,Y]_t = dX_t dY_t.
    """
    if x.grid is not y.grid and not np.array_equal(x.grid.times, y.grid.times):
        raise ValueError("paths live on different grids")
    if fv_exact is None:
        fv_exact = isinstance(x, FVPath) and isinstance(y, FVPath)
    s = add_paths(x, y)
    curves = [
        0.5 * (qv_curve(s, p) - qv_curve(x, p) - qv_curve(y, p))
        for p in seq
    ]
    return _assemble(x, y, seq, curves, tol, cond2_abs, cond2_rel, fv_exact)


class CovMatrix:
    """Symmetric d x d table of covariation results for a vector path."""

    def __init__(self, x: GridPath, seq: PartitionSequence, **kwargs):
        self.dim = x.dim
        self._entries = {}
        for i in range(x.dim):
            for j in range(i, x.dim):
                xi, xj = x.component(i), x.component(j)
                self._entries[(i, j)] = (
                    qv_sequence(xi, seq, **kwargs)
                    if i == j
                    else covariation(xi, xj, seq, **kwargs)
                )

    def __getitem__(self, ij) -> QVResult:
        i, j = ij
        return self._entries[(i, j) if i <= j else (j, i)]

    @property
    def ok(self) -> bool:
        return all(entry.ok for entry in self._entries.values())


# ---------------------------------------------------------------------------
# Discrete measures mu^pi and their convergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    """mu = sum of a_i delta_{t_i} with atoms at partition points.

    ``boundaries`` are the full partition times; atom i represents the
    increment over ]boundaries[i], boundaries[i+1]].  Weights may be signed
    for covariation measures.
    """

    times: np.ndarray
    weights: np.ndarray
    boundaries: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if t.shape != w.shape:
            raise ValueError("times and weights must align")
        if np.any(np.diff(t) <= 0):
            raise ValueError("atom times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "weights", w)
        if self.boundaries is not None:
            b = np.asarray(self.boundaries, dtype=float)
            if b.size != t.size + 1:
                raise ValueError("boundaries must have one more entry than atoms")
            object.__setattr__(self, "boundaries", b)

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.weights >= 0.0))

    def mass(self, t: float, closed: bool = True) -> float:
        """mu([0, t]) (closed) or mu([0, t[) of the atom representation."""
        side = "right" if closed else "left"
        k = int(np.searchsorted(self.times, t, side=side))
        return float(np.sum(self.weights[:k]))

    def atom_at(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t))
        if k < self.times.size and self.times[k] == t:
            return float(self.weights[k])
        return 0.0

    def integrate(self, f: Callable[[np.ndarray], np.ndarray], t: float) -> float:
        """Sum of a_i f(t_i) over atoms with t_i <= t."""
        k = int(np.searchsorted(self.times, t, side="right"))
        if k == 0:
            return 0.0
        return float(np.sum(self.weights[:k] * np.asarray(f(self.times[:k]), dtype=float)))

    def straddling_weight(self, t: float) -> float:
        """Weight of the atom whose interval ]b_i, b_{i+1}] contains t."""
        if self.boundaries is None:
            raise ValueError("measure carries no interval boundaries")
        i = int(np.searchsorted(self.boundaries, t, side="left")) - 1
        if not 0 <= i < self.weights.size:
            return 0.0
        return float(self.weights[i])


def qv_measure(x: GridPath, y: GridPath, p: Partition) -> DiscreteMeasure:
    """mu^pi_{X,Y}: atom (t_i, delta_i X * delta_i Y) per partition interval."""
    if x.grid is not y.grid and not np.array_equal(x.grid.times, y.grid.times):
        raise ValueError("paths live on different grids")
    idx = p.indices
    w = np.diff(x.x[idx]) * np.diff(y.x[idx])
    return DiscreteMeasure(p.times[:-1], w, boundaries=p.times)


@dataclass(frozen=True)
class MeasureVsQVReport:
    t: float
    qv: tuple
    mass_closed: tuple
    mass_open: tuple
    diff_closed: tuple
    diff_open: tuple
    bound: tuple
    bounded: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "qv": list(self.qv),
            "diff_closed": list(self.diff_closed),
            "diff_open": list(self.diff_open),
            "bound": list(self.bound),
            "bounded": self.bounded,
        }


def measure_vs_qv_check(x: GridPath, seq: PartitionSequence, t: float) -> MeasureVsQVReport:
    """Compare [X,X]^{pi_n}_t with mu^{pi_n}_X([0,t]) level by level.

    The closed-interval difference obeys the straddle bound
    |diff| <= 4 sup_{s <= t+|pi_n|} |X_s| |X_{t_{i+1}} - X_t| with
    t in [t_i, t_{i+1}[; when t is a partition point the open-interval
    difference vanishes identically.
    """
    xs = x.x
    qv, mc, mo, dc, do, bounds = [], [], [], [], [], []
    for p in seq:
        v = discrete_qv(x, p, t)
        mu = qv_measure(x, x, p)
        closed = mu.mass(t, closed=True)
        opened = mu.mass(t, closed=False)
        qv.append(v)
        mc.append(closed)
        mo.append(opened)
        dc.append(abs(v - closed))
        do.append(abs(v - opened))
        times = p.times
        i = int(np.searchsorted(times, t, side="right")) - 1
        nxt = times[min(i + 1, len(times) - 1)]
        g_hi = x.grid.clamp_index(min(x.grid.T, t + float(np.max(np.diff(times)))))
        sup_x = float(np.max(np.abs(xs[: g_hi + 1])))
        x_next = xs[x.grid.clamp_index(nxt)]
        x_t = xs[x.grid.clamp_index(t)]
        bounds.append(4.0 * sup_x * abs(x_next - x_t))
    scale = max(1.0, max(qv, default=1.0))
    bounded = all(d <= b + 1e-12 * scale for d, b in zip(dc, bounds))
    return MeasureVsQVReport(
        t, tuple(qv), tuple(mc), tuple(mo), tuple(dc), tuple(do), tuple(bounds), bounded
    )


@dataclass(frozen=True)
class WeightedSumReport:
    per_level: tuple
    target: float
    gaps: tuple
    trend: TrendReport


def weighted_sum_limit(
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: GridPath,
    y: GridPath | None,
    i: int,
    j: int,
    seq: PartitionSequence,
    t: float,
    tol: float = DETERMINISTIC_TOL,
) -> WeightedSumReport:
    """Check the weighted-sum convergence

        integral of g(X_s, Y_s) d mu^{pi_n}_{X^i,X^j}  -->
        integral of g(X_{s-}, Y_{s-}) d [X^i,X^j]  over [0, t].

    The target is a Stieltjes sum over the top-level covariation curve with
    the weight evaluated at true left limits.
    """
    xi, xj = x.component(i), x.component(j)
    cov = covariation(xi, xj, seq) if i != j else qv_sequence(xi, seq)
    gidx = x.grid.clamp_index(t)

    def weight(values_x: np.ndarray, values_y: np.ndarray | None) -> np.ndarray:
        if y is None:
            return np.asarray(g(values_x), dtype=float)
        return np.asarray(g(values_x, values_y), dtype=float)

    per_level = []
    for p in seq:
        mu = qv_measure(xi, xj, p)
        k = int(np.searchsorted(mu.times, t, side="right"))
        if k == 0:
            per_level.append(0.0)
            continue
        atom_gidx = np.searchsorted(x.grid.times, mu.times[:k], side="right") - 1
        w = weight(x.values[atom_gidx], None if y is None else y.values[atom_gidx])
        per_level.append(float(np.sum(mu.weights[:k] * w)))

    xv_left = left_values(x)
    yv_left = left_values(y) if y is not None else None
    h_left = weight(xv_left, yv_left)
    target = float(np.sum(h_left[1 : gidx + 1] * np.diff(cov.estimate[: gidx + 1])))
    gaps = tuple(abs(v - target) for v in per_level)
    trend = TrendReport(gaps, tol, TREND_WINDOW)
    return WeightedSumReport(tuple(per_level), target, gaps, trend)


def _left_value_at(path: GridPath, s: float) -> float:
    """f(s-) for a grid step function: exact left limit at grid times."""
    g = path.grid.clamp_index(s)
    if path.grid.times[g] == s:
        return float(eval_left_limit(path, g)[0])
    return float(path.values[g, 0])


@dataclass(frozen=True)
class MeasureConvergenceReport:
    distribution_gaps: tuple
    condition_star_gaps: dict
    integral_per_level: tuple
    integral_target: float
    integral_gaps: tuple
    trend: TrendReport
    hypotheses_ok: bool


def measure_convergence_check(
    mus: Sequence[DiscreteMeasure],
    mu: DiscreteMeasure,
    f: GridPath,
    t: float,
    tol: float = DETERMINISTIC_TOL,
    atom_tol: float = 1e-12,
) -> MeasureConvergenceReport:
    """Numerical verification of discrete-measure convergence to a limit.

    Hypotheses checked as trends: the distribution functions of mu_n converge
    pointwise to that of mu, and the straddling-atom weights a^n_{i_n}
    converge to mu({t}) at every atom of mu.  The conclusion checked is

        integral of f d mu_n over [0,t]  -->  integral of f(s-) d mu.

    Negative atoms are rejected; the convergence statement needs a^n_i >= 0.
    """
    for m in mus:
        if not m.nonnegative:
            raise ValueError("discrete-measure convergence needs nonnegative atoms")

    samples = [0.0, t]
    samples.extend(float(s) for s in mu.times if s <= t)
    mid = [(a + b) / 2 for a, b in zip(sorted(samples), sorted(samples)[1:])]
    samples = sorted(set(samples + mid))
    dist_gaps = tuple(
        max(abs(m.mass(s) - mu.mass(s)) for s in samples) for m in mus
    )

    star: dict[float, tuple] = {}
    for s, w in zip(mu.times, mu.weights):
        if s > t or abs(w) <= atom_tol:
            continue
        gaps = tuple(abs(m.straddling_weight(s) - w) for m in mus)
        star[float(s)] = gaps

    def f_vals(times: np.ndarray) -> np.ndarray:
        return np.array([f.values[f.grid.clamp_index(s), 0] for s in times])

    per_level = tuple(m.integrate(f_vals, t) for m in mus)
    k = int(np.searchsorted(mu.times, t, side="right"))
    target = float(
        sum(w * _left_value_at(f, s) for s, w in zip(mu.times[:k], mu.weights[:k]))
    )
    gaps = tuple(abs(v - target) for v in per_level)
    trend = TrendReport(gaps, tol, TREND_WINDOW)
    hyp_ok = TrendReport(dist_gaps, tol).nonincreasing and all(
        TrendReport(g, tol).nonincreasing for g in star.values()
    )
    return MeasureConvergenceReport(
        dist_gaps, star, per_level, target, gaps, trend, hyp_ok
    )
