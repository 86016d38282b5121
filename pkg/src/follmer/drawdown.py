"""Azema-Yor paths, floor transforms, and the drawdown equation.

For a C^2 function U and a path X with continuous running maximum Xbar,

    M^U_t(X) = U(Xbar_t) - U'(Xbar_t)(Xbar_t - X_t) = U(X_0) + int U'(Xbar_s) dX_s.

A floor function w with positive margin y - w(y) generates the transform
V(y) = a exp(int_{a*}^{y} ds / (s - w(s))) and its inverse U; M^U(X) is then
the unique solution of the drawdown equation

    Y_t = a* + int (Y_{s-} - w(Ybar_s)) / X_{s-} dX_s

that respects the strict constraint Y ^ Y_- > w(Ybar).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .diagnostics import DETERMINISTIC_TOL, TREND_WINDOW, TrendReport, sup_distance
from .equations import doleans_exponential
from .integrals import follmer_integral, integral_curve
from .partitions import PartitionSequence
from .paths import GridPath, left_values, reciprocal_path, running_maximum

__all__ = [
    "MonotoneC2Function",
    "FloorFunction",
    "floor_zero",
    "floor_proportional",
    "floor_constant_margin",
    "floor_from_table",
    "builtin_floor",
    "floor_to_transform",
    "azema_yor_path",
    "max_identity_check",
    "solve_drawdown",
    "uniqueness_probe",
]


@dataclass(frozen=True)
class MonotoneC2Function:
    """Scalar C^2 function on [domain_start, infinity) with derivatives.

    Only right derivatives are meant at the left endpoint.  All callables
    are vectorized.
    """

    value: Callable
    d1: Callable
    d2: Callable
    domain_start: float
    increasing: bool = True
    name: str = ""

    def __call__(self, y):
        return np.asarray(self.value(np.asarray(y, dtype=float)), dtype=float)

    def deriv(self, y):
        return np.asarray(self.d1(np.asarray(y, dtype=float)), dtype=float)

    def deriv2(self, y):
        return np.asarray(self.d2(np.asarray(y, dtype=float)), dtype=float)

    def validate(self, samples: np.ndarray, rtol: float = 1e-5) -> None:
        s = np.asarray(samples, dtype=float)
        h = 1e-5 * (1.0 + np.abs(s))
        inside = s - h > self.domain_start
        s, h = s[inside], h[inside]
        num1 = (self(s + h) - self(s - h)) / (2 * h)
        if not np.all(np.abs(self.deriv(s) - num1) <= rtol * (1.0 + np.abs(num1))):
            raise ValueError(f"{self.name or 'U'}: first derivative mismatch")
        num2 = (self.deriv(s + h) - self.deriv(s - h)) / (2 * h)
        if not np.all(np.abs(self.deriv2(s) - num2) <= 1e-3 * (1.0 + np.abs(num2))):
            raise ValueError(f"{self.name or 'U'}: second derivative mismatch")


def affine_u(alpha: float, beta: float, domain_start: float = 0.0) -> MonotoneC2Function:
    return MonotoneC2Function(
        value=lambda y: alpha * y + beta,
        d1=lambda y: np.full_like(np.asarray(y, dtype=float), alpha),
        d2=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
        domain_start=domain_start,
        increasing=alpha > 0,
        name=f"affine({alpha},{beta})",
    )


def identity_u(domain_start: float = 0.0) -> MonotoneC2Function:
    return affine_u(1.0, 0.0, domain_start)


def compose_u(outer: MonotoneC2Function, inner: MonotoneC2Function) -> MonotoneC2Function:
    """outer(inner(y)) with chain-rule derivatives."""

    def d1(y):
        return outer.d1(inner(y)) * inner.d1(y)

    def d2(y):
        f = inner(y)
        return outer.d2(f) * inner.d1(y) ** 2 + outer.d1(f) * inner.d2(y)

    return MonotoneC2Function(
        value=lambda y: outer(inner(y)),
        d1=d1,
        d2=d2,
        domain_start=inner.domain_start,
        increasing=outer.increasing == inner.increasing,
        name=f"{outer.name}o{inner.name}",
    )


# ---------------------------------------------------------------------------
# Floor functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FloorFunction:
    """C^1 floor w on [a_star, infinity) with margin m(y) = y - w(y) > 0."""

    w: Callable
    dw: Callable
    a_star: float
    name: str = ""

    def __call__(self, y):
        return np.asarray(self.w(np.asarray(y, dtype=float)), dtype=float)

    def margin(self, y):
        y = np.asarray(y, dtype=float)
        return y - self(y)


def floor_zero(a_star: float) -> FloorFunction:
    return FloorFunction(
        w=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
        dw=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
        a_star=a_star,
        name="zero",
    )


def floor_proportional(alpha: float, a_star: float) -> FloorFunction:
    if not 0.0 <= alpha < 1.0:
        raise ValueError("proportional floor needs 0 <= alpha < 1")
    return FloorFunction(
        w=lambda y: alpha * np.asarray(y, dtype=float),
        dw=lambda y: np.full_like(np.asarray(y, dtype=float), alpha),
        a_star=a_star,
        name=f"proportional({alpha})",
    )


def floor_constant_margin(c: float, a_star: float) -> FloorFunction:
    if c <= 0:
        raise ValueError("constant margin must be positive")
    return FloorFunction(
        w=lambda y: np.asarray(y, dtype=float) - c,
        dw=lambda y: np.ones_like(np.asarray(y, dtype=float)),
        a_star=a_star,
        name=f"constant-margin({c})",
    )


def floor_from_table(ys, ws, a_star: float | None = None) -> FloorFunction:
    """User floor from a monotone table, interpolated shape-preservingly."""
    ys = np.asarray(ys, dtype=float)
    ws = np.asarray(ws, dtype=float)
    interp = PchipInterpolator(ys, ws, extrapolate=True)
    dinterp = interp.derivative()
    return FloorFunction(
        w=lambda y: interp(np.asarray(y, dtype=float)),
        dw=lambda y: dinterp(np.asarray(y, dtype=float)),
        a_star=float(ys[0]) if a_star is None else a_star,
        name="table",
    )


def builtin_floor(name: str, a_star: float, **params) -> FloorFunction:
    if name == "zero":
        return floor_zero(a_star)
    if name == "proportional":
        return floor_proportional(params["alpha"], a_star)
    if name == "constant-margin":
        return floor_constant_margin(params["c"], a_star)
    if name == "table":
        return floor_from_table(params["ys"], params["ws"], a_star)
    raise KeyError(f"unknown floor {name!r}")


# ---------------------------------------------------------------------------
# The floor transform V(y) = a exp(int 1/(s - w(s)) ds) and its inverse
# ---------------------------------------------------------------------------


class _CumulativeExponent:
    """I(y) = int_{a_star}^{y} ds / m(s), tabulated and C^1-interpolated.

    Node values are exact quadratures; between nodes a Hermite cubic with the
    analytic slope 1/m is used.  The table extends on demand.
    """

    def __init__(self, floor: FloorFunction, nodes_per_unit: int = 256):
        self.floor = floor
        self.a_star = floor.a_star
        self.nodes_per_unit = nodes_per_unit
        self._nodes = np.array([self.a_star])
        self._vals = np.array([0.0])
        self._spline = None
        self.ensure(self.a_star + 1.0)

    def _extend_to(self, hi: float) -> None:
        lo = float(self._nodes[-1])
        span = hi - lo
        count = max(8, int(math.ceil(span * self.nodes_per_unit)))
        new = np.linspace(lo, hi, count + 1)[1:]
        margins = self.floor.margin(new)
        if np.any(margins <= 0.0):
            bad = float(new[np.argmax(margins <= 0.0)])
            raise ValueError(f"floor margin y - w(y) is not positive near y = {bad}")
        vals = []
        acc = float(self._vals[-1])
        prev = lo
        for y in new:
            seg, _ = quad(lambda s: 1.0 / float(self.floor.margin(s)), prev, y, epsabs=1e-13, epsrel=1e-12)
            acc += seg
            vals.append(acc)
            prev = y
        self._nodes = np.concatenate([self._nodes, new])
        self._vals = np.concatenate([self._vals, np.asarray(vals)])
        slopes = 1.0 / self.floor.margin(self._nodes)
        self._spline = CubicHermiteSpline(self._nodes, self._vals, slopes)

    def ensure(self, y_max: float) -> None:
        if y_max > self._nodes[-1] or self._spline is None:
            self._extend_to(max(y_max, self._nodes[-1] + 0.5))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if y.size and float(np.max(y)) > self._nodes[-1]:
            self.ensure(float(np.max(y)) + 0.25)
        return self._spline(y)

    def invert(self, target):
        """Solve I(y) = target by table bracket plus Newton (I' = 1/m)."""
        target = np.asarray(target, dtype=float)
        while float(np.max(target)) > self._vals[-1]:
            self._extend_to(self._nodes[-1] * 1.5 + 1.0)
        y = np.interp(target, self._vals, self._nodes)
        lo, hi = self._nodes[0], self._nodes[-1]
        for _ in range(60):
            err = self(y) - target
            y_new = np.clip(y - err * self.floor.margin(y), lo, hi)
            if np.allclose(y_new, y, rtol=0.0, atol=1e-14 * (1.0 + np.abs(y).max())):
                y = y_new
                break
            y = y_new
        return y


@dataclass(frozen=True)
class DrawdownTransform:
    V: MonotoneC2Function
    U: MonotoneC2Function
    floor: FloorFunction
    a: float
    roundtrip_error: float


def floor_to_transform(
    floor: FloorFunction,
    a: float,
    y_hint: float | None = None,
) -> DrawdownTransform:
    """Build V(y) = a exp(int_{a*}^{y} ds/(s - w(s))) and U = V^{-1}.

    V' = V / m(y) and V'' = V w'(y) / m(y)^2 are analytic given V; U comes
    from monotone inversion of the tabulated exponent, with U' = m(U(x)) / x
    and U'' = -m(U(x)) w'(U(x)) / x^2.  The round trip U(V(y)) = y is checked
    on a sample of the tabulated range.
    """
    if a <= 0:
        raise ValueError("the transform needs a > 0")
    exponent = _CumulativeExponent(floor)
    if y_hint is not None:
        exponent.ensure(float(y_hint))
    a_star = floor.a_star

    def v_val(y):
        return a * np.exp(exponent(y))

    def v_d1(y):
        return v_val(y) / floor.margin(y)

    def v_d2(y):
        m = floor.margin(y)
        return v_val(y) * np.asarray(floor.dw(np.asarray(y, dtype=float)), dtype=float) / (m * m)

    V = MonotoneC2Function(v_val, v_d1, v_d2, a_star, True, name="V")

    def u_val(x):
        return exponent.invert(np.log(np.asarray(x, dtype=float) / a))

    def u_d1(x):
        x = np.asarray(x, dtype=float)
        return floor.margin(u_val(x)) / x

    def u_d2(x):
        x = np.asarray(x, dtype=float)
        u = u_val(x)
        return -floor.margin(u) * np.asarray(floor.dw(u), dtype=float) / (x * x)

    U = MonotoneC2Function(u_val, u_d1, u_d2, a, True, name="U")

    ys = np.linspace(a_star, float(exponent._nodes[-1]), 1000)
    rt = float(np.max(np.abs(U(V(ys)) - ys)))
    if rt > 1e-9 * (1.0 + float(np.max(np.abs(ys)))):
        raise ValueError(f"transform round trip off by {rt}")
    return DrawdownTransform(V, U, floor, a, rt)


# ---------------------------------------------------------------------------
# Azema-Yor paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AzemaYorReport:
    path: GridPath
    a_star: float
    integral_residual: float | None
    residual_per_level: tuple
    trend: TrendReport | None


def azema_yor_path(
    u: MonotoneC2Function,
    x: GridPath,
    seq: PartitionSequence | None = None,
    tol: float = DETERMINISTIC_TOL,
) -> AzemaYorReport:
    """M^U(X) = U(Xbar) - U'(Xbar)(Xbar - X), with the integral check.

    Requires a continuous running maximum; rejects otherwise.  When a
    sequence is supplied, the residual of M^U_t(X) = U(X_0) + int U'(Xbar) dX
    is reported per level at the horizon.
    """
    xbar, cont = running_maximum(x)
    if not cont:
        raise ValueError("running maximum is discontinuous at grid scale")
    if x.x[0] < u.domain_start - 1e-12:
        raise ValueError("X_0 is below the domain of U")
    mb = xbar.x
    uv, du = u(mb), u.deriv(mb)
    m_vals = uv - du * (mb - x.x)
    jumps = {i: float(du[i] * dx[0]) for i, dx in x.jumps.items()}
    path = GridPath(x.grid, m_vals, jumps)
    a_star = float(u(np.array([x.x[0]]))[0])

    if seq is None:
        return AzemaYorReport(path, a_star, None, (), None)
    g = len(x.grid) - 1
    integrand = GridPath(x.grid, du)
    residuals = []
    for p in seq:
        curve = integral_curve(integrand.values, x.values, p)
        residuals.append(abs(float(m_vals[g]) - a_star - float(curve[g])))
    trend = TrendReport(tuple(residuals), tol, TREND_WINDOW)
    return AzemaYorReport(path, a_star, residuals[-1], tuple(residuals), trend)


@dataclass(frozen=True)
class MaxIdentityReport:
    max_identity_sup: float
    max_still_continuous: bool
    composition_sup: float | None


def max_identity_check(
    u: MonotoneC2Function,
    x: GridPath,
    f: MonotoneC2Function | None = None,
) -> MaxIdentityReport:
    """sup | max(M^U(X)) - U(Xbar) |, and M^U(M^F(X)) vs M^{U o F}(X)."""
    if not u.increasing:
        raise ValueError("the max identity needs increasing U")
    m = azema_yor_path(u, x).path
    mbar, cont = running_maximum(m)
    xbar, _ = running_maximum(x)
    d1 = sup_distance(mbar.x, u(xbar.x))
    comp = None
    if f is not None:
        inner = azema_yor_path(f, x).path
        lhs = azema_yor_path(u, inner).path
        rhs = azema_yor_path(compose_u(u, f), x).path
        comp = sup_distance(lhs.x, rhs.x)
    return MaxIdentityReport(d1, cont, comp)


# ---------------------------------------------------------------------------
# The drawdown equation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DrawdownSolveReport:
    y: GridPath
    transform: DrawdownTransform
    residual: float
    residual_per_level: tuple
    trend: TrendReport
    constraint_margin: float

    @property
    def constraint_ok(self) -> bool:
        return self.constraint_margin > 0.0


def solve_drawdown(
    floor: FloorFunction,
    x: GridPath,
    seq: PartitionSequence,
    tol: float = DETERMINISTIC_TOL,
) -> DrawdownSolveReport:
    """Solve Y = a* + int (Y_- - w(Ybar)) / X_- dX for positive X.

    The solution is the Azema-Yor path M^U(X) with U from the floor
    transform.  The report carries the substitution residual per level and
    the worst-case strict-constraint margin min(Y ^ Y_- - w(Ybar)).
    """
    xl = left_values(x)[:, 0]
    if np.any(x.x <= 0.0) or np.any(xl <= 0.0):
        raise ValueError("the drawdown construction needs X > 0 and X_- > 0")
    xbar, cont = running_maximum(x)
    if not cont:
        raise ValueError("running maximum is discontinuous at grid scale")
    a = float(x.x[0])
    transform = floor_to_transform(floor, a, y_hint=None)
    transform.U(np.array([float(xbar.x.max())]))  # force table coverage
    ay = azema_yor_path(transform.U, x)
    y = ay.path
    ybar, _ = running_maximum(y)
    w_ybar = floor(ybar.x)

    xi_vals = (y.x - w_ybar) / x.x
    residuals = []
    g = len(x.grid) - 1
    for p in seq:
        curve = integral_curve(xi_vals[:, None], x.values, p)
        residuals.append(abs(float(y.x[g]) - floor.a_star - float(curve[g])))
    trend = TrendReport(tuple(residuals), tol, TREND_WINDOW)

    y_left = left_values(y)[:, 0]
    margin = float(np.min(np.minimum(y.x, y_left) - w_ybar))
    return DrawdownSolveReport(y, transform, residuals[-1], tuple(residuals), trend, margin)


@dataclass(frozen=True)
class UniquenessReport:
    integral_distance: float
    path_distance: float
    reconstruction_x: float
    reconstruction_y: float
    derived_tol: float
    consistent: bool


def uniqueness_probe(
    x: GridPath,
    y: GridPath,
    seq: PartitionSequence,
    t: float,
    tol: float = DETERMINISTIC_TOL,
    qv_tol: float | None = None,
) -> UniquenessReport:
    """If int dX/X_- and int dY/Y_- agree, X and Y must agree.

    Both relative-increment integrals are estimated, the paths are rebuilt
    as X_0 E(int dX/X_-), and the report compares the integral distance with
    the path distance through the reconstruction errors.
    """
    xl, yl = left_values(x)[:, 0], left_values(y)[:, 0]
    if np.any(x.x <= 0) or np.any(xl <= 0) or np.any(y.x <= 0) or np.any(yl <= 0):
        raise ValueError("the probe needs strictly positive paths and left limits")
    if float(x.x[0]) != float(y.x[0]):
        raise ValueError("the probe needs X_0 = Y_0")
    g = x.grid.clamp_index(t)
    qt = tol if qv_tol is None else qv_tol

    def rel_integral(p: GridPath) -> GridPath:
        return follmer_integral(reciprocal_path(p), p, seq, tol=tol).path

    zx, zy = rel_integral(x), rel_integral(y)
    d_int = sup_distance(zx.x[: g + 1], zy.x[: g + 1])

    def reconstruct(z: GridPath, p0: float) -> np.ndarray:
        se = doleans_exponential(z, seq, tol=qt)
        return p0 * se.values

    rx = sup_distance(reconstruct(zx, float(x.x[0]))[: g + 1], x.x[: g + 1])
    ry = sup_distance(reconstruct(zy, float(y.x[0]))[: g + 1], y.x[: g + 1])
    d_path = sup_distance(x.x[: g + 1], y.x[: g + 1])
    scale = float(max(np.max(x.x[: g + 1]), np.max(y.x[: g + 1])))
    derived = rx + ry + float(x.x[0]) * (math.exp(d_int) - 1.0) * max(
        1.0, scale / float(x.x[0])
    )
    consistent = d_path <= derived + tol * max(1.0, scale)
    return UniquenessReport(d_int, d_path, rx, ry, derived, consistent)
