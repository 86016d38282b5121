"""Portfolio insurance on pathwise markets: DPPI/CPPI and drawdown strategies.

A market is one risky price S (a path with quadratic variation, strictly
positive together with its left limits) and one riskless price B (finite
variation, positive, B_0 = 1).  A strategy (xi, eta) holds xi units of S and
eta of B; it is self-financing when V = V_0 + int xi_- dS + int eta_- dB.

The DPPI construction keeps the value above the floor L B for nonincreasing
L >= 0 and initial wealth V_0 >= L_0: the cushion is driven by the
exponential of X = int (m_-/S_-) dS + int ((1-m_-)/B_-) dB, and with
dX > -1 the exponential stays positive, so the floor is respected by
construction at every grid point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .diagnostics import DETERMINISTIC_TOL, TREND_WINDOW, TrendReport
from .drawdown import FloorFunction, azema_yor_path, floor_to_transform
from .equations import StochasticExponential, doleans_exponential
from .integrals import AdmissibleIntegrand, integral_curve
from .partitions import PartitionSequence
from .paths import FVPath, GridPath, TimeGrid, left_values, running_maximum
from .stieltjes import stieltjes_fv_curve

__all__ = [
    "Market",
    "Strategy",
    "FloorSpec",
    "make_strategy",
    "dppi",
    "self_financing_residual",
    "discounted_equivalence",
    "drawdown_strategy",
    "read_market_csv",
    "write_strategy_csv",
]


@dataclass(frozen=True)
class Market:
    """Risky price S and riskless price B on one shared grid."""

    s: GridPath
    b: FVPath

    def __post_init__(self):
        if len(self.s.grid) != len(self.b.grid) or not np.array_equal(
            self.s.grid.times, self.b.grid.times
        ):
            raise ValueError("S and B must share one grid")
        sl, bl = left_values(self.s)[:, 0], left_values(self.b)[:, 0]
        if np.any(self.s.x <= 0) or np.any(sl <= 0):
            raise ValueError("S and S_- must be strictly positive")
        if np.any(self.b.x <= 0) or np.any(bl <= 0):
            raise ValueError("B and B_- must be strictly positive")
        if self.b.x[0] != 1.0:
            raise ValueError("B_0 must equal 1")

    @property
    def grid(self) -> TimeGrid:
        return self.s.grid

    def discounted(self) -> GridPath:
        """S~ = S / B with its declared jumps."""
        vals = self.s.x / self.b.x
        sl, bl = left_values(self.s)[:, 0], left_values(self.b)[:, 0]
        jumps = {}
        for i in sorted(set(self.s.jumps) | set(self.b.jumps)):
            dv = vals[i] - sl[i] / bl[i]
            if dv != 0.0:
                jumps[i] = dv
        return GridPath(self.grid, vals, jumps)


@dataclass(frozen=True)
class Strategy:
    """Holdings (xi, eta) and the value path V = xi S + eta B."""

    xi: GridPath
    eta: GridPath
    value: GridPath


def make_strategy(market: Market, xi: GridPath, eta: GridPath) -> Strategy:
    v = xi.x * market.s.x + eta.x * market.b.x
    xl, el = left_values(xi)[:, 0], left_values(eta)[:, 0]
    sl, bl = left_values(market.s)[:, 0], left_values(market.b)[:, 0]
    v_left = xl * sl + el * bl
    jumps = {}
    for i in sorted(
        set(market.s.jumps) | set(market.b.jumps) | set(xi.jumps) | set(eta.jumps)
    ):
        dv = v[i] - v_left[i]
        if dv != 0.0:
            jumps[i] = dv
    return Strategy(xi, eta, GridPath(market.grid, v, jumps))


def constant_path(grid: TimeGrid, c: float) -> GridPath:
    return GridPath(grid, np.full(len(grid), float(c)))


@dataclass(frozen=True)
class FloorSpec:
    """Floor multiplier L (finite variation, >= 0); the floor is K = L B."""

    l: FVPath

    def __post_init__(self):
        if np.any(self.l.x < 0):
            raise ValueError("L must be nonnegative")

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.l.x) <= 1e-15))


def _multiplier_values(m, grid) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(m, AdmissibleIntegrand):
        return m.values[:, 0], m.values_left[:, 0]
    if isinstance(m, GridPath):
        raise TypeError("raw multiplier paths are rejected; supply a witness or a constant")
    v = np.full(len(grid), float(m))
    return v, v.copy()


@dataclass(frozen=True)
class DppiReport:
    strategy: Strategy
    x_path: GridPath
    exponential: StochasticExponential
    floor_curve: np.ndarray
    floor_margin: float
    floor_ok: bool
    self_financing: "SelfFinancingReport"
    general_floor_gap: np.ndarray


def dppi(
    market: Market,
    m,
    floor: FloorSpec,
    v0: float,
    seq: PartitionSequence,
    tol: float = DETERMINISTIC_TOL,
) -> DppiReport:
    """Build the self-financing DPPI strategy for multiplier m and floor L B.

    m is an admissible-integrand witness or a constant.  The driver
    X = int (m_-/S_-) dS + int ((1-m_-)/B_-) dB must satisfy dX != -1;
    when dX > -1 throughout, V >= L B is asserted at every grid point.
    The jump sum of the value formula uses the post-jump riskless price B_s
    in the numerator.
    """
    l = floor.l
    if v0 < float(l.x[0]):
        raise ValueError("initial wealth below the initial floor")
    grid = market.grid
    s, b = market.s, market.b
    sl, bl = left_values(s)[:, 0], left_values(b)[:, 0]
    mv, ml = _multiplier_values(m, grid)

    xi1 = (mv / s.x)[:, None]
    xi2 = ((1.0 - mv) / b.x)[:, None]
    level_curves = [
        integral_curve(xi1, s.values, p) + integral_curve(xi2, b.values, p) for p in seq
    ]
    x_vals = level_curves[-1]
    x_jumps = {}
    for i in sorted(set(s.jumps) | set(b.jumps)):
        dx = ml[i] * float(s.jump_at(i)[0]) / sl[i] + (1.0 - ml[i]) * float(
            b.jump_at(i)[0]
        ) / bl[i]
        if dx != 0.0:
            x_jumps[i] = dx
    if any(v == -1.0 for v in x_jumps.values()):
        raise ValueError("dX = -1 encountered: the cushion exponential degenerates")
    fv_driver = isinstance(s, FVPath)
    x_path = (FVPath if fv_driver else GridPath)(grid, x_vals, x_jumps)
    dx_above = all(v > -1.0 for v in x_jumps.values())

    se = doleans_exponential(x_path, seq, tol=tol)
    e_vals = se.values
    e_left = left_values(se.path)[:, 0]

    h_vals = b.x / e_vals
    h_left = bl / e_left
    c_curve = stieltjes_fv_curve(h_vals, h_left, l.continuous())
    jsum = np.zeros(len(grid))
    for i, dl in l.jumps.items():
        dx = x_jumps.get(i, 0.0)
        jsum[i:] += b.x[i] * float(dl[0]) / (e_left[i] * (1.0 + dx))

    cushion = v0 - float(l.x[0]) - c_curve - jsum
    v_vals = l.x * b.x + e_vals * cushion
    l_left = left_values(l)[:, 0]
    jsum_left = jsum.copy()
    for i, dl in l.jumps.items():
        dxi = x_jumps.get(i, 0.0)
        jsum_left[i] -= b.x[i] * float(dl[0]) / (e_left[i] * (1.0 + dxi))
    v_left = l_left * bl + e_left * (v0 - float(l.x[0]) - c_curve - jsum_left)

    v_jumps = {}
    for i in sorted(set(x_jumps) | set(l.jumps) | set(b.jumps) | set(s.jumps)):
        dv = v_vals[i] - v_left[i]
        if dv != 0.0:
            v_jumps[i] = dv

    xi_vals = mv * (v_vals - l.x * b.x) / s.x
    eta_vals = (v_vals - xi_vals * s.x) / b.x
    xi_left_vals = ml * (v_left - l_left * bl) / sl
    eta_left_vals = (v_left - xi_left_vals * sl) / bl
    xi_path = GridPath(grid, xi_vals, _jumps_from(xi_vals, xi_left_vals))
    eta_path = GridPath(grid, eta_vals, _jumps_from(eta_vals, eta_left_vals))
    value_path = GridPath(grid, v_vals, v_jumps)
    strategy = Strategy(xi_path, eta_path, value_path)

    floor_curve = l.x * b.x
    margin = float(np.min(v_vals - floor_curve))
    scale = float(np.max(np.abs(v_vals))) or 1.0
    floor_ok = (margin >= -1e-9 * scale) if dx_above else True
    if dx_above and not floor_ok:
        raise AssertionError(
            f"floor breached by {margin} despite dX > -1; this is a bug"
        )
    sf = self_financing_residual(strategy, market, seq, grid.T, tol=tol)
    general_gap = (v_vals - floor_curve) / e_vals
    return DppiReport(
        strategy=strategy,
        x_path=x_path,
        exponential=se,
        floor_curve=floor_curve,
        floor_margin=margin,
        floor_ok=floor_ok,
        self_financing=sf,
        general_floor_gap=general_gap,
    )


def _jumps_from(values: np.ndarray, lefts: np.ndarray) -> dict:
    d = values - lefts
    return {int(i): float(d[i]) for i in np.nonzero(d != 0.0)[0] if i > 0}


@dataclass(frozen=True)
class SelfFinancingReport:
    residual: float
    residual_per_level: tuple
    trend: TrendReport


def self_financing_residual(
    strategy: Strategy,
    market: Market,
    seq: PartitionSequence,
    t: float,
    tol: float = DETERMINISTIC_TOL,
) -> SelfFinancingReport:
    """Residual of V_t = V_0 + int xi_- dS + int eta_- dB, per level."""
    g = market.grid.clamp_index(t)
    v = strategy.value.x
    residuals = []
    for p in seq:
        c1 = integral_curve(strategy.xi.values, market.s.values, p)
        c2 = integral_curve(strategy.eta.values, market.b.values, p)
        residuals.append(abs(float(v[g] - v[0] - c1[g] - c2[g])))
    return SelfFinancingReport(
        residuals[-1], tuple(residuals), TrendReport(tuple(residuals), tol, TREND_WINDOW)
    )


@dataclass(frozen=True)
class DiscountedReport:
    residual_raw: float
    residual_discounted: float
    raw_per_level: tuple
    discounted_per_level: tuple
    raw_trend: TrendReport
    discounted_trend: TrendReport


def discounted_equivalence(
    strategy: Strategy,
    market: Market,
    seq: PartitionSequence,
    t: float,
    tol: float = DETERMINISTIC_TOL,
) -> DiscountedReport:
    """Self-financing residuals in raw and in discounted (V/B, S/B) form.

    The two conditions are equivalent, so the residual trends must vanish
    together; the report carries both.
    """
    raw = self_financing_residual(strategy, market, seq, t, tol=tol)
    g = market.grid.clamp_index(t)
    s_disc = market.discounted()
    v_disc = strategy.value.x / market.b.x
    residuals = []
    for p in seq:
        c = integral_curve(strategy.xi.values, s_disc.values, p)
        residuals.append(abs(float(v_disc[g] - v_disc[0] - c[g])))
    return DiscountedReport(
        residual_raw=raw.residual,
        residual_discounted=residuals[-1],
        raw_per_level=raw.residual_per_level,
        discounted_per_level=tuple(residuals),
        raw_trend=raw.trend,
        discounted_trend=TrendReport(tuple(residuals), tol, TREND_WINDOW),
    )


@dataclass(frozen=True)
class DrawdownStrategyReport:
    strategy: Strategy
    self_financing: SelfFinancingReport
    constraint_margin: float

    @property
    def constraint_ok(self) -> bool:
        return self.constraint_margin > 0.0


def drawdown_strategy(
    s: GridPath,
    v0: float,
    floor: FloorFunction,
    seq: PartitionSequence,
    tol: float = DETERMINISTIC_TOL,
) -> DrawdownStrategyReport:
    """Self-financing strategy whose value obeys the w-drawdown constraint.

    Works on the unit riskless account (B = 1): xi = U'(Sbar) with U from the
    floor transform anchored at U(S_0) = v0, value V = M^U(S), eta = V - xi S.
    """
    if abs(floor.a_star - v0) > 1e-12 * max(1.0, abs(v0)):
        raise ValueError("the floor domain must start at the initial wealth v0")
    sbar, cont = running_maximum(s)
    if not cont:
        raise ValueError("running maximum of S is discontinuous at grid scale")
    sl = left_values(s)[:, 0]
    if np.any(s.x <= 0) or np.any(sl <= 0):
        raise ValueError("S and S_- must be strictly positive")
    grid = s.grid
    transform = floor_to_transform(floor, float(s.x[0]))
    transform.U(np.array([float(sbar.x.max())]))
    ay = azema_yor_path(transform.U, s)
    v_path = ay.path

    xi_vals = transform.U.deriv(sbar.x)
    xi_path = GridPath(grid, xi_vals)  # Sbar continuous: xi carries no jumps
    eta_vals = v_path.x - xi_vals * s.x
    v_left = left_values(v_path)[:, 0]
    eta_left = v_left - xi_vals * sl
    eta_path = GridPath(grid, eta_vals, _jumps_from(eta_vals, eta_left))

    b = FVPath(grid, np.ones(len(grid)))
    market = Market(s, b)
    strategy = Strategy(xi_path, eta_path, v_path)
    sf = self_financing_residual(strategy, market, seq, grid.T, tol=tol)

    vbar, _ = running_maximum(v_path)
    margin = float(np.min(np.minimum(v_path.x, v_left) - floor(vbar.x)))
    return DrawdownStrategyReport(strategy, sf, margin)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def read_market_csv(fp) -> Market:
    """Market from CSV t,S,B with optional jump columns dS,dB."""
    r = csv.reader(row for row in fp if not row.startswith("#"))
    header = next(r)
    has_jumps = len(header) >= 5
    times, sv, bv = [], [], []
    sj, bj = {}, {}
    for i, row in enumerate(r):
        times.append(float(row[0]))
        sv.append(float(row[1]))
        bv.append(float(row[2]))
        if has_jumps:
            ds, db = float(row[3]), float(row[4])
            if ds:
                sj[i] = ds
            if db:
                bj[i] = db
    grid = TimeGrid(np.array(times))
    return Market(GridPath(grid, np.array(sv), sj), FVPath(grid, np.array(bv), bj))


def write_strategy_csv(strategy: Strategy, floor_curve: np.ndarray | None, fp) -> None:
    """Strategy output CSV t,xi,eta,V,floor."""
    grid = strategy.value.grid
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["t", "xi", "eta", "V", "floor"])
    fl = np.zeros(len(grid)) if floor_curve is None else floor_curve
    for t, xi, eta, v, f in zip(grid.times, strategy.xi.x, strategy.eta.x, strategy.value.x, fl):
        w.writerow([repr(float(t)), repr(float(xi)), repr(float(eta)), repr(float(v)), repr(float(f))])
