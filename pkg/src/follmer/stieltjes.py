"""Discrete Stieltjes sums against grid step functions.

Two evaluation rules are used in the package:

* ``stieltjes_left`` realizes integrals of the form "integrand at s- against
  the increments of a grid curve": mass of the step (t_{g-1}, t_g] times the
  left limit of the integrand at t_g.  No interpolation.  This is the pinned
  rule for integrals against quadratic-variation curves.

* ``stieltjes_fv`` integrates against a declared finite-variation path, with
  declared jumps handled exactly (atom mass times the integrand's left limit)
  and the continuous remainder handled by the trapezoid rule.  For
  finite-variation integrators the pathwise integral is a plain Stieltjes
  integral, so the second-order rule estimates the same limit with O(h^2)
  bias instead of O(h).
"""

from __future__ import annotations

import numpy as np

from .paths import GridPath

__all__ = ["stieltjes_left", "stieltjes_fv", "stieltjes_fv_curve"]


def stieltjes_left(h_left: np.ndarray, curve: np.ndarray, upto: int | None = None) -> float:
    """Sum of h(t_g-) * (F_g - F_{g-1}) for 0 < g <= upto."""
    hi = len(curve) if upto is None else upto + 1
    if hi < 2:
        return 0.0
    return float(np.sum(h_left[1:hi] * np.diff(curve[:hi])))


def _fv_pieces(a: GridPath, component: int = 0):
    vals = a.values[:, component]
    jump_curve = np.zeros_like(vals)
    for i, dx in a.jumps.items():
        jump_curve[i:] += dx[component]
    return vals, vals - jump_curve


def stieltjes_fv(
    h_values: np.ndarray,
    h_left: np.ndarray,
    a: GridPath,
    upto: int | None = None,
    component: int = 0,
) -> float:
    """Integral of h(s-) dA_s over (0, t] for a finite-variation path A."""
    hi = len(a.grid) if upto is None else upto + 1
    _, cont = _fv_pieces(a, component)
    dc = np.diff(cont[:hi])
    total = float(np.sum(0.5 * (h_values[: hi - 1] + h_left[1:hi]) * dc))
    for i, dx in a.jumps.items():
        if 0 < i < hi:
            total += float(h_left[i]) * float(dx[component])
    return total


def stieltjes_fv_curve(
    h_values: np.ndarray,
    h_left: np.ndarray,
    a: GridPath,
    component: int = 0,
) -> np.ndarray:
    """Running Stieltjes integral t -> integral of h(s-) dA_s on the grid."""
    n = len(a.grid)
    _, cont = _fv_pieces(a, component)
    inc = np.zeros(n)
    inc[1:] = 0.5 * (h_values[:-1] + h_left[1:]) * np.diff(cont)
    for i, dx in a.jumps.items():
        inc[i] += h_left[i] * dx[component]
    return np.cumsum(inc)
