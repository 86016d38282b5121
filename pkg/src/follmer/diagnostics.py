"""Convergence-trend bookkeeping shared by the limit-taking modules.

Limits along a refining partition sequence are unattainable on a grid; the
checkable surrogate is a trend: the per-level gaps must be nonincreasing over
the last few levels and the final gap must sit below a tolerance.  Two tiers
are used throughout: a tight one for deterministic paths and a loose one for
single stochastic samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DETERMINISTIC_TOL = 1e-6
STOCHASTIC_TOL = 5e-2
TREND_WINDOW = 3

_REL_SLACK = 1e-9


@dataclass(frozen=True)
class TrendReport:
    gaps: tuple
    tol: float
    window: int = TREND_WINDOW
    noise_floor: float = 1e-12
    nonincreasing: bool = field(init=False, default=False)
    final_gap: float = field(init=False, default=float("nan"))
    converged: bool = field(init=False, default=False)

    def __post_init__(self):
        gaps = tuple(float(g) for g in self.gaps)
        object.__setattr__(self, "gaps", gaps)
        if not gaps:
            return
        # gaps at float-noise level are ties, not trend violations
        floor = self.noise_floor
        tail = [max(g, floor) for g in gaps[-self.window :]]
        scale = max(abs(g) for g in gaps) or 1.0
        slack = _REL_SLACK * scale
        noninc = all(a >= b - slack for a, b in zip(tail, tail[1:]))
        final = gaps[-1]
        # a tail entirely below tolerance counts as settled regardless of order
        settled = all(g <= self.tol for g in gaps[-self.window :])
        object.__setattr__(self, "nonincreasing", noninc)
        object.__setattr__(self, "final_gap", final)
        object.__setattr__(self, "converged", (noninc or settled) and final <= self.tol)

    @property
    def status(self) -> str:
        return "converged" if self.converged else "inconclusive"

    def to_dict(self) -> dict:
        return {
            "gaps": list(self.gaps),
            "tol": self.tol,
            "nonincreasing": self.nonincreasing,
            "final_gap": self.final_gap,
            "status": self.status,
        }


def sup_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if len(a) else 0.0
