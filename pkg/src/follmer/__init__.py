"""Pathwise (probability-free) Ito calculus for cadlag paths on finite grids.

Quadratic variation along refining partition sequences, non-anticipative
integrals and the cadlag Ito formula, explicit solutions of linear,
nonlinear, and drawdown integral equations, and floor-guaranteed portfolio
constructions, all with oracle- and trend-based numerical certification.
"""

from .diagnostics import DETERMINISTIC_TOL, STOCHASTIC_TOL, TrendReport
from .drawdown import (
    FloorFunction,
    MonotoneC2Function,
    azema_yor_path,
    builtin_floor,
    floor_constant_margin,
    floor_from_table,
    floor_proportional,
    floor_to_transform,
    floor_zero,
    max_identity_check,
    solve_drawdown,
    uniqueness_probe,
)
from .equations import (
    StochasticExponential,
    doleans_exponential,
    gronwall_uniqueness_probe,
    reciprocal_exponential,
    solve_linear,
    solve_nonlinear,
    verify_homogeneous,
)
from .finance import (
    FloorSpec,
    Market,
    Strategy,
    discounted_equivalence,
    dppi,
    drawdown_strategy,
    make_strategy,
    self_financing_residual,
)
from .functions import C12Function, builtin_c12
from .integrals import (
    AdmissibleIntegrand,
    IntegralResult,
    admissible_rep_of_integral,
    associativity_check,
    covariation_of_integrals,
    follmer_integral,
    integration_by_parts,
    ito_formula_eval,
    qv_of_integral,
    riemann_sum,
)
from .mc import McExperiment, run_mc
from .partitions import (
    Partition,
    PartitionSequence,
    dyadic_sequence,
    lebesgue_partition,
    lebesgue_sequence,
    mesh,
    oscillation,
)
from .paths import (
    AffineCombinationGenerator,
    CompoundJumpGenerator,
    DyadicBrownianGenerator,
    FormulaGenerator,
    FVPath,
    GeometricGenerator,
    GridPath,
    StepGenerator,
    TimeGrid,
    add_paths,
    as_fv,
    dyadic_grid,
    eval_left_limit,
    generate,
    left_values,
    reciprocal_path,
    running_maximum,
    scale_path,
    total_variation,
    value_at,
)
from .quadvar import (
    CovMatrix,
    DiscreteMeasure,
    QVResult,
    covariation,
    discrete_qv,
    measure_convergence_check,
    measure_vs_qv_check,
    qv_measure,
    qv_sequence,
    weighted_sum_limit,
)

__version__ = "0.1.0"
