"""Policy learning with abstention.

Learns individualized binary treatment rules that may abstain, from logged
(x, d, y) data: a two-stage abstention learner (IPW and doubly-robust
variants), safe policy improvement with confidence-bound gating, a
margin-condition wrapper, a worst-case distribution-shift equivalence check,
and the synthetic experiment harness that reproduces the desk-scale results.
"""

from .errors import CapacityError, FittingError, InputError
from .model import (
    ABSTAIN,
    AbstainingPolicy,
    AxisThresholdPolicy,
    BinaryPolicy,
    ConstantPolicy,
    Dataset,
    ImputedPolicy,
    LinearThresholdPolicy,
    NuisanceModel,
    PolicyClass,
    Sample,
    SplicedPolicy,
    TablePolicy,
    axis_threshold_class,
    disagreement_mass,
    evaluate_policy,
    policy_from_json,
)
from .values import (
    ValueEstimate,
    dr_pseudo_outcome,
    dr_value,
    dr_value_abstain,
    ipw_value,
    ipw_value_abstain,
    lcb_difference,
    normal_quantile,
    normalized_score,
    score_distance,
)
from .learner import (
    AbstentionFit,
    LearnerConfig,
    complexity_radius,
    ewm,
    learn_abstaining,
    near_optimal_set,
    split_halves,
)
from .safety import (
    DEFAULT_BONUS_GRID,
    SpiConfig,
    SpiOutcome,
    hcpi,
    impute_baseline,
    safe_ewm,
    safe_policy_improvement,
    split_train_test,
)
from .margin import CatePolicy, MarginConfig, margin_learn
from .robust import (
    GridRandomizingPolicy,
    RandomizingPolicy,
    ShiftCheck,
    check_shift_equivalence,
    worst_case_value,
)
from .dgp import (
    KAPPA,
    DgpOracle,
    DgpSpec,
    default_policy_class,
    fit_nuisance,
    generate,
    oracle_nuisance,
    product_error,
    spi_baseline,
    true_value,
)
from .harness import (
    ExperimentConfig,
    ReplicationResult,
    aggregate_results,
    fit_loglog_slope,
    run_experiment,
)

__version__ = "0.1.0"
