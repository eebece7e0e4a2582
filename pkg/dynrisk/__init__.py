"""dynrisk.

Dynamic robust risk measures on finite scenario trees: worst-case conditional
risk over dynamic uncertainty sets, with randomized checkers for their
properties and time-consistency notions.
"""

from .adversarial import adversarial_equivalent_set
from .consistency import check_time_consistency, collapse
from .distances import conditional_kl, conditional_wasserstein
from .experiment import ExperimentDoc, build_experiment, parse_experiment, serialize_experiment
from .lattice import audit_implications, gather_verdicts
from .oracle import (
    GridSpec,
    enumerate_conditional_expectation,
    grid_worst_case,
    kl_simplex_sup,
    sandwich,
)
from .properties import check_measure_property, check_set_property
from .recursive import (
    construct_recursive,
    nested_robust_evaluate,
    round_trip_gap,
    static_representation,
)
from .riskmeasures import acceptance_indicator, evaluate_one_step, nested_evaluate
from .risk_types import (
    CVaR,
    CheckSpec,
    ConstantRule,
    Entropic,
    Expectation,
    FamilyMeasure,
    HorizonRule,
    IdentitySet,
    KLBall,
    MeasureFamily,
    ProportionalRule,
    RiskFamily,
    Settings,
    SumHalfspace,
    SupNormBall,
    VarScaledRule,
    Verdict,
    WassersteinBall,
    Witness,
    WorstCase,
    ZeroRule,
    current_settings,
    use_settings,
)
from .robust import (
    RiskEvaluator,
    RobustRiskMeasure,
    consolidated_contains,
    consolidated_contains_repr,
    consolidated_set,
    normalize,
    robust_accepts,
    robust_value,
    tilde_value,
)
from .space import (
    AdaptedProcess,
    AdaptedVector,
    EventSet,
    children,
    conditional_law,
    mix,
    sup_norm,
)
from .tree import Atom, ScenarioTree
from .uncertainty import (
    CustomSetKind,
    DynamicUncertaintySet,
    contains,
    membership_gap,
    tolerance_eval,
    worst_case,
)

__all__ = [
    # Trees and processes
    "Atom",
    "ScenarioTree",
    "AdaptedVector",
    "AdaptedProcess",
    "EventSet",
    "mix",
    "sup_norm",
    "children",
    "conditional_law",
    # Risk kinds and one-step evaluation
    "Expectation",
    "CVaR",
    "Entropic",
    "WorstCase",
    "RiskFamily",
    "evaluate_one_step",
    "nested_evaluate",
    "acceptance_indicator",
    # Uncertainty sets
    "ConstantRule",
    "HorizonRule",
    "VarScaledRule",
    "ProportionalRule",
    "ZeroRule",
    "IdentitySet",
    "SupNormBall",
    "WassersteinBall",
    "KLBall",
    "FamilyMeasure",
    "MeasureFamily",
    "SumHalfspace",
    "CustomSetKind",
    "DynamicUncertaintySet",
    "contains",
    "membership_gap",
    "tolerance_eval",
    "worst_case",
    "conditional_wasserstein",
    "conditional_kl",
    # Robust measures
    "RiskEvaluator",
    "RobustRiskMeasure",
    "robust_value",
    "robust_accepts",
    "tilde_value",
    "normalize",
    "consolidated_contains",
    "consolidated_contains_repr",
    "consolidated_set",
    "construct_recursive",
    "nested_robust_evaluate",
    "static_representation",
    "round_trip_gap",
    # Checks
    "CheckSpec",
    "Verdict",
    "Witness",
    "check_set_property",
    "check_measure_property",
    "check_time_consistency",
    "collapse",
    "audit_implications",
    "gather_verdicts",
    "adversarial_equivalent_set",
    # Oracles
    "GridSpec",
    "grid_worst_case",
    "kl_simplex_sup",
    "enumerate_conditional_expectation",
    "sandwich",
    # Configuration and documents
    "Settings",
    "current_settings",
    "use_settings",
    "ExperimentDoc",
    "parse_experiment",
    "serialize_experiment",
    "build_experiment",
]
