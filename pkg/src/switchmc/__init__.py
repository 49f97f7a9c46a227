"""Absorption analysis and policy synthesis for switched finite Markov chains."""

from .analysis import (
    ConditionVerdict,
    GoalError,
    UnequalAbsorbingSetsError,
    absorption_probability_lower_bound,
    check_condition1,
    check_condition2,
    check_condition3,
    check_equal_absorbing_sets,
    check_stabilizable,
)
from .model import (
    ConcreteChain,
    Mode,
    ModelError,
    ModeSpec,
    StateSpace,
    SwitchedChain,
    absorbing_sets,
    concretize,
    is_absorbing_mode,
    load_fixture,
    load_model,
    parse_model,
    parse_model_json,
)
from .policy import (
    InducedChain,
    SwitchingPolicy,
    UnstabilizableError,
    absorption_probabilities,
    closer_set,
    expected_absorption_time,
    induced_chain,
    synthesize_policy,
    validate_policy,
)
from .report import AnalysisReport, Verdict, analyze
from .simulate import (
    ExplicitSequence,
    FixedMode,
    PeriodicSchedule,
    SimConfig,
    SimStats,
    StatePolicy,
    UniformRandom,
    estimate_absorption,
    find_trap_policy,
    propagate_distribution,
    run_trajectory,
)

__version__ = "0.1.0"
