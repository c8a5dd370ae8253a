"""Optimal age/value-of-information threshold policies for M/G/1/1 blocking update systems."""

from .analytic import (
    EpochExpectations,
    dinkelbach_objective,
    epoch_expectations,
    expected_age,
    expected_epoch,
    expected_value,
    max_mgf,
    metrics,
    wait_moments,
)
from .model import (
    ClassSpec,
    Deterministic,
    Exponential,
    MomentSet,
    SpecError,
    SystemSpec,
    arrival_mgf,
    hyperexponential,
    make_spec,
    mixture_mgf,
    mixture_moments,
    service_mgf,
)
from .policy import (
    DomainError,
    ThresholdPolicy,
    controlled_wait,
    fixed_policy,
    h,
    h_inverse,
    min_interupdate_time,
    tau_threshold,
    threshold_policy,
    value_decay_factor,
    zero_wait_policy,
)
from .simulator import SimResult, replicate, simulate, simulate_explicit, validate
from .solver import (
    FrontierPoint,
    NoBracket,
    NotConverged,
    PolicySolution,
    SolverError,
    default_beta_grid,
    dominates,
    frontier,
    solve,
)

__version__ = "0.1.0"
