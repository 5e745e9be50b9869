"""Guided bridge simulation for conditioned Markov processes.

Backends share one pattern: simulate a tractable guided process that is
forced into the conditioning event, accumulate the log likelihood-ratio
weight along the way, and correct estimates by importance weighting or
path-space MCMC.
"""

from .core import (
    Adaptive,
    ClosedForm,
    LeftRiemann,
    MHResult,
    OracleTable,
    accumulate_log_weight,
    importance_estimate,
    mh_independence_chain,
    pcn_step,
    sup_v_diagnostic,
)
from .paths import (
    EstimateReport,
    GridPath,
    PiecewiseConstantPath,
    WeightedPath,
)
from .sde import (
    BackwardTables,
    ConditioningError,
    LinearAuxiliarySpec,
    SdeSpec,
    refined_grid,
    simulate_guided_batch,
    simulate_guided_sde,
    solve_backward_tables,
)

__version__ = "0.1.0"
