"""hybridcorr: instantaneous correlation estimation for hybrid systems.

Estimates the Brownian-motion correlation matrix of a multi-asset system
(two-factor Gaussian short rates, Heston/Bates equity or FX, degenerate
variants) from time series of observables, completes missing
variance-related correlations, repairs the assembled matrix to positive
semidefinite while preserving the calibrated diagonal blocks, and ships a
Monte Carlo harness measuring estimator bias and standard error.
"""

from .backend import backend_name
from .blockmatrix import BlockCorrelationMatrix, assemble_block_matrix
from .complete import (
    InnerCholesky,
    complete_g2_heston,
    complete_heston_heston,
    complete_panel,
)
from .estimate import (
    CoefficientSystem,
    EstimateAllResult,
    MissingObservableError,
    PairEstimate,
    ZeroVarianceError,
    empirical_correlation,
    estimate_all,
    estimate_pair,
    g2_side_system,
    g2g2_system,
    loading_c,
    normalizer_d,
    pair_kind_for,
    proxy_variance,
)
from .linsolve import SingularSystemError, solve_dense
from .models import (
    BatesJumpParams,
    ComponentSpec,
    G1Params,
    G2Params,
    HestonParams,
    HybridSystemSpec,
    validate_system,
)
from .panel import ObservationPanel
from .repair import ShrinkResult, clamp_cross_entries, is_psd, repair, shrink
from .simulate import (
    PathSet,
    SimulationConfig,
    correlated_increments,
    make_rng,
    simulate_g2,
    simulate_heston,
    simulate_system,
    spot_rate_path,
)
from .study import (
    DT_DAILY,
    DT_INTRADAY,
    StudyConfig,
    StudyReport,
    emit_table,
    run_study,
    table_presets,
)

__version__ = "0.1.0"
