"""Perfect simulation by dominated coupling from the past.

Two applications share one engine: multiscale area-interaction point
processes (with K, L and T summaries and simulation envelopes) and Bayesian
wavelet curve estimation with an area-interaction prior on the coefficient
lattice.
"""
from .cftp import (
    ConsistencyError,
    FactorModel,
    InvalidModelError,
    NonCoalescenceError,
    extend_backward,
    init_pair,
    evolve_pair,
    run_cftp,
    simulate_dominating,
)
from .denoise import HyperParams, denoise, dominating_rates, lattice_factor_model, neighbourhood
from .spatial import (
    CoverageField,
    Grain,
    MultiscaleParams,
    SpatialPattern,
    area_interaction_model,
    coverage_measure,
    incremental_coverage,
    multiscale_model,
)
from .study import StudyConfig, run_simulation_study
from .summary import envelope, estimate_K, estimate_L, estimate_T, transform_T
from .wavelets import CoefficientTree, dwt, idwt

__version__ = "0.1.0"

# lengths on the unit square are 1/REDWOOD_LENGTH_SCALE of the units in which the
# published redwood parameters give about 62 points (calibrated, see README)
REDWOOD = dict(lam=0.118, log10_gamma1=3.301029995663981, log10_gamma2=-200.0, r1=0.07, r2=0.013)
REDWOOD_LENGTH_SCALE = 4.18
