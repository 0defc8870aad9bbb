"""qjlab: quantum-jump trajectories, intrinsic dimension, spectral statistics.

Unravels Lindblad master equations into pure-state jump trajectories, measures
the intrinsic dimension of the resulting state clouds with the two-nearest-
neighbor estimator, and cross-validates against direct density-matrix
propagation, complex spectral statistics, and the mean-field limit.
"""

from .classical import ClassicalParams, drift, integrate_orbit, kick_map, orbit_export
from .config import ConfigError, ExperimentConfig, config_hash, load_config, parse_config
from .hilbert import (
    SpinRep,
    chain_operator,
    random_state,
    real_embedding,
    spin_operators,
    state_distance,
)
from .models import (
    LindbladModel,
    UnravelingGauge,
    adjoint_dissipator,
    chain_model,
    effective_hamiltonian,
    floquet_map,
    gauge_transform,
    propagate_density,
    quantum_top_model,
    vectorize,
)
from .spectral import (
    ComplexSpectrum,
    RatioSample,
    complex_ratios,
    eigen_spectrum,
    ginibre_pdf,
    invariant_blocks,
    mean_cos_theta,
    nn_spacings,
    poisson2d_pdf,
    sample_ginibre_reference,
    spectrum_ratios,
)
from .trajectory import (
    JumpEvent,
    StepTooCoarse,
    TrajectoryConfig,
    TrajectoryRecord,
    freezing_monitor,
    jump_probabilities,
    read_qtrj,
    simulate_ensemble,
    simulate_trajectory,
    step,
    trajectory_rng,
    write_qtrj,
)
from .twonn import (
    IdEstimate,
    IdSeries,
    fixed_time_dataset,
    id_time_series,
    late_time_average,
    mu_ratios,
    scale_profile,
    single_trajectory_dataset,
    two_nn,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
