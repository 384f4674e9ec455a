"""Split-step quantum walks as lattice Dirac dynamics.

Simulation of the photonic q-plate walk and of abstract Dirac walks,
spectral analysis of the oscillating mean position (Zitterbewegung),
an experimental noise model with calibration, and the surface fit used
to extract oscillation frequency and amplitude.
"""

__version__ = "0.1.0"

from .analytics import (
    SpectralData,
    ZbDecomposition,
    ZbPrediction,
    coin_sector_amplitudes,
    effective_hamiltonian,
    energy_projectors,
    position_trajectory,
    sector_weights,
    spectral_data,
    zb_coupling,
    zb_decompose,
    zb_operator_F,
    zb_predict,
)
from .fitting import OscillationFit, fit_static, fit_surface, initial_guess, oscillating_gaussian
from .lattice import (
    BoundaryContaminationWarning,
    LatticeGeometry,
    SiteDistribution,
    SpinorField,
    make_geometry,
    make_input_state,
    site_distribution,
    to_momentum,
    to_position,
    truncated_gaussian_profile,
)
from .noise import (
    CalibrationResult,
    NoiseModel,
    StepDataset,
    calibrate,
    fidelity,
    noisy_evolution,
    sample_dataset,
)
from .walk import (
    DIRAC_STEP,
    EXPERIMENT_STEP,
    WalkStepParams,
    apply_step_momentum,
    apply_step_position,
    dispersion,
    step_symbol,
)
