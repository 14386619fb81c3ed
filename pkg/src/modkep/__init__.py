"""Semiclassical level statistics of the modified Kepler problem.

Generates the model spectrum eps = 2p*sqrt(2*beta) + l^2, measures long-range
spectral statistics (rigidity, number variance, density correlations, spacing
distributions) over a beta ensemble, and evaluates the periodic-orbit-theory
predictions they are checked against.
"""

from .errors import ApproximationWarning, ConvergenceError, ValidationError
from .kepler import (
    ActionPair,
    OrbitGeometry,
    PotentialParams,
    actions_and_energy,
    circular_orbit,
    energy_from_actions,
    frequencies,
    orbit_geometry,
    periodic_condition,
    trajectory_radius,
)
from .spectrum import (
    ExactSpectrumParams,
    Level,
    Spectrum,
    SpectrumParams,
    UnfoldedSpectrum,
    generate_exact_spectrum,
    generate_model_spectrum,
    staircase,
    unfold,
)
from .stats import (
    EnsembleConfig,
    IntervalSpec,
    SpacingHistogram,
    StatCurve,
    count_levels,
    delta3,
    delta3_from_sigma,
    ensemble_delta3_scan,
    ensemble_rigidity_scan,
    ensemble_sigma_scan,
    ensemble_spacing_scan,
    ks_exponential,
    make_ensemble,
    nn_spacing_histogram,
    number_variance,
)
from .theory import (
    OrbitClass,
    SumOptions,
    TheoryPoint,
    amplitude_sq,
    amplitude_sq_general,
    delta3_saturation,
    enumerate_orbits,
    jump_energies,
    k_inf,
    sigma_derivative_regime,
    sigma_inf,
    theory_point,
)

__version__ = "0.1.0"

__all__ = [
    "ApproximationWarning",
    "ConvergenceError",
    "ValidationError",
    "ActionPair",
    "OrbitGeometry",
    "PotentialParams",
    "actions_and_energy",
    "circular_orbit",
    "energy_from_actions",
    "frequencies",
    "orbit_geometry",
    "periodic_condition",
    "trajectory_radius",
    "ExactSpectrumParams",
    "Level",
    "Spectrum",
    "SpectrumParams",
    "UnfoldedSpectrum",
    "generate_exact_spectrum",
    "generate_model_spectrum",
    "staircase",
    "unfold",
    "EnsembleConfig",
    "IntervalSpec",
    "SpacingHistogram",
    "StatCurve",
    "count_levels",
    "delta3",
    "delta3_from_sigma",
    "ensemble_delta3_scan",
    "ensemble_rigidity_scan",
    "ensemble_sigma_scan",
    "ensemble_spacing_scan",
    "ks_exponential",
    "make_ensemble",
    "nn_spacing_histogram",
    "number_variance",
    "OrbitClass",
    "SumOptions",
    "TheoryPoint",
    "amplitude_sq",
    "amplitude_sq_general",
    "delta3_saturation",
    "enumerate_orbits",
    "jump_energies",
    "k_inf",
    "sigma_derivative_regime",
    "sigma_inf",
    "theory_point",
    "__version__",
]
