"""Closed-form Fano line shapes for three-level systems with one level in a continuum."""
from .errors import (
    ConvergenceFailure,
    DegenerateDenominator,
    EmptyGrid,
    Fano3Error,
    GridOutsideSpan,
    IoFailure,
    MalformedFile,
    MismatchedStructure,
    MissingCoupling,
    NonPositiveLinewidth,
    NotConverged,
    PoleAtEnergy,
    SpanTooNarrow,
    UnknownPreset,
)
from .fit import (
    FitProblem,
    FitResult,
    Spectrum,
    equivalent,
    jacobian,
    rational_start,
    residuals,
    solve,
    synthetic_spectrum,
)
from .io import read_config, read_curve, read_spectrum, write_config, write_curve, write_spectrum
from .lineshape import (
    InvalidGrid,
    LineShapeParams,
    SpectralCurve,
    curve,
    energy_grid,
    fano_profile,
    line_shape,
    line_shape_amplitude,
    line_shape_gamma_form,
    reduced_detuning,
)
from .model import (
    LAYOUTS,
    ContinuumPosition,
    ModelConfig,
    SystemKind,
    amplitude_ratio,
    bound_probabilities,
    detunings,
    dressed_energies,
    gamma_from_v,
    normalization_residual,
    v_from_gamma,
    validate_config,
    z_factor,
)
from .oracle import DiscretizationSpec, compare, refinement_pair, run_oracle
from .presets import PRESETS, Preset, preset, preset_names, run_preset

__version__ = "0.1.0"

__all__ = [
    "amplitude_ratio",
    "bound_probabilities",
    "compare",
    "ContinuumPosition",
    "ConvergenceFailure",
    "curve",
    "DegenerateDenominator",
    "detunings",
    "DiscretizationSpec",
    "dressed_energies",
    "EmptyGrid",
    "energy_grid",
    "equivalent",
    "Fano3Error",
    "fano_profile",
    "FitProblem",
    "FitResult",
    "gamma_from_v",
    "GridOutsideSpan",
    "InvalidGrid",
    "IoFailure",
    "jacobian",
    "LAYOUTS",
    "line_shape",
    "line_shape_amplitude",
    "line_shape_gamma_form",
    "LineShapeParams",
    "MalformedFile",
    "MismatchedStructure",
    "MissingCoupling",
    "ModelConfig",
    "NonPositiveLinewidth",
    "normalization_residual",
    "NotConverged",
    "PoleAtEnergy",
    "Preset",
    "preset",
    "preset_names",
    "PRESETS",
    "rational_start",
    "read_config",
    "read_curve",
    "read_spectrum",
    "reduced_detuning",
    "refinement_pair",
    "residuals",
    "run_oracle",
    "run_preset",
    "solve",
    "SpanTooNarrow",
    "SpectralCurve",
    "Spectrum",
    "synthetic_spectrum",
    "SystemKind",
    "UnknownPreset",
    "v_from_gamma",
    "validate_config",
    "write_config",
    "write_curve",
    "write_spectrum",
    "z_factor",
]
