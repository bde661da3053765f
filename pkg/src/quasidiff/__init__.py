"""Aperiodic point sets and their diffraction spectra.

Construct cut-and-project model sets, substitution chains, and randomized
variants; estimate Bragg intensities by volume-normalized Fourier averages or
binned autocorrelation; compare against the closed-form peak predictions of
the dual-lattice calculus. Frequencies pair with positions through
exp(2 pi i xi.x) throughout.
"""

__version__ = "0.1.0"

from .errors import NumericalDiagnosticError, ResourceLimitError, ValidationError
from .geometry import Box, FisherFamily, VanHoveCubes, boundary_fraction, cube_sequence, fisher_boxes
from .pointset import (
    Substitution,
    WeightedPointSet,
    density,
    lattice_points,
    min_separation,
    named_substitution,
    substitution_fixed_point,
    word_to_pointset,
)
from .cutproject import (
    BraggCandidate,
    CutProjectScheme,
    Deformation,
    deformed_amplitude,
    deformed_model_set,
    dual_peaks,
    model_set,
    preset_scheme,
    star_map,
    window_ft,
)
from .diffraction import (
    AutocorrelationPatch,
    FourierAverage,
    Peak,
    Spectrum,
    SpectrumEntry,
    autocorrelation,
    find_peaks,
    fourier_average,
    intensity_from_autocorr,
    intensity_sequence,
    scan_spectrum,
    spectrum_from_csv,
    spectrum_to_csv,
)
from .randomize import (
    DisplacementDist,
    RandomModel,
    TrialStats,
    apply_model,
    char_fn,
    displace,
    monte_carlo_intensity,
    percolate,
    predicted_intensity,
)
from .ergodic import (
    AverageReport,
    Observable,
    SubadditiveReport,
    check_linear_repetitivity,
    subadditive_limit,
    ww_average,
    ww_report,
    ww_sup_over_frequencies,
    ww_sup_over_offsets,
)

__all__ = [
    "AutocorrelationPatch",
    "AverageReport",
    "Box",
    "BraggCandidate",
    "CutProjectScheme",
    "Deformation",
    "DisplacementDist",
    "FisherFamily",
    "FourierAverage",
    "NumericalDiagnosticError",
    "Observable",
    "Peak",
    "RandomModel",
    "ResourceLimitError",
    "Spectrum",
    "SpectrumEntry",
    "SubadditiveReport",
    "Substitution",
    "TrialStats",
    "ValidationError",
    "VanHoveCubes",
    "WeightedPointSet",
    "apply_model",
    "autocorrelation",
    "boundary_fraction",
    "char_fn",
    "check_linear_repetitivity",
    "cube_sequence",
    "deformed_amplitude",
    "deformed_model_set",
    "density",
    "displace",
    "dual_peaks",
    "find_peaks",
    "fisher_boxes",
    "fourier_average",
    "intensity_from_autocorr",
    "intensity_sequence",
    "lattice_points",
    "min_separation",
    "model_set",
    "monte_carlo_intensity",
    "named_substitution",
    "percolate",
    "predicted_intensity",
    "preset_scheme",
    "scan_spectrum",
    "spectrum_from_csv",
    "spectrum_to_csv",
    "star_map",
    "subadditive_limit",
    "substitution_fixed_point",
    "window_ft",
    "word_to_pointset",
    "ww_average",
    "ww_report",
    "ww_sup_over_frequencies",
    "ww_sup_over_offsets",
]
