"""Quantify spin-defect densities in hBN from Raman and photoluminescence
spectra: peak extraction, activation-curve calibration, density inversion,
and polarization-based mode identification.
"""

from .defect_model import (
    Branch,
    CalibrationCurve,
    CalibrationModel,
    CalibrationSeeds,
    DensityEstimate,
    PowerLawFit,
    RatioMode,
    RatioObservation,
    curve_maximum,
    density_from_l_d,
    density_vs_fluence,
    eval_ratio,
    fit_calibration,
    fit_power_law,
    intensity_ratio,
    invert_ratio,
    l_d_from_density,
    l_d_from_fluence,
)
from .errors import (
    AmbiguousAssignment,
    AxisError,
    DegenerateGeometry,
    DomainError,
    EmptyError,
    EmptyWindow,
    IllConditioned,
    InsufficientAngles,
    InsufficientData,
    MissingExcitation,
    NonConvergence,
    NoSolution,
    ParseError,
    SingularJacobian,
    VbquantError,
    WindowTooSmall,
)
from .peakfit import (
    FitOptions,
    FittedPeak,
    PeakFitter,
    PeakFitResult,
    Preset,
    StandardPeaks,
    extract_standard_peaks,
    fit_peaks,
    jacobian_check,
    pl_preset,
    raman_preset,
)
from .peaks import PeakModel, PeakShape
from .polarization import (
    ModeAssessment,
    PolarClassifier,
    PolarConfig,
    PolarFit,
    PolarModel,
    PolarSeries,
    classify_modes,
    fit_polar,
)
from .reference import reference_calibration
from .serial import (
    calibration_from_dict,
    calibration_to_dict,
    density_report,
    fit_report,
    polar_report,
    read_calibration,
    read_fluence_table,
    read_polar_table,
    read_ratio_table,
    write_calibration,
)
from .spectra import (
    AxisKind,
    Baseline,
    BaselineSpec,
    SpectralMap,
    Spectrum,
    convert_axis,
    integrate_window,
    load_map,
    load_spectrum,
    map_window_integrals,
    read_table,
    subtract_baseline,
)
from .synth import (
    AxisGrid,
    NoiseKind,
    NoiseSpec,
    SynthSpec,
    TileDataset,
    generate_calibration_dataset,
    generate_polar_series,
    generate_spectrum,
    write_map_file,
    write_spectrum_file,
    write_tile_dataset,
)

__version__ = "0.1.0"
