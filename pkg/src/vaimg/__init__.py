"""vaimg: vibro-acoustography image formation and restoration toolkit.

Simulates the complex 3D point spread function of a two-element confocal
transducer, forms noisy VA images by convolution, restores them with
Wiener / constrained least-squares / geometric-mean frequency-domain
filters, scores restorations with ISNR / MSE / UIQI, and recovers
per-pixel phase from difference-frequency time sequences.
"""

from .errors import ConfigError, GridMismatchError, RefusalError, ToolkitError
from .field import (
    Medium,
    TransducerSpec,
    compute_pressure_field,
    discretize_aperture,
    spherical_cap_area,
)
from .forward import NoiseSpec, add_noise, convolve
from .metrics import QualityReport, evaluate, isnr, mse, quantize, uiqi, uiqi_stats
from .phantoms import (
    DESK_GRID,
    PAPER_GRID,
    WIRE_SCAN_GRID,
    PhantomSpec,
    SphereInclusion,
    WireSpec,
    builtin_phantom,
    render_phantom,
)
from .phase import (
    PhaseMap,
    PixelSequence,
    SequenceSet,
    build_phase_map,
    estimate_lsf,
    hilbert,
    reconstruct_image,
    relative_phase,
    synthesize_sequences,
    wrap_phase,
)
from .psf import Psf, compose_lsf, magnitude_width_db, make_psf, make_theoretical_lsf
from .restore import (
    FilterParams,
    RestorationResult,
    apply_filter,
    cls,
    gm,
    laplacian_nsr,
    laplacian_spectrum,
    nsr_for,
    sweep_filter_params,
    target_transfer_nsr,
    wiener,
)
from .volume import ComplexVolume, Grid3D, RealVolume

__version__ = "0.1.0"

__all__ = [
    "ComplexVolume",
    "ConfigError",
    "DESK_GRID",
    "FilterParams",
    "Grid3D",
    "GridMismatchError",
    "Medium",
    "NoiseSpec",
    "PAPER_GRID",
    "PhantomSpec",
    "PhaseMap",
    "PixelSequence",
    "Psf",
    "QualityReport",
    "RealVolume",
    "RefusalError",
    "RestorationResult",
    "SequenceSet",
    "SphereInclusion",
    "ToolkitError",
    "TransducerSpec",
    "WIRE_SCAN_GRID",
    "WireSpec",
    "add_noise",
    "apply_filter",
    "build_phase_map",
    "builtin_phantom",
    "cls",
    "compose_lsf",
    "compute_pressure_field",
    "convolve",
    "discretize_aperture",
    "estimate_lsf",
    "evaluate",
    "gm",
    "hilbert",
    "isnr",
    "laplacian_nsr",
    "laplacian_spectrum",
    "magnitude_width_db",
    "make_psf",
    "make_theoretical_lsf",
    "mse",
    "quantize",
    "reconstruct_image",
    "relative_phase",
    "render_phantom",
    "spherical_cap_area",
    "nsr_for",
    "sweep_filter_params",
    "target_transfer_nsr",
    "synthesize_sequences",
    "uiqi",
    "uiqi_stats",
    "wiener",
    "wrap_phase",
]
