"""Per-pixel amplitude/phase recovery from difference-frequency sequences,
and LSF estimation from an image by spectral inversion.

Every pixel of an acquired image is backed by a short real tone
``x[n] = A cos(dw n / fs + phi)``.  The discrete Hilbert transform turns
it into its quadrature; the analytic signal then exposes A and phi.  The
phase of pixel j relative to pixel i comes from the per-sample principal
argument of the conjugate product of the two analytic signals: the
amplitude information in the product's log modulus is discarded (A is
known from the RMS), and the argument average is branch-stabilized around
the bulk phase so noisy samples near the +-pi cut do not wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.signal

from .errors import RefusalError
from .volume import ComplexVolume, Grid3D, RealVolume

DEFAULT_SAMPLE_RATE = 1.0e6  # Hz
DEFAULT_DIFF_FREQ = 50.0e3  # Hz
DEFAULT_N_SAMPLES = 512


def wrap_phase(x):
    """Wrap an angle (or array) to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    y = np.where(y == -math.pi, math.pi, y)
    return float(y) if np.isscalar(x) or np.ndim(x) == 0 else y


@dataclass
class PixelSequence:
    """Real tone samples for one pixel at the difference frequency."""

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    diff_freq: float = DEFAULT_DIFF_FREQ

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise RefusalError("PixelSequence samples must be one-dimensional")
        if self.sample_rate <= 2.0 * self.diff_freq:
            raise RefusalError("sample_rate must exceed twice the difference frequency")
        n_periods = len(self.samples) * self.diff_freq / self.sample_rate
        if n_periods < 2.0:
            raise RefusalError(
                f"sequence spans only {n_periods:.2f} periods of the difference "
                "frequency; need at least 2"
            )

    @property
    def amplitude(self) -> float:
        """Tone amplitude from the RMS of the acquired signal."""
        return float(np.sqrt(np.mean(self.samples**2)) * math.sqrt(2.0))


def hilbert(x: np.ndarray) -> np.ndarray:
    """Discrete Hilbert transform (quadrature sequence) of a real signal.

    Spectral method: cos(wn + phi) maps to sin(wn + phi) exactly for tones
    with an integer number of cycles in the window; DC has no quadrature.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < 4:
        raise RefusalError("hilbert requires a 1D sequence of length >= 4")
    return scipy.signal.hilbert(x).imag


def _analytic(samples: np.ndarray) -> np.ndarray:
    return scipy.signal.hilbert(samples, axis=-1)


def _mean_argument(v: np.ndarray) -> np.ndarray:
    """Branch-stabilized mean of per-sample principal arguments (last axis)."""
    bulk = np.angle(v.sum(axis=-1))
    resid = np.angle(v * np.exp(-1j * bulk)[..., None])
    return bulk + resid.mean(axis=-1)


def relative_phase(xi: PixelSequence, xj: PixelSequence) -> float:
    """Phase of pixel j relative to pixel i, wrapped to (-pi, pi]."""
    if len(xi.samples) != len(xj.samples):
        raise RefusalError("sequences must have equal length")
    if xi.sample_rate != xj.sample_rate or xi.diff_freq != xj.diff_freq:
        raise RefusalError("sequences must share sample rate and difference frequency")
    if xi.amplitude == 0.0 or xj.amplitude == 0.0:
        raise RefusalError("relative phase is undefined for a zero-amplitude sequence")
    v = np.conj(_analytic(xi.samples)) * _analytic(xj.samples)
    return float(wrap_phase(_mean_argument(v)))


@dataclass
class SequenceSet:
    """A grid of pixel sequences: samples[ix, iy, iz, n]."""

    grid: Grid3D
    samples: np.ndarray = dc_field(repr=False)
    sample_rate: float = DEFAULT_SAMPLE_RATE
    diff_freq: float = DEFAULT_DIFF_FREQ

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.shape[:3] != self.grid.dims:
            raise RefusalError(
                f"sequence array shape {self.samples.shape} does not match grid "
                f"dims {self.grid.dims}"
            )
        if self.sample_rate <= 2.0 * self.diff_freq:
            raise RefusalError("sample_rate must exceed twice the difference frequency")

    def pixel(self, idx) -> PixelSequence:
        return PixelSequence(self.samples[idx], self.sample_rate, self.diff_freq)


@dataclass
class PhaseMap:
    """Phases relative to a reference pixel, RMS-derived amplitudes, and a
    mask marking zero-amplitude pixels whose phase was pinned to 0."""

    reference_pixel: tuple[int, int, int]
    phases: RealVolume
    amplitudes: RealVolume
    mask: RealVolume


def synthesize_sequences(
    image: ComplexVolume,
    n_samples: int = DEFAULT_N_SAMPLES,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    diff_freq: float = DEFAULT_DIFF_FREQ,
) -> SequenceSet:
    """Per-pixel tones x[n] = |v| cos(dw n/fs + arg v) from a complex image.

    This stands in for the hydrophone acquisition so the experimental-image
    processing chain can be exercised without lab data.
    """
    n = np.arange(n_samples)
    phase = 2.0 * math.pi * diff_freq * n / sample_rate
    amp = np.abs(image.values)[..., None]
    ph = np.angle(image.values)[..., None]
    samples = amp * np.cos(phase[None, None, None, :] + ph)
    return SequenceSet(image.grid, samples, sample_rate, diff_freq)


def build_phase_map(sequences: SequenceSet, reference: tuple[int, int, int]) -> PhaseMap:
    """Phases of every pixel relative to the reference pixel.

    Zero-amplitude pixels get phase 0 and are flagged in the mask.
    """
    ref = sequences.samples[tuple(reference)]
    rms = np.sqrt(np.mean(sequences.samples**2, axis=-1))
    amplitudes = rms * math.sqrt(2.0)
    if np.sqrt(np.mean(ref**2)) == 0.0:
        raise RefusalError("reference pixel has zero amplitude")

    z = _analytic(sequences.samples)
    v = np.conj(_analytic(ref)) * z
    live = rms > 0.0
    phases = np.zeros(sequences.grid.dims)
    phases[live] = wrap_phase(_mean_argument(v[live]))
    mask = (~live).astype(np.float64)
    return PhaseMap(
        reference_pixel=tuple(int(i) for i in reference),
        phases=RealVolume(sequences.grid, phases),
        amplitudes=RealVolume(sequences.grid, amplitudes),
        mask=RealVolume(sequences.grid, mask),
    )


def reconstruct_image(pm: PhaseMap) -> ComplexVolume:
    """Complex image A * exp(i phi) from a recovered phase map."""
    values = pm.amplitudes.values * np.exp(1j * pm.phases.values)
    return ComplexVolume(pm.phases.grid, values)


def estimate_lsf(
    image: ComplexVolume,
    wire_region: tuple[slice, slice, slice],
    lowpass_cutoff: float,
) -> ComplexVolume:
    """Estimate the LSF from a wire image by spectral inversion.

    A radially symmetric Gaussian low-pass (cutoff in cycles/m, the
    transfer falling to exp(-1/2) there) is subtracted from the image; the
    high-pass result restricted to the wire region, re-centered on its
    magnitude peak and normalized to unit peak magnitude is the estimate.
    The region must contain exactly one wire response.

    Normalization divides by the complex peak value, so the peak comes out
    exactly 1 + 0i: acquired phases are only defined relative to a
    reference pixel, and pinning the peak phase to zero makes estimates
    from different acquisitions (or from a theoretical model) directly
    comparable.
    """
    if lowpass_cutoff <= 0:
        raise RefusalError("lowpass_cutoff must be positive")
    region = tuple(wire_region)
    sub_shape = tuple(
        len(range(*region[i].indices(image.grid.dims[i]))) for i in range(3)
    )
    if any(n == 0 for n in sub_shape):
        raise RefusalError("wire_region is empty")
    if not np.any(image.values):
        raise RefusalError("image is identically zero")

    import scipy.fft as sfft

    kc = 2.0 * math.pi * lowpass_cutoff
    k2 = 0.0
    for axis in range(3):
        kax = 2.0 * math.pi * sfft.fftfreq(image.grid.dims[axis], image.grid.spacing[axis])
        shape = [1, 1, 1]
        shape[axis] = -1
        k2 = k2 + kax.reshape(shape) ** 2
    transfer = np.exp(-k2 / (2.0 * kc * kc))
    low = sfft.ifftn(transfer * sfft.fftn(image.values, workers=-1), workers=-1)
    high = image.values - low

    sub = high[region]
    mags = np.abs(sub)
    if mags.max() == 0.0:
        raise RefusalError("wire_region contains no response")
    peak = np.unravel_index(int(np.argmax(mags)), sub.shape)
    peak_val = sub[peak]

    # re-center the response: shift the peak to the middle of the region
    out = np.zeros(sub.shape, dtype=np.complex128)
    center = tuple(n // 2 for n in sub.shape)
    src, dst = [], []
    for p, c, n in zip(peak, center, sub.shape):
        shift = c - p
        src.append(slice(max(0, -shift), min(n, n - shift)))
        dst.append(slice(max(0, shift), min(n, n + shift)))
    out[tuple(dst)] = sub[tuple(src)]
    out /= peak_val

    starts = [region[i].indices(image.grid.dims[i])[0] for i in range(3)]
    peak_pos = [
        image.grid.origin[i] + (starts[i] + peak[i]) * image.grid.spacing[i]
        for i in range(3)
    ]
    origin = tuple(
        peak_pos[i] - center[i] * image.grid.spacing[i] for i in range(3)
    )
    grid = Grid3D(sub_shape, image.grid.spacing, origin)
    return ComplexVolume(grid, out)
