"""Simulated image formation: g = f * h + n.

The convolution is linear (zero-padded to the next fast FFT length) and
the output is cropped back to the phantom grid using the PSF magnitude
peak as the alignment reference, so a delta phantom reproduces the PSF in
place and a delta PSF reproduces the phantom exactly.  Noise is circular
complex Gaussian, white, calibrated to a target SNR against mean |g|^2,
and fully determined by an integer seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import RefusalError
from .volume import ComplexVolume, RealVolume, require_same_spacing


@dataclass(frozen=True)
class NoiseSpec:
    """Target SNR in dB (math.inf disables noise) and the RNG seed."""

    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db):
            raise RefusalError("snr_db must not be NaN")


def padded_shape(shape_f, shape_h) -> tuple[int, ...]:
    """Transform size for a linear convolution of the two shapes."""
    return tuple(sfft.next_fast_len(a + b - 1) for a, b in zip(shape_f, shape_h))


def embed_kernel(h: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Zero-pad h to shape with its magnitude peak wrapped to index 0."""
    buf = np.zeros(shape, dtype=np.complex128)
    buf[tuple(slice(0, n) for n in h.shape)] = h
    peak = np.unravel_index(int(np.argmax(np.abs(h))), h.shape)
    return np.roll(buf, tuple(-p for p in peak), axis=(0, 1, 2))


def embed_image(f: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    buf = np.zeros(shape, dtype=np.complex128)
    buf[tuple(slice(0, n) for n in f.shape)] = f
    return buf


def transform_shape(shape_f, shape_h, mode: str) -> tuple[int, ...]:
    """FFT grid for a forward or inverse filtering pass.

    'linear' pads to the full linear-convolution size and the result is
    cropped back; 'circular' transforms on the image's own grid (the PSF
    wraps), which keeps forward model and deconvolution exactly consistent
    when the PSF support is not small against the grid.
    """
    if mode == "linear":
        return padded_shape(shape_f, shape_h)
    if mode == "circular":
        if any(nh > nf for nf, nh in zip(shape_f, shape_h)):
            raise RefusalError(
                f"circular mode needs the PSF grid {shape_h} to fit within the "
                f"image grid {shape_f}"
            )
        return tuple(shape_f)
    raise RefusalError(f"unknown convolution mode {mode!r}")


def convolve(f: RealVolume, h: ComplexVolume, mode: str = "linear") -> ComplexVolume:
    """FFT convolution of a phantom with a complex PSF.

    The PSF magnitude peak is the alignment reference: a delta PSF
    reproduces the phantom in place, a delta phantom reproduces the PSF
    around the delta.  See :func:`transform_shape` for the two modes.
    """
    require_same_spacing(f, h, "phantom and PSF")
    shape = transform_shape(f.grid.dims, h.grid.dims, mode)
    F = sfft.fftn(embed_image(f.values, shape), workers=-1)
    H = sfft.fftn(embed_kernel(h.values, shape), workers=-1)
    g = sfft.ifftn(F * H, workers=-1)
    crop = tuple(slice(0, n) for n in f.grid.dims)
    return ComplexVolume(f.grid, np.ascontiguousarray(g[crop]))


def add_noise(g: ComplexVolume, noise: NoiseSpec) -> ComplexVolume:
    """Add circular complex white Gaussian noise at the spec's SNR."""
    signal_power = float(np.mean(np.abs(g.values) ** 2))
    if signal_power == 0.0:
        raise RefusalError("cannot calibrate noise against an all-zero image")
    if math.isinf(noise.snr_db):
        return g.copy()
    noise_power = signal_power / 10.0 ** (noise.snr_db / 10.0)
    sigma = math.sqrt(noise_power / 2.0)  # per quadrature component
    rng = np.random.default_rng(noise.seed)
    re = rng.standard_normal(g.grid.dims)
    im = rng.standard_normal(g.grid.dims)
    return ComplexVolume(g.grid, g.values + sigma * (re + 1j * im))
