"""Complex point- and line-spread functions of the confocal system.

The system PSF is the conjugate product of the two element fields,
``h = conj(p1) * p2``, normalized to unit peak magnitude.  A theoretical
LSF is the PSF convolved with a wire phantom; a hybrid LSF marries the
magnitude of one volume with the phase of another (used when measured
phase must replace the modeled one).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RefusalError
from .volume import ComplexVolume, RealVolume, require_same_grid, require_same_spacing


@dataclass
class Psf:
    """Normalized complex PSF plus the scale that was divided out."""

    volume: ComplexVolume
    normalization: float

    @property
    def grid(self):
        return self.volume.grid


def make_psf(p1: ComplexVolume, p2: ComplexVolume) -> Psf:
    """Build the system PSF conj(p1) * p2, scaled so max |h| = 1."""
    require_same_grid(p1, p2, "element fields")
    h = np.conj(p1.values) * p2.values
    peak = float(np.abs(h).max())
    if peak == 0.0:
        raise RefusalError("PSF is identically zero (both fields vanish)")
    return Psf(volume=ComplexVolume(p1.grid, h / peak), normalization=peak)


def make_theoretical_lsf(psf: Psf, wire_phantom: RealVolume) -> ComplexVolume:
    """PSF convolved with a wire phantom (noiseless forward model)."""
    from .forward import convolve

    require_same_spacing(psf.volume, wire_phantom, "PSF and wire phantom")
    if not np.any(wire_phantom.values):
        raise RefusalError("wire phantom is identically zero")
    return convolve(wire_phantom, psf.volume)


def compose_lsf(magnitude_source: ComplexVolume, phase_source: ComplexVolume) -> ComplexVolume:
    """Combine |magnitude_source| with the phase of phase_source, voxelwise.

    Where phase_source is zero its phase is taken as 0 (np.angle(0) == 0),
    so such voxels come out real non-negative.
    """
    require_same_grid(magnitude_source, phase_source, "magnitude and phase sources")
    out = np.abs(magnitude_source.values) * np.exp(1j * np.angle(phase_source.values))
    return ComplexVolume(magnitude_source.grid, out)


def magnitude_width_db(profile: np.ndarray, positions: np.ndarray, drop_db: float = 6.0) -> float:
    """Width of |profile| at drop_db below its peak, by linear interpolation.

    Used to measure the -6 dB focal-plane width and axial extent of the PSF.
    """
    mag = np.abs(np.asarray(profile, dtype=float))
    peak = mag.max()
    if peak <= 0:
        raise RefusalError("profile is identically zero")
    level = peak * 10.0 ** (-drop_db / 20.0)
    ipk = int(np.argmax(mag))
    above = mag >= level

    def edge(direction: int) -> float:
        i = ipk
        while 0 <= i + direction < len(mag) and above[i + direction]:
            i += direction
        j = i + direction
        if j < 0 or j >= len(mag):
            return positions[i]  # level never reached inside the profile
        # linear interpolation between the last sample above and first below
        f = (mag[i] - level) / (mag[i] - mag[j])
        return positions[i] + f * (positions[j] - positions[i])

    return float(edge(+1) - edge(-1))
