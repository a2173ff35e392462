import numpy as np
import pytest

from vaimg import (
    DESK_GRID,
    ComplexVolume,
    Grid3D,
    Medium,
    TransducerSpec,
    compute_pressure_field,
    make_psf,
)

# small transducer for fast end-to-end runs (hundreds of patches instead of
# the reference geometry's ~10^5)
TINY_SPEC = TransducerSpec(
    inner_radius=3e-3,
    ring_inner_radius=3.5e-3,
    ring_outer_radius=5e-3,
    focal_distance=25e-3,
    freq_inner=1.0e6,
    freq_outer=1.05e6,
)
TINY_GRID = Grid3D((16, 16, 24), (1e-3, 1e-3, 1e-3), (-8e-3, -8e-3, 15e-3))


def oneil_on_axis(spec: TransducerSpec, medium: Medium, element: str, z: np.ndarray):
    """Closed-form on-axis pressure of a focused spherical cap or annulus.

    Independent oracle for the patch solver: substituting u = r in the
    Rayleigh integral over the cap gives, for unit normal velocity,
    p(z) = rho c (R / (R - z)) (exp(i k r_rim) - exp(i k z)) with r_rim the
    distance from the axial point to the element rim; an annulus is the
    difference of two caps.
    """
    R = spec.focal_distance
    k = 2.0 * np.pi * spec.element_frequency(element) / medium.sound_speed
    a_lo, a_hi = spec.element_angles(element)
    d = R - np.asarray(z, dtype=float)
    r_hi = np.sqrt(R * R + d * d - 2.0 * R * d * np.cos(a_hi))
    r_lo = np.sqrt(R * R + d * d - 2.0 * R * d * np.cos(a_lo))
    return (
        medium.density
        * medium.sound_speed
        * (R / d)
        * (np.exp(1j * k * r_hi) - np.exp(1j * k * r_lo))
    )


@pytest.fixture(scope="session")
def desk_psf():
    """The reference-transducer PSF on the desk-scale grid (spectral path)."""
    spec = TransducerSpec()
    med = Medium()
    p1 = compute_pressure_field(spec, "inner", med, DESK_GRID, method="spectral")
    p2 = compute_pressure_field(spec, "outer", med, DESK_GRID, method="spectral")
    return make_psf(p1, p2)


@pytest.fixture(scope="session")
def tiny_fields():
    med = Medium()
    p1 = compute_pressure_field(TINY_SPEC, "inner", med, TINY_GRID)
    p2 = compute_pressure_field(TINY_SPEC, "outer", med, TINY_GRID)
    return p1, p2


def gaussian_kernel(shape=(17, 17, 17), sigma=1.2, spacing=(1e-3, 1e-3, 1e-3)):
    """Compact synthetic PSF with a well-conditioned Gaussian-like spectrum."""
    axes = [np.arange(n) - n // 2 for n in shape]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    vals = np.exp(-(X**2 + Y**2 + Z**2) / (2.0 * sigma**2)).astype(complex)
    return ComplexVolume(Grid3D(shape, spacing, (0, 0, 0)), vals)
