"""Computational phantoms: spherical inclusions and stretched wires.

Contrast is attenuation below full scale in dB with the amplitude mapping
``10**(-contrast/20)``, so a 48 dB dynamic range corresponds to the 256:1
amplitude ratio of an 8-bit image.  Voxel membership is a center-in-shape
test; overlapping inclusions take the larger amplitude; everything else is
the background level (default 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import RefusalError
from .volume import Grid3D, RealVolume

# desk-scale default: same physical coverage as the reference 256x256x512
# grid (32 mm laterally, 64 mm in depth, focal plane at 70 mm) at half the
# sampling density
DESK_GRID = Grid3D((128, 128, 256), (0.25e-3,) * 3, (-16e-3, -16e-3, 38e-3))
PAPER_GRID = Grid3D((256, 256, 512), (0.125e-3,) * 3, (-16e-3, -16e-3, 38e-3))

# 30 x 70 mm scan region sampled at 0.1 mm, one voxel thick along the wires
WIRE_SCAN_GRID = Grid3D((300, 1, 700), (0.1e-3,) * 3, (-15e-3, 0.0, 35e-3))


def contrast_to_amplitude(contrast_db: float) -> float:
    return 10.0 ** (-contrast_db / 20.0)


@dataclass(frozen=True)
class SphereInclusion:
    center: tuple[float, float, float]  # m
    radius: float  # m
    contrast: float  # dB below full scale, >= 0

    def __post_init__(self):
        if self.radius <= 0:
            raise RefusalError(f"sphere radius must be positive, got {self.radius}")
        if self.contrast < 0:
            raise RefusalError(f"sphere contrast must be >= 0 dB, got {self.contrast}")


@dataclass(frozen=True)
class WireSpec:
    diameter: float  # m
    axis_point: tuple[float, float, float]  # m
    axis_direction: tuple[float, float, float]  # unit vector

    def __post_init__(self):
        if self.diameter <= 0:
            raise RefusalError(f"wire diameter must be positive, got {self.diameter}")
        n = math.sqrt(sum(c * c for c in self.axis_direction))
        if abs(n - 1.0) > 1e-9:
            raise RefusalError("wire axis_direction must be a unit vector")


@dataclass
class PhantomSpec:
    grid: Grid3D
    dynamic_range: float = 48.0  # dB
    spheres: list[SphereInclusion] = dc_field(default_factory=list)
    wires: list[WireSpec] = dc_field(default_factory=list)
    background: float = 0.0  # fraction of full scale

    def __post_init__(self):
        if self.dynamic_range <= 0:
            raise RefusalError("dynamic_range must be positive")
        if not (0.0 <= self.background <= 1.0):
            raise RefusalError(f"background must be in [0, 1], got {self.background}")
        for i, s in enumerate(self.spheres):
            if s.contrast > self.dynamic_range:
                raise RefusalError(
                    f"sphere {i} contrast {s.contrast} dB exceeds the "
                    f"{self.dynamic_range} dB dynamic range"
                )


def _sphere_in_grid(grid: Grid3D, s: SphereInclusion) -> bool:
    for i in range(3):
        lo, hi = grid.extent(i)
        if s.center[i] - s.radius < lo or s.center[i] + s.radius > hi:
            return False
    return True


def render_phantom(spec: PhantomSpec) -> RealVolume:
    """Rasterize a phantom onto its grid, values in [0, 1]."""
    grid = spec.grid
    x, y, z = grid.axes()
    X = x[:, None, None]
    Y = y[None, :, None]
    Z = z[None, None, :]

    # inclusions overwrite the background; overlaps keep the larger amplitude
    obj = np.full(grid.dims, -np.inf)
    for i, s in enumerate(spec.spheres):
        if not _sphere_in_grid(grid, s):
            raise RefusalError(
                f"sphere {i} (center {s.center}, radius {s.radius}) does not fit "
                "within the grid"
            )
        d2 = (X - s.center[0]) ** 2 + (Y - s.center[1]) ** 2 + (Z - s.center[2]) ** 2
        inside = d2 <= s.radius**2
        np.maximum(obj, np.where(inside, contrast_to_amplitude(s.contrast), -np.inf), out=obj)

    for i, w in enumerate(spec.wires):
        p = np.asarray(w.axis_point)
        d = np.asarray(w.axis_direction)
        rx, ry, rz = X - p[0], Y - p[1], Z - p[2]
        proj = rx * d[0] + ry * d[1] + rz * d[2]
        dist2 = rx**2 + ry**2 + rz**2 - proj**2
        inside = dist2 <= (0.5 * w.diameter) ** 2
        if not inside.any():
            raise RefusalError(f"wire {i} (axis point {w.axis_point}) misses the grid")
        np.maximum(obj, np.where(inside, 1.0, -np.inf), out=obj)

    out = np.where(np.isfinite(obj), obj, spec.background)
    return RealVolume(grid, out)


def builtin_phantom(name: str, grid: Grid3D | None = None) -> PhantomSpec:
    """The stock phantoms used throughout the simulated experiments.

    phantom1: three 4 mm-radius spheres at 36 / 0 / 42 dB contrast in the
        z = 76 mm transverse plane (6 mm past the focal plane).
    phantom2: phantom1 plus two 2 mm-radius, 46 dB spheres in the
        z = 78 mm plane.
    wire3: three 0.5 mm wires perpendicular to the 30 x 70 mm scan
        region, arranged diagonally and spaced 1.4 cm along depth.

    Lateral sphere placement is a documented default (evenly spaced along
    x); pass explicit PhantomSpec objects to move them.
    """
    if name in ("phantom1", "phantom2"):
        g = DESK_GRID if grid is None else grid
        spheres = [
            SphereInclusion((-10e-3, 0.0, 76e-3), 4e-3, 36.0),
            SphereInclusion((0.0, 0.0, 76e-3), 4e-3, 0.0),
            SphereInclusion((10e-3, 0.0, 76e-3), 4e-3, 42.0),
        ]
        if name == "phantom2":
            spheres += [
                SphereInclusion((-5e-3, 0.0, 78e-3), 2e-3, 46.0),
                SphereInclusion((5e-3, 0.0, 78e-3), 2e-3, 46.0),
            ]
        return PhantomSpec(grid=g, spheres=spheres)
    if name == "wire3":
        g = WIRE_SCAN_GRID if grid is None else grid
        wires = [
            WireSpec(0.5e-3, (-10e-3, 0.0, 56e-3), (0.0, 1.0, 0.0)),
            WireSpec(0.5e-3, (0.0, 0.0, 70e-3), (0.0, 1.0, 0.0)),
            WireSpec(0.5e-3, (10e-3, 0.0, 84e-3), (0.0, 1.0, 0.0)),
        ]
        return PhantomSpec(grid=g, wires=wires)
    raise RefusalError(f"unknown builtin phantom {name!r}")
