"""Regular 3D grids and the real/complex volumes that live on them.

All physical quantities are SI (meters, Hz, Pa).  A volume stores its
samples as a ``(nx, ny, nz)`` numpy array indexed ``[ix, iy, iz]``; the
position of voxel ``(0, 0, 0)`` is ``grid.origin``, measured relative to
the transducer face center, with z along the beam axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, RefusalError


@dataclass(frozen=True)
class Grid3D:
    """Voxel counts, spacings (m) and the position of voxel (0,0,0) (m)."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.dims) != 3 or len(self.spacing) != 3 or len(self.origin) != 3:
            raise RefusalError("Grid3D requires 3-element dims, spacing and origin")
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if any(n < 1 for n in self.dims):
            raise RefusalError(f"grid dims must be >= 1, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise RefusalError(f"grid spacing must be positive, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def voxel_volume(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz

    def axis(self, i: int) -> np.ndarray:
        """Voxel-center positions along axis i (0=x, 1=y, 2=z)."""
        return self.origin[i] + self.spacing[i] * np.arange(self.dims[i])

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.axis(0), self.axis(1), self.axis(2)

    def extent(self, i: int) -> tuple[float, float]:
        """Physical coverage along axis i, including the half-voxel rims."""
        lo = self.origin[i] - 0.5 * self.spacing[i]
        hi = self.origin[i] + (self.dims[i] - 0.5) * self.spacing[i]
        return lo, hi

    def contains_point(self, p) -> bool:
        return all(self.extent(i)[0] <= p[i] <= self.extent(i)[1] for i in range(3))

    def index_of(self, p) -> tuple[int, int, int]:
        """Index of the voxel whose center is nearest to position p."""
        return tuple(
            int(round((p[i] - self.origin[i]) / self.spacing[i])) for i in range(3)
        )

    def position_of(self, idx) -> tuple[float, float, float]:
        return tuple(self.origin[i] + idx[i] * self.spacing[i] for i in range(3))


def _check_values(grid: Grid3D, values: np.ndarray, dtype) -> np.ndarray:
    values = np.asarray(values, dtype=dtype)
    if values.shape != grid.dims:
        raise RefusalError(
            f"values shape {values.shape} does not match grid dims {grid.dims}"
        )
    if not np.all(np.isfinite(values)):
        raise RefusalError("volume contains non-finite values")
    return values


@dataclass
class RealVolume:
    """A real-valued sample on every voxel of a grid."""

    grid: Grid3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, np.float64)

    def copy(self) -> "RealVolume":
        return RealVolume(self.grid, self.values.copy())


@dataclass
class ComplexVolume:
    """A complex amplitude on every voxel of a grid (fields, PSFs, images)."""

    grid: Grid3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, np.complex128)

    def copy(self) -> "ComplexVolume":
        return ComplexVolume(self.grid, self.values.copy())

    def magnitude(self) -> RealVolume:
        return RealVolume(self.grid, np.abs(self.values))

    def real_part(self) -> RealVolume:
        return RealVolume(self.grid, self.values.real.copy())

    def peak_index(self) -> tuple[int, int, int]:
        """Index of the voxel with the largest magnitude."""
        flat = int(np.argmax(np.abs(self.values)))
        return tuple(int(i) for i in np.unravel_index(flat, self.values.shape))


def require_same_grid(a, b, what: str = "volumes") -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"{what} must share a grid: {a.grid} vs {b.grid}")


def require_same_spacing(a, b, what: str = "volumes") -> None:
    if a.grid.spacing != b.grid.spacing:
        raise GridMismatchError(
            f"{what} must share voxel spacing: {a.grid.spacing} vs {b.grid.spacing}"
        )
