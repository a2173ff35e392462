"""Slice images (8-bit PGM) and line profiles (text columns + raster plot)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import RefusalError
from .io import atomic_write_bytes
from .volume import ComplexVolume, RealVolume

DEFAULT_FOCAL_DISTANCE = 70e-3


def _as_real_values(vol: RealVolume | ComplexVolume) -> np.ndarray:
    if isinstance(vol, ComplexVolume):
        return np.abs(vol.values)
    return vol.values


def _axis_index(vol, axis: int, position: float) -> int:
    lo, hi = vol.grid.extent(axis)
    if not (lo <= position <= hi):
        raise RefusalError(
            f"position {position * 1e3:.2f} mm is outside the grid along axis {axis} "
            f"([{lo * 1e3:.2f}, {hi * 1e3:.2f}] mm)"
        )
    return int(round((position - vol.grid.origin[axis]) / vol.grid.spacing[axis]))


def slice_to_pgm(
    vol: RealVolume | ComplexVolume,
    plane: str = "transverse",
    depth_mm: float = 0.0,
    lateral_mm: float = 0.0,
    focal_distance: float = DEFAULT_FOCAL_DISTANCE,
) -> bytes:
    """Extract a 2D slice as binary 8-bit PGM bytes.

    ``plane='transverse'`` cuts at z = focal_distance + depth_mm (depth is
    measured from the focal plane, matching the transverse-plane labels of
    the simulated figures); ``plane='axial'`` cuts at y = lateral_mm.  Gray
    levels are normalized by the volume maximum.
    """
    values = _as_real_values(vol)
    if plane == "transverse":
        iz = _axis_index(vol, 2, focal_distance + depth_mm * 1e-3)
        img = values[:, :, iz].T  # rows = y, cols = x
    elif plane == "axial":
        iy = _axis_index(vol, 1, lateral_mm * 1e-3)
        img = values[:, iy, :].T  # rows = z, cols = x
    else:
        raise RefusalError(f"unknown plane {plane!r}, expected transverse or axial")
    top = values.max()
    scale = 255.0 / top if top > 0 else 0.0
    pixels = np.clip(np.round(img * scale), 0, 255).astype(np.uint8)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    return header + pixels.tobytes()


def export_slice(path, vol, plane="transverse", depth_mm=0.0, lateral_mm=0.0,
                 focal_distance=DEFAULT_FOCAL_DISTANCE) -> None:
    atomic_write_bytes(path, slice_to_pgm(vol, plane, depth_mm, lateral_mm, focal_distance))


def extract_profile(
    vol: RealVolume | ComplexVolume,
    axis: str = "x",
    depth_mm: float = 0.0,
    lateral_mm: float = 0.0,
    focal_distance: float = DEFAULT_FOCAL_DISTANCE,
) -> tuple[np.ndarray, np.ndarray]:
    """Gray levels along one axis-aligned line, normalized by the volume max.

    Returns (positions_mm, normalized_levels).  For axis='x' the line runs
    laterally at y = lateral_mm in the transverse plane depth_mm past the
    focal plane; for axis='z' it runs along depth at x = lateral_mm, y = 0.
    """
    values = _as_real_values(vol)
    top = values.max()
    norm = 1.0 / top if top > 0 else 0.0
    if axis == "x":
        iy = _axis_index(vol, 1, lateral_mm * 1e-3)
        iz = _axis_index(vol, 2, focal_distance + depth_mm * 1e-3)
        return vol.grid.axis(0) * 1e3, values[:, iy, iz] * norm
    if axis == "z":
        ix = _axis_index(vol, 0, lateral_mm * 1e-3)
        iy = _axis_index(vol, 1, 0.0)
        return vol.grid.axis(2) * 1e3, values[ix, iy, :] * norm
    raise RefusalError(f"unknown profile axis {axis!r}, expected x or z")


def profile_columns(positions_mm: np.ndarray, levels: np.ndarray) -> str:
    lines = ["# position_mm gray_level"]
    lines += [f"{p:.6f} {v:.8f}" for p, v in zip(positions_mm, levels)]
    return "\n".join(lines) + "\n"


def export_profile(
    path_columns,
    path_plot,
    vol,
    axis="x",
    depth_mm=0.0,
    lateral_mm=0.0,
    focal_distance=DEFAULT_FOCAL_DISTANCE,
) -> None:
    """Write the profile as text columns and as a rendered PNG."""
    pos, lev = extract_profile(vol, axis, depth_mm, lateral_mm, focal_distance)
    atomic_write_bytes(path_columns, profile_columns(pos, lev).encode())

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(pos, lev, lw=1.0)
    ax.set_xlabel(f"{axis} (mm)")
    ax.set_ylabel("normalized gray level")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    Path(path_plot).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path_plot, dpi=120)
    plt.close(fig)
