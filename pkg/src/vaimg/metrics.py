"""Restoration quality metrics: MSE, ISNR and the universal quality index.

UIQI follows the Wang-Bovik index

    Q = 4 cov(a,b) mean(a) mean(b) / ((var(a)+var(b)) (mean(a)^2+mean(b)^2))

averaged over sliding windows (default 8x8 per 2D slice, averaged across
slices; full 3D windows optionally).  Windows whose denominator vanishes,
e.g. all-black background against all-black background, are skipped and
counted, matching the canonical treatment of the 0/0 case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RefusalError
from .volume import RealVolume, require_same_grid


@dataclass
class QualityReport:
    """ISNR (dB), MSE and UIQI for one (reference, degraded, restored) set."""

    isnr: float
    mse: float
    uiqi: float


@dataclass
class UiqiStats:
    value: float
    valid_windows: int
    skipped_windows: int


def mse(a: RealVolume, b: RealVolume) -> float:
    """Mean over voxels of (a - b)^2."""
    require_same_grid(a, b)
    return float(np.mean((a.values - b.values) ** 2))


def isnr(f: RealVolume, g: RealVolume, fhat: RealVolume) -> float:
    """10 log10( sum (f-g)^2 / sum (f-fhat)^2 ).

    f is the reference, g the degraded image (its real part, by
    convention), fhat the restoration.  A perfect restoration yields +inf.
    """
    require_same_grid(f, g)
    require_same_grid(f, fhat)
    num = float(np.sum((f.values - g.values) ** 2))
    den = float(np.sum((f.values - fhat.values) ** 2))
    if den == 0.0:
        return math.inf
    return 10.0 * math.log10(num / den)


def _window_sums_2d(stack: np.ndarray, w: int) -> np.ndarray:
    """Sliding w x w window sums over the first two axes, all slices at once."""
    c = stack.cumsum(axis=0).cumsum(axis=1)
    c = np.pad(c, ((1, 0), (1, 0), (0, 0)))
    return c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]


def _window_sums_3d(vol: np.ndarray, w: int) -> np.ndarray:
    c = vol.cumsum(axis=0).cumsum(axis=1).cumsum(axis=2)
    c = np.pad(c, ((1, 0), (1, 0), (1, 0)))
    return (
        c[w:, w:, w:]
        - c[:-w, w:, w:]
        - c[w:, :-w, w:]
        - c[w:, w:, :-w]
        + c[:-w, :-w, w:]
        + c[:-w, w:, :-w]
        + c[w:, :-w, :-w]
        - c[:-w, :-w, :-w]
    )


def uiqi_stats(
    a: RealVolume,
    b: RealVolume,
    window: int = 8,
    mode: str = "2d",
    slice_axis: int | None = None,
    degenerate: str = "skip",
) -> UiqiStats:
    """UIQI with window bookkeeping; see :func:`uiqi`."""
    require_same_grid(a, b)
    if window < 2:
        raise RefusalError("uiqi window must span at least 2 voxels per axis")
    if degenerate not in ("skip", "one"):
        raise RefusalError(f"unknown degenerate policy {degenerate!r}")

    av, bv = a.values, b.values
    if mode == "2d":
        if slice_axis is None:
            # slice across z by default; a singleton axis (2D image stored as
            # a one-voxel-thick volume) becomes the slicing axis instead
            dims = a.grid.dims
            slice_axis = dims.index(1) if 1 in dims else 2
        av = np.moveaxis(av, slice_axis, 2)
        bv = np.moveaxis(bv, slice_axis, 2)
        if av.shape[0] < window or av.shape[1] < window:
            raise RefusalError(
                f"no {window}x{window} window fits in the {av.shape[:2]} slices"
            )
        sums = _window_sums_2d
        n_w = window * window
    elif mode == "3d":
        if any(n < window for n in av.shape):
            raise RefusalError(f"no {window}^3 window fits in volume {av.shape}")
        sums = _window_sums_3d
        n_w = window**3
    else:
        raise RefusalError(f"unknown uiqi mode {mode!r}")

    ma = sums(av, window) / n_w
    mb = sums(bv, window) / n_w
    # population variances; cancellation can leave tiny negatives on
    # constant windows, which must read as exactly degenerate
    va = np.maximum(sums(av * av, window) / n_w - ma * ma, 0.0)
    vb = np.maximum(sums(bv * bv, window) / n_w - mb * mb, 0.0)
    cov = sums(av * bv, window) / n_w - ma * mb

    var_sum = va + vb
    lum_sum = ma * ma + mb * mb
    den = var_sum * lum_sum
    defined = den > 0
    n_degenerate = int(den.size - np.count_nonzero(defined))

    if degenerate == "skip":
        if n_degenerate == den.size:
            raise RefusalError("uiqi has no valid windows (all denominators vanish)")
        q = 4.0 * cov[defined] * ma[defined] * mb[defined] / den[defined]
        return UiqiStats(float(q.mean()), int(defined.sum()), n_degenerate)

    # 'one': the reference quality-map treatment.  Windows flat in both
    # images score 1 (nothing to restore, nothing invented); windows flat
    # in variance but not in level score luminance only; the full formula
    # applies wherever it is defined.
    q = np.ones_like(ma)
    lum_only = (var_sum == 0.0) & (lum_sum != 0.0)
    np.divide(2.0 * ma * mb, lum_sum, out=q, where=lum_only)
    np.divide(4.0 * cov * ma * mb, den, out=q, where=defined)
    return UiqiStats(float(q.mean()), q.size, n_degenerate)


def uiqi(
    a: RealVolume,
    b: RealVolume,
    window: int = 8,
    mode: str = "2d",
    slice_axis: int | None = None,
    degenerate: str = "skip",
) -> float:
    """Mean Wang-Bovik quality index over sliding windows, in [-1, 1]."""
    return uiqi_stats(
        a, b, window=window, mode=mode, slice_axis=slice_axis, degenerate=degenerate
    ).value


def quantize(vol: RealVolume, levels: int = 256, full_scale: float = 1.0) -> RealVolume:
    """Clip to [0, full_scale] and round onto a uniform level grid.

    levels = 256 reproduces the 8-bit pixel depth of a 48 dB dynamic-range
    image; restored values below half a level collapse to exact zero, which
    is what makes background windows degenerate (and skipped) in UIQI.
    """
    if levels < 2:
        raise RefusalError("quantize requires at least 2 levels")
    step = full_scale / (levels - 1)
    v = np.clip(vol.values, 0.0, full_scale)
    return RealVolume(vol.grid, np.round(v / step) * step)


def evaluate(
    reference: RealVolume,
    degraded_real: RealVolume,
    restored: RealVolume,
    window: int = 8,
    mode: str = "2d",
    quantize_levels: int | None = 256,
    degenerate: str = "one",
) -> QualityReport:
    """QualityReport for a restoration run (the pipeline's convention).

    ISNR is computed on the raw intensities (the degraded image keeps the
    forward model's scale).  MSE and UIQI compare the reference with the
    restoration after quantization to the image bit depth; UIQI uses the
    ones-initialized quality map so that correctly blank background counts
    as perfectly restored, which is what makes whole-image scores of
    mostly-dark phantoms informative.
    """
    report_isnr = isnr(reference, degraded_real, restored)
    if quantize_levels:
        ref_q = quantize(reference, quantize_levels)
        rest_q = quantize(restored, quantize_levels)
    else:
        ref_q, rest_q = reference, restored
    return QualityReport(
        isnr=report_isnr,
        mse=mse(ref_q, rest_q),
        uiqi=uiqi(ref_q, rest_q, window=window, mode=mode, degenerate=degenerate),
    )
