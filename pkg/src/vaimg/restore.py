"""Frequency-domain deconvolution filters: Wiener, CLS and geometric mean.

All three share the same machinery: the degraded complex image g and the
PSF h are zero-padded to the linear-convolution transform size (the PSF
peak wrapped to the origin, mirroring the forward model), a per-bin gain
is applied to G, and the inverse transform is cropped back to g's grid.
Bins whose denominator vanishes get zero gain instead of overflowing;
their count is reported.  The real part is the restored image; the
discarded imaginary part is summarized by its relative L2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import RefusalError
from .forward import embed_image, embed_kernel, padded_shape, transform_shape
from .volume import ComplexVolume, RealVolume, require_same_spacing

FILTER_KINDS = ("wiener", "cls", "gm")


@dataclass
class FilterParams:
    """Bag of per-filter parameters, as read from a config or the CLI.

    ``noise_to_signal`` is the S_n/S_f spectral ratio: a scalar, a
    per-frequency array on the transform grid, or None meaning "derive
    from the pipeline's SNR as 10**(-snr_db/10)".
    """

    kind: str
    gamma: float | None = None
    alpha: float | None = None
    noise_to_signal: float | np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise RefusalError(f"unknown filter kind {self.kind!r}")
        if self.kind in ("cls", "gm"):
            if self.gamma is None or self.gamma <= 0:
                raise RefusalError(f"{self.kind} filter requires gamma > 0")
        if self.kind == "gm":
            if self.alpha is None or not (0.0 <= self.alpha <= 1.0):
                raise RefusalError("gm filter requires alpha in [0, 1]")
        if isinstance(self.noise_to_signal, (int, float)) and self.noise_to_signal < 0:
            raise RefusalError("noise_to_signal must be >= 0")


@dataclass
class RestorationResult:
    """Restored real image plus diagnostics of what was discarded."""

    restored_real: RealVolume
    imag_residual_norm: float
    guarded_bins: int = 0


def laplacian_spectrum(shape: tuple[int, ...]) -> np.ndarray:
    """Transform of the 3D 7-point Laplacian (center -6, face neighbors +1).

    The kernel center sits at the origin of the transform grid, so the
    spectrum is the real cosine expression -6 + 2cos(kx) + 2cos(ky) +
    2cos(kz) and vanishes exactly at DC.  Axes of length 1 wrap their
    neighbors onto the center, degrading gracefully to the 2D/1D stencil.
    """
    lap = np.zeros(shape)
    lap[0, 0, 0] = -6.0
    for axis, n in enumerate(shape):
        for step in (+1, -1):
            idx = [0, 0, 0]
            idx[axis] = step % n
            lap[tuple(idx)] += 1.0
    return sfft.fftn(lap, workers=-1)


def laplacian_nsr(shape: tuple[int, ...], floor: float, weight: float) -> np.ndarray:
    """Per-frequency noise-to-signal model floor + weight * |P(k)|^2.

    Piecewise-constant phantoms have power spectra falling off like the
    inverse fourth power of frequency, so their S_n/S_f rises like |P|^2
    (the Laplacian spectrum squared); the floor keeps a minimum of
    regularization near DC.  With floor = 0 the Wiener filter built from
    this ratio coincides exactly with the CLS filter at gamma = weight.
    """
    if floor < 0 or weight < 0:
        raise RefusalError("laplacian_nsr floor and weight must be >= 0")
    return floor + weight * np.abs(laplacian_spectrum(shape)) ** 2


def nsr_for(g: ComplexVolume, h: ComplexVolume, floor: float, weight: float,
            mode: str = "linear") -> np.ndarray:
    """laplacian_nsr on the transform grid that wiener/gm will use for (g, h)."""
    return laplacian_nsr(transform_shape(g.grid.dims, h.grid.dims, mode), floor, weight)


def target_transfer_nsr(
    g: ComplexVolume,
    h: ComplexVolume,
    sigma_lateral: float = 2.0,
    sigma_axial: float = 25.0,
    guard: float = 1.0,
    mode: str = "linear",
) -> np.ndarray:
    """Spectral noise-to-signal ratio that steers the Wiener gain toward a
    smooth anisotropic Gaussian net transfer.

    With A(k) the transform of a Gaussian blur (sigmas in voxels) the ratio
    (|H|^2 + guard)/A - |H|^2 turns the Eq.-style gain H*/(|H|^2 + nsr)
    into approximately A/H: the restoration resolves to the target blur
    wherever the system response supports it while the guard keeps bins
    with |H|^2 below it from amplifying noise.  A smooth net transfer is
    what keeps restored inclusions free of long ringing skirts,
    which matters for whole-image quality indices; the anisotropy reflects
    the system's sharp lateral but shallow axial response.
    """
    if sigma_lateral <= 0 or sigma_axial <= 0 or guard < 0:
        raise RefusalError("target_transfer_nsr sigmas must be > 0 and guard >= 0")
    shape = transform_shape(g.grid.dims, h.grid.dims, mode)
    H2 = np.abs(sfft.fftn(embed_kernel(h.values, shape), workers=-1)) ** 2
    k = [2.0 * np.pi * sfft.fftfreq(n) for n in shape]
    ph = (
        (k[0][:, None, None] ** 2 + k[1][None, :, None] ** 2) * sigma_lateral**2
        + k[2][None, None, :] ** 2 * sigma_axial**2
    )
    target = np.exp(-0.5 * ph)
    return np.maximum((H2 + guard) / np.maximum(target, 1e-300) - H2, 0.0)


def _check_nsr(nsr, shape):
    if nsr is None:
        raise RefusalError("noise_to_signal is required (scalar or spectrum)")
    if isinstance(nsr, np.ndarray):
        if np.any(nsr < 0):
            raise RefusalError("noise_to_signal spectrum must be >= 0")
        if nsr.shape != shape:
            raise RefusalError(
                f"noise_to_signal spectrum shape {nsr.shape} does not match the "
                f"transform grid {shape}"
            )
        return nsr
    nsr = float(nsr)
    if nsr < 0:
        raise RefusalError("noise_to_signal must be >= 0")
    return nsr


def _spectra(g: ComplexVolume, h: ComplexVolume, mode: str):
    require_same_spacing(g, h, "image and PSF")
    shape = transform_shape(g.grid.dims, h.grid.dims, mode)
    G = sfft.fftn(embed_image(g.values, shape), workers=-1)
    H = sfft.fftn(embed_kernel(h.values, shape), workers=-1)
    return G, H, shape


def _apply_gain(gain, G, g: ComplexVolume, guarded: int) -> RestorationResult:
    fhat = sfft.ifftn(gain * G, workers=-1)
    crop = tuple(slice(0, n) for n in g.grid.dims)
    fhat = fhat[crop]
    real = np.ascontiguousarray(fhat.real)
    real_norm = float(np.linalg.norm(real))
    imag_norm = float(np.linalg.norm(fhat.imag))
    rel = imag_norm / real_norm if real_norm > 0 else np.inf
    return RestorationResult(RealVolume(g.grid, real), rel, guarded)


def _safe_divide(num, den):
    """num/den with zero-denominator bins forced to zero gain."""
    ok = den != 0
    out = np.zeros_like(num)
    np.divide(num, den, where=ok, out=out)
    return out, int(den.size - np.count_nonzero(ok))


def wiener(g: ComplexVolume, h: ComplexVolume, nsr, mode: str = "linear") -> RestorationResult:
    """Wiener deconvolution, gain = H* / (|H|^2 + S_n/S_f).

    nsr = 0 reduces to the inverse filter wherever |H| > 0.
    """
    G, H, shape = _spectra(g, h, mode)
    nsr = _check_nsr(nsr, shape)
    gain, guarded = _safe_divide(np.conj(H), np.abs(H) ** 2 + nsr)
    return _apply_gain(gain, G, g, guarded)


def cls(g: ComplexVolume, h: ComplexVolume, gamma: float, mode: str = "linear") -> RestorationResult:
    """Constrained least-squares, gain = H* / (|H|^2 + gamma |P|^2).

    P is the transform of the 3D discrete Laplacian; gamma = 0 reduces to
    the inverse filter.  |P|^2 vanishes at DC, so the DC gain always equals
    the inverse-filter DC gain.
    """
    if gamma < 0:
        raise RefusalError("cls gamma must be >= 0")
    G, H, shape = _spectra(g, h, mode)
    P2 = np.abs(laplacian_spectrum(shape)) ** 2
    gain, guarded = _safe_divide(np.conj(H), np.abs(H) ** 2 + gamma * P2)
    return _apply_gain(gain, G, g, guarded)


def gm(g: ComplexVolume, h: ComplexVolume, alpha: float, gamma: float, nsr,
       mode: str = "linear") -> RestorationResult:
    """Geometric-mean filter, gain = [H*/|H|^2]^a [H*/(|H|^2 + g S_n/S_f)]^(1-a).

    Complex powers use the principal branch.  alpha = 1 is the inverse
    filter and alpha = 0, gamma = 1 reduces bit-exactly to the Wiener
    filter (both endpoints skip the power path entirely).
    """
    if not (0.0 <= alpha <= 1.0):
        raise RefusalError("gm alpha must lie in [0, 1]")
    if gamma <= 0:
        raise RefusalError("gm gamma must be > 0")
    G, H, shape = _spectra(g, h, mode)
    nsr = _check_nsr(nsr, shape)
    H2 = np.abs(H) ** 2
    if alpha == 0.0:
        gain, guarded = _safe_divide(np.conj(H), H2 + gamma * nsr)
    elif alpha == 1.0:
        gain, guarded = _safe_divide(np.conj(H), H2)
    else:
        inv, guarded_inv = _safe_divide(np.conj(H), H2)
        reg, guarded_reg = _safe_divide(np.conj(H), H2 + gamma * nsr)
        ok = (inv != 0) & (reg != 0)
        gain = np.zeros_like(inv)
        gain[ok] = np.exp(alpha * np.log(inv[ok]) + (1.0 - alpha) * np.log(reg[ok]))
        guarded = int(gain.size - np.count_nonzero(ok))
    return _apply_gain(gain, G, g, guarded)


def apply_filter(
    g: ComplexVolume, h: ComplexVolume, params: FilterParams, mode: str = "linear"
) -> RestorationResult:
    """Dispatch on FilterParams.kind; noise_to_signal must be resolved."""
    if params.kind == "wiener":
        return wiener(g, h, params.noise_to_signal, mode=mode)
    if params.kind == "cls":
        return cls(g, h, params.gamma, mode=mode)
    return gm(g, h, params.alpha, params.gamma, params.noise_to_signal, mode=mode)


def sweep_filter_params(
    g: ComplexVolume,
    h: ComplexVolume,
    reference: RealVolume,
    kind: str,
    gammas=(1.0,),
    alphas=(0.5,),
    nsrs=(0.01,),
    window: int = 8,
    quantize_levels: int | None = None,
    mode: str = "linear",
):
    """Trial-and-error grid sweep maximizing UIQI against a reference.

    Returns (best_params, best_uiqi, table) where table rows are
    (params, uiqi).  Mirrors the by-hand parameter tuning used to pick
    gamma, alpha and the noise-to-signal ratio.
    """
    from .metrics import quantize, uiqi

    if kind == "wiener":
        combos = [FilterParams("wiener", noise_to_signal=n) for n in nsrs]
    elif kind == "cls":
        combos = [FilterParams("cls", gamma=ga) for ga in gammas]
    elif kind == "gm":
        combos = [
            FilterParams("gm", gamma=ga, alpha=al, noise_to_signal=n)
            for ga in gammas
            for al in alphas
            for n in nsrs
        ]
    else:
        raise RefusalError(f"unknown filter kind {kind!r}")

    ref = quantize(reference, quantize_levels) if quantize_levels else reference
    table = []
    for params in combos:
        result = apply_filter(g, h, params, mode=mode)
        restored = result.restored_real
        if quantize_levels:
            restored = quantize(restored, quantize_levels)
        table.append((params, uiqi(ref, restored, window=window)))
    best_params, best_q = max(table, key=lambda row: row[1])
    return best_params, best_q, table
