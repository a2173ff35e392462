"""Batch command-line front end.

Each subcommand maps 1:1 onto a library operation; ``pipeline`` chains
phantom -> PSF -> forward -> restore -> metrics.  Exit codes: 0 success,
2 invalid configuration or arguments, 3 numerical refusal from a module.
Failures print a single machine-readable line to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io as vio
from .config import MetricOptions, RunConfig, load_config
from .errors import ConfigError, RefusalError, ToolkitError
from .export import export_profile, export_slice
from .field import Medium, compute_pressure_field
from .forward import NoiseSpec, add_noise, convolve
from .metrics import evaluate
from .phantoms import builtin_phantom, render_phantom
from .phase import build_phase_map, estimate_lsf
from .pipeline import compute_psf, run_pipeline
from .psf import compose_lsf, make_psf
from .restore import FilterParams, apply_filter
from .volume import ComplexVolume, RealVolume


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "code": code, "message": message}) + "\n")
    return code


def _load_complex(path) -> ComplexVolume:
    vol = vio.read_volume(path)
    if isinstance(vol, RealVolume):
        return ComplexVolume(vol.grid, vol.values.astype(np.complex128))
    return vol


def _load_real(path) -> RealVolume:
    vol = vio.read_volume(path)
    if isinstance(vol, ComplexVolume):
        raise ConfigError(f"{path} holds a complex volume where a real one is needed")
    return vol


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "phantom", None):
        cfg.phantom_name, cfg.phantom = args.phantom, None
    if getattr(args, "snr_db", None) is not None:
        cfg.noise = NoiseSpec(snr_db=args.snr_db, seed=cfg.noise.seed)
    if getattr(args, "seed", None) is not None:
        cfg.noise = NoiseSpec(snr_db=cfg.noise.snr_db, seed=args.seed)
    if getattr(args, "filter", None):
        cfg.filter_params = _filter_from_args(args)
    if getattr(args, "outdir", None):
        cfg.output_dir = Path(args.outdir)
    if getattr(args, "run_id", None):
        cfg.run_id = args.run_id
    return cfg


def _filter_from_args(args) -> FilterParams:
    nsr = getattr(args, "nsr", None)
    if isinstance(nsr, str):
        nsr = None if nsr == "auto" else float(nsr)
    return FilterParams(
        kind=args.filter,
        gamma=getattr(args, "gamma", None),
        alpha=getattr(args, "alpha", None),
        noise_to_signal=nsr,
    )


def _parse_region(text: str):
    parts = text.split(",")
    if len(parts) != 6:
        raise ConfigError("--region needs x0,x1,y0,y1,z0,z1 voxel bounds")
    v = [int(p) for p in parts]
    return (slice(v[0], v[1]), slice(v[2], v[3]), slice(v[4], v[5]))


def _cmd_simulate_field(args) -> int:
    cfg = _config_from_args(args)
    field = compute_pressure_field(
        cfg.transducer, args.element, cfg.medium, cfg.grid,
        patch_target=cfg.patch_target, method=cfg.field_method,
    )
    vio.write_volume(args.out, field)
    return 0


def _cmd_make_psf(args) -> int:
    psf = make_psf(_load_complex(args.p1), _load_complex(args.p2))
    vio.write_volume(args.out, psf.volume)
    return 0


def _cmd_make_phantom(args) -> int:
    cfg = _config_from_args(args)
    vio.write_volume(args.out, render_phantom(cfg.resolve_phantom()))
    return 0


def _cmd_forward(args) -> int:
    f = _load_real(args.phantom_vol)
    h = _load_complex(args.psf)
    g = convolve(f, h)
    if args.snr_db is not None and not math.isinf(args.snr_db):
        g = add_noise(g, NoiseSpec(snr_db=args.snr_db, seed=args.seed or 0))
    vio.write_volume(args.out, g)
    return 0


def _cmd_restore(args) -> int:
    g = _load_complex(args.image)
    h = _load_complex(args.psf)
    params = _filter_from_args(args)
    if params.kind in ("wiener", "gm") and params.noise_to_signal is None:
        raise ConfigError(f"--nsr is required for the {params.kind} filter")
    result = apply_filter(g, h, params)
    vio.write_volume(args.out, result.restored_real)
    if args.diagnostics:
        text = (
            f"imag_residual_norm = {result.imag_residual_norm:.6e}\n"
            f"guarded_bins = {result.guarded_bins}\n"
        )
        vio.atomic_write_bytes(args.diagnostics, text.encode())
    return 0


def _cmd_metrics(args) -> int:
    report = evaluate(
        _load_real(args.reference),
        _load_real(args.degraded),
        _load_real(args.restored),
        window=args.window,
        quantize_levels=None if args.quantize_levels == 0 else args.quantize_levels,
    )
    fields = {
        "run_id": args.run_id,
        "isnr_db": f"{report.isnr:.6f}" if math.isfinite(report.isnr) else "inf",
        "mse": f"{report.mse:.8g}",
        "uiqi": f"{report.uiqi:.6f}",
    }
    if args.out:
        vio.append_metrics_row(args.out, fields)
    else:
        sys.stdout.write(vio.format_csv_row(fields) + "\n")
    return 0


def _cmd_estimate_lsf(args) -> int:
    image = _load_complex(args.image)
    lsf = estimate_lsf(image, _parse_region(args.region), args.cutoff_cycles_per_m)
    vio.write_volume(args.out, lsf)
    return 0


def _cmd_phase_map(args) -> int:
    seqs = vio.read_sequence_set(args.sequences)
    ref = tuple(int(p) for p in args.reference.split(","))
    if len(ref) != 3:
        raise ConfigError("--reference needs ix,iy,iz")
    pm = build_phase_map(seqs, ref)
    vio.write_volume(args.out_phase, pm.phases)
    vio.write_volume(args.out_amplitude, pm.amplitudes)
    vio.write_volume(args.out_mask, pm.mask)
    return 0


def _cmd_compose_lsf(args) -> int:
    out = compose_lsf(_load_complex(args.magnitude), _load_complex(args.phase))
    vio.write_volume(args.out, out)
    return 0


def _cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    if args.quantize_levels is not None:
        cfg.metrics = MetricOptions(
            window=cfg.metrics.window,
            mode=cfg.metrics.mode,
            quantize_levels=None if args.quantize_levels == 0 else args.quantize_levels,
        )
    psf = None
    if args.psf:
        psf_vol = _load_complex(args.psf)
        from .psf import Psf

        psf = Psf(volume=psf_vol, normalization=1.0)
    res = run_pipeline(cfg, psf=psf)
    r = res.report
    sys.stdout.write(
        f"run_id={cfg.run_id} filter={cfg.filter_params.kind} "
        f"isnr_db={r.isnr:.3f} mse={r.mse:.6g} uiqi={r.uiqi:.4f}\n"
    )
    return 0


def _cmd_export_slice(args) -> int:
    vol = vio.read_volume(args.volume)
    export_slice(
        args.out, vol, plane=args.plane, depth_mm=args.depth_mm,
        lateral_mm=args.lateral_mm, focal_distance=args.focal_mm * 1e-3,
    )
    return 0


def _cmd_export_profile(args) -> int:
    vol = vio.read_volume(args.volume)
    export_profile(
        args.out_columns, args.out_plot, vol, axis=args.axis,
        depth_mm=args.depth_mm, lateral_mm=args.lateral_mm,
        focal_distance=args.focal_mm * 1e-3,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vaimg", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("simulate-field", _cmd_simulate_field, help="one element's pressure field")
    p.add_argument("--config")
    p.add_argument("--element", choices=("inner", "outer"), required=True)
    p.add_argument("--out", required=True)

    p = add("make-psf", _cmd_make_psf, help="PSF from two element fields")
    p.add_argument("--p1", required=True)
    p.add_argument("--p2", required=True)
    p.add_argument("--out", required=True)

    p = add("make-phantom", _cmd_make_phantom, help="rasterize a phantom")
    p.add_argument("--config")
    p.add_argument("--phantom", help="builtin name (phantom1, phantom2, wire3)")
    p.add_argument("--out", required=True)

    p = add("forward", _cmd_forward, help="simulate a VA image (f * h + n)")
    p.add_argument("--phantom-vol", required=True)
    p.add_argument("--psf", required=True)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("restore", _cmd_restore, help="deconvolve a VA image")
    p.add_argument("--image", required=True)
    p.add_argument("--psf", required=True)
    p.add_argument("--filter", choices=("wiener", "cls", "gm"), required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--nsr", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--diagnostics")

    p = add("metrics", _cmd_metrics, help="ISNR / MSE / UIQI for a run")
    p.add_argument("--reference", required=True)
    p.add_argument("--degraded", required=True)
    p.add_argument("--restored", required=True)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--quantize-levels", type=int, default=256)
    p.add_argument("--run-id", default="run")
    p.add_argument("--out")

    p = add("estimate-lsf", _cmd_estimate_lsf, help="LSF by spectral inversion")
    p.add_argument("--image", required=True)
    p.add_argument("--region", required=True, help="x0,x1,y0,y1,z0,z1 voxels")
    p.add_argument("--cutoff-cycles-per-m", type=float, required=True)
    p.add_argument("--out", required=True)

    p = add("phase-map", _cmd_phase_map, help="per-pixel phases from sequences")
    p.add_argument("--sequences", required=True)
    p.add_argument("--reference", required=True, help="ix,iy,iz")
    p.add_argument("--out-phase", required=True)
    p.add_argument("--out-amplitude", required=True)
    p.add_argument("--out-mask", required=True)

    p = add("compose-lsf", _cmd_compose_lsf, help="|A| with the phase of B")
    p.add_argument("--magnitude", required=True)
    p.add_argument("--phase", required=True)
    p.add_argument("--out", required=True)

    p = add("pipeline", _cmd_pipeline, help="phantom -> PSF -> forward -> restore -> metrics")
    p.add_argument("--config")
    p.add_argument("--phantom")
    p.add_argument("--filter", choices=("wiener", "cls", "gm"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--nsr", default="auto")
    p.add_argument("--snr-db", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--quantize-levels", type=int, default=None)
    p.add_argument("--psf", help="precomputed PSF volume (skips field simulation)")
    p.add_argument("--outdir")
    p.add_argument("--run-id")

    p = add("export-slice", _cmd_export_slice, help="8-bit PGM slice image")
    p.add_argument("--volume", required=True)
    p.add_argument("--plane", choices=("transverse", "axial"), default="transverse")
    p.add_argument("--depth-mm", type=float, default=0.0)
    p.add_argument("--lateral-mm", type=float, default=0.0)
    p.add_argument("--focal-mm", type=float, default=70.0)
    p.add_argument("--out", required=True)

    p = add("export-profile", _cmd_export_profile, help="line profile columns + plot")
    p.add_argument("--volume", required=True)
    p.add_argument("--axis", choices=("x", "z"), default="x")
    p.add_argument("--depth-mm", type=float, default=0.0)
    p.add_argument("--lateral-mm", type=float, default=0.0)
    p.add_argument("--focal-mm", type=float, default=70.0)
    p.add_argument("--out-columns", required=True)
    p.add_argument("--out-plot", required=True)

    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        return _fail(2, "config", str(exc))
    except RefusalError as exc:
        return _fail(3, "refusal", str(exc))
    except ToolkitError as exc:
        return _fail(3, "error", str(exc))


if __name__ == "__main__":
    sys.exit(main())
