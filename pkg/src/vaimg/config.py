"""Run configuration: a line-oriented key = value file with [section]
headers, validated exhaustively before any computation starts.

Example::

    [grid]
    preset = desk            ; or paper, or explicit nx/ny/nz/dx_mm/...

    [transducer]
    inner_radius_mm = 14.8
    ring_inner_radius_mm = 15.2
    ring_outer_radius_mm = 22
    focal_distance_mm = 70
    freq_inner_mhz = 3.075
    freq_outer_mhz = 3.125

    [phantom]
    builtin = phantom1       ; or sphere1 = x_mm,y_mm,z_mm,radius_mm,contrast_db

    [noise]
    snr_db = 20
    seed = 7

    [filter]
    kind = wiener
    nsr = auto               ; 10**(-snr_db/10)

Unknown sections or keys are rejected outright.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .errors import ConfigError, RefusalError
from .field import Medium, TransducerSpec
from .forward import NoiseSpec
from .phantoms import (
    DESK_GRID,
    PAPER_GRID,
    PhantomSpec,
    SphereInclusion,
    WireSpec,
    builtin_phantom,
)
from .restore import FILTER_KINDS, FilterParams
from .volume import Grid3D

_GRID_KEYS = {
    "preset", "nx", "ny", "nz", "dx_mm", "dy_mm", "dz_mm",
    "origin_x_mm", "origin_y_mm", "origin_z_mm",
}
_TRANSDUCER_KEYS = {
    "inner_radius_mm", "ring_inner_radius_mm", "ring_outer_radius_mm",
    "focal_distance_mm", "freq_inner_mhz", "freq_outer_mhz",
}
_MEDIUM_KEYS = {"sound_speed_m_s", "density_kg_m3"}
_NOISE_KEYS = {"snr_db", "seed"}
_FILTER_KEYS = {"kind", "gamma", "alpha", "nsr", "conv_mode"}
_METRICS_KEYS = {"window", "mode", "quantize_levels"}
_FIELD_KEYS = {"patch_target_mm", "method"}
_OUTPUT_KEYS = {"directory", "run_id"}

_SECTIONS = {
    "grid": _GRID_KEYS,
    "transducer": _TRANSDUCER_KEYS,
    "medium": _MEDIUM_KEYS,
    "phantom": None,  # validated separately (sphereN / wireN keys)
    "noise": _NOISE_KEYS,
    "filter": _FILTER_KEYS,
    "metrics": _METRICS_KEYS,
    "field": _FIELD_KEYS,
    "output": _OUTPUT_KEYS,
}


@dataclass
class MetricOptions:
    window: int = 8
    mode: str = "2d"
    quantize_levels: int | None = 256

    def __post_init__(self):
        if self.window < 2:
            raise ConfigError("metrics window must be >= 2")
        if self.mode not in ("2d", "3d"):
            raise ConfigError(f"metrics mode must be 2d or 3d, not {self.mode!r}")
        if self.quantize_levels is not None and self.quantize_levels < 2:
            raise ConfigError("metrics quantize_levels must be >= 2 (or 0 to disable)")


@dataclass
class RunConfig:
    """Everything a pipeline run needs, schema-validated up front."""

    grid: Grid3D = DESK_GRID
    transducer: TransducerSpec = dc_field(default_factory=TransducerSpec)
    medium: Medium = dc_field(default_factory=Medium)
    phantom: PhantomSpec | None = None
    phantom_name: str | None = "phantom1"
    noise: NoiseSpec = dc_field(default_factory=NoiseSpec)
    filter_params: FilterParams = dc_field(
        default_factory=lambda: FilterParams("wiener")
    )
    metrics: MetricOptions = dc_field(default_factory=MetricOptions)
    # the reproduced simulation experiments need the forward model and the
    # deconvolution on one self-consistent transform grid; see README
    conv_mode: str = "circular"
    patch_target: float | None = None  # None -> quarter wavelength
    field_method: str = "auto"
    output_dir: Path = Path("vaimg-out")
    run_id: str = "run"

    def resolve_phantom(self) -> PhantomSpec:
        if self.phantom is not None:
            return self.phantom
        if self.phantom_name is None:
            raise ConfigError("no phantom configured")
        return builtin_phantom(self.phantom_name, grid=self.grid)

    def resolved_nsr(self) -> float:
        """The SNR-derived default when no explicit ratio is given."""
        nsr = self.filter_params.noise_to_signal
        if nsr is not None:
            return nsr
        if math.isinf(self.noise.snr_db):
            return 0.0
        return 10.0 ** (-self.noise.snr_db / 10.0)


def _get_float(sec, key, default=None):
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r} is not a number") from None


def _get_int(sec, key, default=None):
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r} is not an integer") from None


def _parse_grid(sec) -> Grid3D:
    preset = sec.get("preset")
    if preset is not None:
        if preset == "desk":
            return DESK_GRID
        if preset == "paper":
            return PAPER_GRID
        raise ConfigError(f"[grid] preset must be desk or paper, not {preset!r}")
    try:
        dims = (_get_int(sec, "nx"), _get_int(sec, "ny"), _get_int(sec, "nz"))
        spacing = tuple(_get_float(sec, k) * 1e-3 for k in ("dx_mm", "dy_mm", "dz_mm"))
        origin = tuple(
            _get_float(sec, k, 0.0) * 1e-3
            for k in ("origin_x_mm", "origin_y_mm", "origin_z_mm")
        )
        if any(v is None for v in dims) or any(v is None for v in spacing):
            raise ConfigError("[grid] needs preset or all of nx..nz and dx_mm..dz_mm")
        return Grid3D(dims, spacing, origin)
    except RefusalError as exc:
        raise ConfigError(f"[grid] {exc}") from None


def _parse_phantom(sec, grid: Grid3D):
    """Returns (builtin_name, PhantomSpec-or-None)."""
    builtin = None
    spheres, wires = [], []
    background = 0.0
    dynamic_range = 48.0
    for key, raw in sec.items():
        if key == "builtin":
            builtin = raw
        elif key == "background":
            background = _get_float(sec, key)
        elif key == "dynamic_range_db":
            dynamic_range = _get_float(sec, key)
        elif key.startswith("sphere"):
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 5:
                raise ConfigError(
                    f"[phantom] {key} needs x_mm,y_mm,z_mm,radius_mm,contrast_db"
                )
            x, y, z, r, c = (float(p) for p in parts)
            spheres.append(SphereInclusion((x * 1e-3, y * 1e-3, z * 1e-3), r * 1e-3, c))
        elif key.startswith("wire"):
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 7:
                raise ConfigError(
                    f"[phantom] {key} needs diameter_mm,px_mm,py_mm,pz_mm,dx,dy,dz"
                )
            d, px, py, pz, ux, uy, uz = (float(p) for p in parts)
            wires.append(
                WireSpec(d * 1e-3, (px * 1e-3, py * 1e-3, pz * 1e-3), (ux, uy, uz))
            )
        else:
            raise ConfigError(f"[phantom] unknown key {key!r}")
    if builtin is not None:
        if spheres or wires:
            raise ConfigError("[phantom] builtin excludes explicit spheres/wires")
        return builtin, None
    if not spheres and not wires:
        raise ConfigError("[phantom] needs builtin or at least one sphere/wire")
    try:
        spec = PhantomSpec(
            grid=grid,
            dynamic_range=dynamic_range,
            spheres=spheres,
            wires=wires,
            background=background,
        )
    except RefusalError as exc:
        raise ConfigError(f"[phantom] {exc}") from None
    return None, spec


def _parse_filter(sec) -> FilterParams:
    kind = sec.get("kind")
    if kind not in FILTER_KINDS:
        raise ConfigError(f"[filter] kind must be one of {FILTER_KINDS}, got {kind!r}")
    nsr_raw = sec.get("nsr", "auto")
    nsr = None if nsr_raw == "auto" else float(nsr_raw)
    try:
        return FilterParams(
            kind=kind,
            gamma=_get_float(sec, "gamma"),
            alpha=_get_float(sec, "alpha"),
            noise_to_signal=nsr,
        )
    except RefusalError as exc:
        raise ConfigError(f"[filter] {exc}") from None


def load_config(path) -> RunConfig:
    """Parse and fully validate a run configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        allowed = _SECTIONS[section]
        if allowed is not None:
            for key in parser[section]:
                if key not in allowed:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")

    cfg = RunConfig()
    if parser.has_section("grid"):
        cfg.grid = _parse_grid(parser["grid"])
    if parser.has_section("transducer"):
        sec = parser["transducer"]
        try:
            cfg.transducer = TransducerSpec(
                inner_radius=_get_float(sec, "inner_radius_mm", 14.8) * 1e-3,
                ring_inner_radius=_get_float(sec, "ring_inner_radius_mm", 15.2) * 1e-3,
                ring_outer_radius=_get_float(sec, "ring_outer_radius_mm", 22.0) * 1e-3,
                focal_distance=_get_float(sec, "focal_distance_mm", 70.0) * 1e-3,
                freq_inner=_get_float(sec, "freq_inner_mhz", 3.075) * 1e6,
                freq_outer=_get_float(sec, "freq_outer_mhz", 3.125) * 1e6,
            )
        except RefusalError as exc:
            raise ConfigError(f"[transducer] {exc}") from None
    if parser.has_section("medium"):
        sec = parser["medium"]
        try:
            cfg.medium = Medium(
                sound_speed=_get_float(sec, "sound_speed_m_s", 1500.0),
                density=_get_float(sec, "density_kg_m3", 1000.0),
            )
        except RefusalError as exc:
            raise ConfigError(f"[medium] {exc}") from None
    if parser.has_section("phantom"):
        cfg.phantom_name, cfg.phantom = _parse_phantom(parser["phantom"], cfg.grid)
    if parser.has_section("noise"):
        sec = parser["noise"]
        snr_raw = sec.get("snr_db", "20")
        snr = math.inf if snr_raw in ("inf", "+inf") else float(snr_raw)
        cfg.noise = NoiseSpec(snr_db=snr, seed=_get_int(sec, "seed", 0))
    if parser.has_section("filter"):
        cfg.filter_params = _parse_filter(parser["filter"])
        cmode = parser["filter"].get("conv_mode", "circular")
        if cmode not in ("linear", "circular"):
            raise ConfigError(f"[filter] conv_mode must be linear or circular, not {cmode!r}")
        cfg.conv_mode = cmode
    if parser.has_section("metrics"):
        sec = parser["metrics"]
        levels = _get_int(sec, "quantize_levels", 256)
        cfg.metrics = MetricOptions(
            window=_get_int(sec, "window", 8),
            mode=sec.get("mode", "2d"),
            quantize_levels=None if levels == 0 else levels,
        )
    if parser.has_section("field"):
        sec = parser["field"]
        pt = sec.get("patch_target_mm", "auto")
        cfg.patch_target = None if pt == "auto" else float(pt) * 1e-3
        method = sec.get("method", "auto")
        if method not in ("auto", "direct", "spectral"):
            raise ConfigError(f"[field] method must be auto/direct/spectral, not {method!r}")
        cfg.field_method = method
    if parser.has_section("output"):
        sec = parser["output"]
        cfg.output_dir = Path(sec.get("directory", "vaimg-out"))
        cfg.run_id = sec.get("run_id", "run")
    return cfg
