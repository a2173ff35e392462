"""Binary file formats and atomic output helpers.

Volume format (little-endian throughout):

    offset  size  field
    0       8     magic  b"VAVOLUME"
    8       2     version (u16, currently 1)
    10      2     dtype   (u16: 0 = real32, 1 = complex64)
    12      12    dims    (3 x u32: nx, ny, nz)
    24      24    spacing (3 x f64, meters)
    48      24    origin  (3 x f64, meters)
    72      ...   payload, x-fastest ordering

Sequence-set format:

    0       8     magic  b"VASEQSET"
    8       2     version (u16, currently 1)
    10      2     reserved (u16, 0)
    12      4     n_samples (u32)
    16      8     sample_rate (f64, Hz)
    24      8     diff_freq (f64, Hz)
    32      12    dims (3 x u32)
    44      24    spacing (3 x f64)
    68      24    origin (3 x f64)
    92      ...   payload: f64 samples, pixel x-fastest, samples contiguous

Writes go through a temp file renamed into place, so readers never see a
partial file and a failed run leaves nothing behind.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .phase import SequenceSet
from .volume import ComplexVolume, Grid3D, RealVolume

VOLUME_MAGIC = b"VAVOLUME"
SEQUENCE_MAGIC = b"VASEQSET"
VOLUME_VERSION = 1
SEQUENCE_VERSION = 1

_DTYPE_REAL32 = 0
_DTYPE_COMPLEX64 = 1

_VOL_HEADER = struct.Struct("<8sHH3I3d3d")
_SEQ_HEADER = struct.Struct("<8sHHIdd3I3d3d")

CSV_COLUMNS = (
    "run_id",
    "filter",
    "gamma",
    "alpha",
    "nsr",
    "snr_db",
    "seed",
    "isnr_db",
    "mse",
    "uiqi",
)


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_volume(path, vol: RealVolume | ComplexVolume) -> None:
    """Serialize a volume (real32 or complex64 on disk)."""
    if isinstance(vol, RealVolume):
        dtype_code, dtype = _DTYPE_REAL32, np.dtype("<f4")
    elif isinstance(vol, ComplexVolume):
        dtype_code, dtype = _DTYPE_COMPLEX64, np.dtype("<c8")
    else:
        raise ConfigError(f"cannot serialize {type(vol).__name__} as a volume")
    g = vol.grid
    header = _VOL_HEADER.pack(
        VOLUME_MAGIC, VOLUME_VERSION, dtype_code, *g.dims, *g.spacing, *g.origin
    )
    payload = np.ravel(vol.values.astype(dtype), order="F").tobytes()
    atomic_write_bytes(path, header + payload)


def read_volume(path) -> RealVolume | ComplexVolume:
    data = Path(path).read_bytes()
    if len(data) < _VOL_HEADER.size:
        raise ConfigError(f"{path}: truncated volume header")
    magic, version, dtype_code, nx, ny, nz, dx, dy, dz, ox, oy, oz = _VOL_HEADER.unpack_from(data)
    if magic != VOLUME_MAGIC:
        raise ConfigError(f"{path}: not a volume file (bad magic {magic!r})")
    if version != VOLUME_VERSION:
        raise ConfigError(f"{path}: unsupported volume version {version}")
    grid = Grid3D((nx, ny, nz), (dx, dy, dz), (ox, oy, oz))
    n = grid.n_voxels
    if dtype_code == _DTYPE_REAL32:
        dtype, cls = np.dtype("<f4"), RealVolume
    elif dtype_code == _DTYPE_COMPLEX64:
        dtype, cls = np.dtype("<c8"), ComplexVolume
    else:
        raise ConfigError(f"{path}: unknown dtype code {dtype_code}")
    expected = _VOL_HEADER.size + n * dtype.itemsize
    if len(data) != expected:
        raise ConfigError(f"{path}: payload size {len(data)} != expected {expected}")
    values = np.frombuffer(data, dtype=dtype, offset=_VOL_HEADER.size)
    return cls(grid, values.reshape(grid.dims, order="F"))


def write_sequence_set(path, seqs: SequenceSet) -> None:
    g = seqs.grid
    n_samples = seqs.samples.shape[-1]
    header = _SEQ_HEADER.pack(
        SEQUENCE_MAGIC,
        SEQUENCE_VERSION,
        0,
        n_samples,
        seqs.sample_rate,
        seqs.diff_freq,
        *g.dims,
        *g.spacing,
        *g.origin,
    )
    # pixels x-fastest, each pixel's samples contiguous
    arr = np.ascontiguousarray(
        np.transpose(seqs.samples, (2, 1, 0, 3)).astype("<f8")
    )
    atomic_write_bytes(path, header + arr.tobytes())


def read_sequence_set(path) -> SequenceSet:
    data = Path(path).read_bytes()
    if len(data) < _SEQ_HEADER.size:
        raise ConfigError(f"{path}: truncated sequence header")
    (magic, version, _res, n_samples, fs, df, nx, ny, nz, dx, dy, dz, ox, oy, oz) = (
        _SEQ_HEADER.unpack_from(data)
    )
    if magic != SEQUENCE_MAGIC:
        raise ConfigError(f"{path}: not a sequence file (bad magic {magic!r})")
    if version != SEQUENCE_VERSION:
        raise ConfigError(f"{path}: unsupported sequence version {version}")
    grid = Grid3D((nx, ny, nz), (dx, dy, dz), (ox, oy, oz))
    count = grid.n_voxels * n_samples
    expected = _SEQ_HEADER.size + count * 8
    if len(data) != expected:
        raise ConfigError(f"{path}: payload size {len(data)} != expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=_SEQ_HEADER.size)
    samples = np.transpose(flat.reshape((nz, ny, nx, n_samples)), (2, 1, 0, 3))
    return SequenceSet(grid, samples, fs, df)


def format_csv_row(fields: dict) -> str:
    return ",".join(str(fields.get(c, "")) for c in CSV_COLUMNS)


def append_metrics_row(path, fields: dict) -> None:
    """Append one metrics row, creating the file with a header if needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    line = format_csv_row(fields) + "\n"
    if not path.exists():
        line = ",".join(CSV_COLUMNS) + "\n" + line
    with open(path, "a") as fh:
        fh.write(line)
