"""File formats: binary trial sessions, parameter checkpoints, config, CSV.

All binary formats are little-endian and bit-exact: writing and re-reading
a session file reproduces it byte for byte. Trial samples are stored as
f32 (microvolt dynamic range fits in 7 significant digits); every on-disk
write goes through a temp-file-then-rename so interrupted commands never
leave partial files.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .codes import N_CLASSES
from .data import FS, Trial

TRIAL_MAGIC = b"CVEP"
TRIAL_VERSION = 1
CHECKPOINT_MAGIC = b"CVNP"
CHECKPOINT_VERSION = 1

_TRIAL_HEADER = struct.Struct("<4sHHIfIH")
_TRIAL_META = struct.Struct("<HH")
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}


def _atomic_write(path: str, data: bytes):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path: str, text: str):
    """Write UTF-8 text through a temp file and rename."""
    _atomic_write(path, text.encode("utf-8"))


def atomic_write_bytes(path: str, data: bytes):
    """Write raw bytes through a temp file and rename."""
    _atomic_write(path, data)


def write_session_file(path: str, trials: list[Trial], fs: float = FS):
    """Serialize one session's trials to the binary trial format.

    Layout: a 22-byte header (magic, version, channels, samples, sampling
    rate, trial count, class count) followed by each trial as row-major
    f32 samples plus u16 label and u16 session id.
    """
    if not trials:
        raise ValueError("cannot write an empty session file")
    ch, ns = trials[0].data.shape
    parts = [_TRIAL_HEADER.pack(TRIAL_MAGIC, TRIAL_VERSION, ch, ns,
                                float(fs), len(trials), N_CLASSES)]
    for t in trials:
        if t.data.shape != (ch, ns):
            raise ValueError("all trials in a session file must share a shape")
        parts.append(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
        parts.append(_TRIAL_META.pack(t.label, t.session_id))
    _atomic_write(path, b"".join(parts))


def read_session_file(path: str) -> tuple[list[Trial], float]:
    """Read a binary trial file; returns (trials, sampling rate).

    Raises
    ------
    ValueError
        On a wrong magic, unsupported version, truncated payload, or a
        label outside the declared class count.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _TRIAL_HEADER.size:
        raise ValueError(f"{path}: too short for a trial file header")
    magic, version, ch, ns, fs, count, classes = _TRIAL_HEADER.unpack_from(blob)
    if magic != TRIAL_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != TRIAL_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    stride = ch * ns * 4 + _TRIAL_META.size
    expected = _TRIAL_HEADER.size + count * stride
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    trials = []
    off = _TRIAL_HEADER.size
    for _ in range(count):
        data = np.frombuffer(blob, dtype="<f4", count=ch * ns, offset=off)
        label, session_id = _TRIAL_META.unpack_from(blob, off + ch * ns * 4)
        if label >= classes:
            raise ValueError(f"{path}: label {label} outside {classes} classes")
        trials.append(Trial(data=data.reshape(ch, ns).astype(np.float64),
                            label=int(label), session_id=int(session_id)))
        off += stride
    return trials, float(fs)


def save_checkpoint(path: str, tensors: dict[str, np.ndarray]):
    """Store named f32/f64/i64 arrays; shapes and names round-trip exactly."""
    parts = [CHECKPOINT_MAGIC,
             struct.pack("<HI", CHECKPOINT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype == np.float32:
            code = 0
        elif arr.dtype == np.float64:
            code = 1
        elif arr.dtype == np.int64:
            code = 2
        else:
            raise ValueError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BH", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes())
    _atomic_write(path, b"".join(parts))


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    version, count = struct.unpack_from("<HI", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 10
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        code, ndim = struct.unpack_from("<BH", blob, off)
        off += 3
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        dtype = _DTYPE_CODES[code]
        n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(blob, dtype=dtype, count=n, offset=off)
        off += n * dtype.itemsize
        out[name] = arr.reshape(shape).copy()
    if off != len(blob):
        raise ValueError(f"{path}: {len(blob) - off} trailing bytes")
    return out


AUG_CHOICES = ("NA", "TA", "TC", "TATC")


@dataclass
class RunConfig:
    """Experiment configuration from a key-value file and CLI flags.

    Fields
    ------
    seed : master seed for simulation and training.
    noise_sd, jitter_sd : forward-model noise level and latency jitter.
    trials_per_class : per-session trials per class.
    subjects : synthetic cohort size.
    aug : augmentation strategy spelling (NA, TA, TC, TATC).
    alpha : shift magnitude in samples (1, 2, 4, 8).
    methods : method names to evaluate.
    radius : transport band radius; mandatory for constrained EMD.
    out : output directory.
    """

    seed: int = 0
    noise_sd: float = 5.0
    jitter_sd: float = 0.0
    trials_per_class: int = 114
    subjects: int = 13
    aug: str = "NA"
    alpha: int = 1
    methods: tuple[str, ...] = ()
    radius: int | None = None
    out: str = "results"


def _parse_int(v, minimum=None, allowed=None):
    n = int(v)
    if minimum is not None and n < minimum:
        raise ValueError(f"must be >= {minimum}")
    if allowed is not None and n not in allowed:
        raise ValueError(f"must be one of {sorted(allowed)}")
    return n


def _parse_float(v, minimum=0.0):
    x = float(v)
    if x < minimum:
        raise ValueError(f"must be >= {minimum}")
    return x


_CONFIG_PARSERS = {
    "seed": lambda v: _parse_int(v, minimum=0),
    "noise_sd": _parse_float,
    "jitter_sd": _parse_float,
    "trials_per_class": lambda v: _parse_int(v, minimum=1),
    "subjects": lambda v: _parse_int(v, minimum=1),
    "aug": lambda v: v if v in AUG_CHOICES else (_ for _ in ()).throw(
        ValueError(f"must be one of {AUG_CHOICES}")),
    "alpha": lambda v: _parse_int(v, allowed={1, 2, 4, 8}),
    "methods": lambda v: tuple(m.strip() for m in v.split(",") if m.strip()),
    "radius": lambda v: _parse_int(v, minimum=0),
    "out": str,
}


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; # starts a comment, unknown keys fail.

    Raises
    ------
    ValueError
        Naming the offending line for unknown keys, duplicate keys,
        malformed lines, and invalid values.
    """
    cfg = RunConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_PARSERS:
            raise ValueError(
                f"{source}:{lineno}: unknown key {key!r}; known keys: "
                f"{', '.join(sorted(_CONFIG_PARSERS))}")
        if key in seen:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            setattr(cfg, key, _CONFIG_PARSERS[key](value))
        except ValueError as err:
            raise ValueError(f"{source}:{lineno}: bad value for {key!r}: {err}")
    return cfg


def parse_config_file(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


def write_csv(path: str, header: list[str], rows: list[list[str]]):
    """Write a UTF-8 CSV with a header row, atomically."""
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    """Read a CSV written by :func:`write_csv`.

    Raises
    ------
    ValueError
        Naming the line number of any row whose column count differs from
        the header's.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}:1: empty CSV")
    header = lines[0].split(",")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        row = line.split(",")
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} "
                             f"columns, got {len(row)}")
        rows.append(row)
    return header, rows


def fmt(x: float, decimals: int = 4) -> str:
    """Fixed-decimal cell formatting (4 places; ranks use 2)."""
    return f"{x:.{decimals}f}"
