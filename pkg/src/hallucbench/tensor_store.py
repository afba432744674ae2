"""Bit-exact float32 tensor container plus JSON Lines manifest helpers.

Embeddings, attention maps, and feature grids move between tools as
``.vhtn`` files: a fixed little-endian header followed by the raw float32
payload in row-major order. Everything non-numeric travels as UTF-8 JSON
Lines, one self-contained record per line.

Container layout (all little-endian)::

    magic "VHTN" (4 bytes) | version u32 | dtype u8 (0 = float32) |
    flags u8 (bit 0 = allow_nonfinite) | 2 pad bytes | ndim u32 |
    dims u32 x ndim | payload float32 row-major
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

MAGIC = b"VHTN"
VERSION = 1
DTYPE_FLOAT32 = 0
FLAG_ALLOW_NONFINITE = 0x01

# magic, version, dtype, flags, pad, pad, ndim
_HEADER = struct.Struct("<4sIBBBBI")

ATTENTION_ROW_SUM_TOL = 1e-4


class TensorFormatError(ValueError):
    """Dims/payload inconsistency or an unsupported dtype."""


class UnsupportedFormatError(TensorFormatError):
    """Magic bytes or container version not recognized."""


class CorruptFileError(TensorFormatError):
    """File is shorter or longer than its header promises."""


class TensorValidationError(ValueError):
    """Tensor values violate a declared invariant."""


@dataclass(frozen=True)
class TensorFile:
    """A validated float32 tensor: shape plus a C-contiguous value array."""

    dims: tuple[int, ...]
    values: np.ndarray
    allow_nonfinite: bool = False

    def __post_init__(self) -> None:
        if not self.dims:
            raise TensorFormatError("dims must be nonempty")
        if any(d <= 0 for d in self.dims):
            raise TensorFormatError(f"dims must be positive, got {self.dims}")
        if self.values.dtype != np.float32:
            raise TensorFormatError(
                f"only float32 payloads are supported, got {self.values.dtype}; "
                "cast explicitly with .astype(np.float32) if that is intended"
            )
        if self.values.shape != self.dims:
            raise TensorFormatError(
                f"payload shape {self.values.shape} does not match dims {self.dims}"
            )
        if not self.allow_nonfinite and not np.isfinite(self.values).all():
            raise TensorValidationError(
                "non-finite values present and allow_nonfinite is not set"
            )
        object.__setattr__(self, "values", np.ascontiguousarray(self.values))

    @classmethod
    def from_array(cls, array: np.ndarray, allow_nonfinite: bool = False) -> "TensorFile":
        arr = np.asarray(array)
        if arr.dtype != np.float32:
            raise TensorFormatError(
                f"only float32 payloads are supported, got {arr.dtype}; "
                "cast explicitly with .astype(np.float32) if that is intended"
            )
        return cls(dims=tuple(arr.shape), values=arr, allow_nonfinite=allow_nonfinite)

    @property
    def size(self) -> int:
        return int(math.prod(self.dims))


def write_tensor(path: str | Path, tensor: TensorFile) -> None:
    """Serialize ``tensor`` to ``path``; round-trips bit-identically."""
    flags = FLAG_ALLOW_NONFINITE if tensor.allow_nonfinite else 0
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, flags, 0, 0, len(tensor.dims))
    dims = struct.pack(f"<{len(tensor.dims)}I", *tensor.dims)
    payload = np.ascontiguousarray(tensor.values, dtype="<f4").tobytes()
    path = Path(path)
    try:
        path.write_bytes(header + dims + payload)
    except OSError as exc:
        raise OSError(f"failed to write tensor file {path}: {exc}") from exc


def read_tensor(path: str | Path) -> TensorFile:
    """Read and validate a ``.vhtn`` file written by :func:`write_tensor`."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CorruptFileError(f"{path}: file shorter than the fixed header")
    magic, version, dtype, flags, _, _, ndim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise UnsupportedFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedFormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise TensorFormatError(f"{path}: unsupported dtype code {dtype} (only 0 = float32)")
    dims_end = _HEADER.size + 4 * ndim
    if ndim == 0 or len(raw) < dims_end:
        raise CorruptFileError(f"{path}: truncated dims block (ndim={ndim})")
    dims = struct.unpack_from(f"<{ndim}I", raw, _HEADER.size)
    if any(d == 0 for d in dims):
        raise CorruptFileError(f"{path}: zero extent in dims {dims}")
    expected = dims_end + 4 * math.prod(dims)
    if len(raw) != expected:
        raise CorruptFileError(
            f"{path}: payload length mismatch, expected {expected} bytes got {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=dims_end).reshape(dims).copy()
    allow_nonfinite = bool(flags & FLAG_ALLOW_NONFINITE)
    if not allow_nonfinite and not np.isfinite(values).all():
        raise TensorValidationError(
            f"{path}: non-finite values present without the allow_nonfinite flag"
        )
    return TensorFile(dims=tuple(dims), values=values, allow_nonfinite=allow_nonfinite)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Per-frame embeddings, one row per frame. Rows must be nonzero."""

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise TensorValidationError(
                f"embedding matrix must be 2-D (frames x dim), got shape {self.values.shape}"
            )
        t, d = self.values.shape
        if t < 1 or d < 1:
            raise TensorValidationError(f"degenerate embedding shape {self.values.shape}")
        norms = np.linalg.norm(np.asarray(self.values, dtype=np.float64), axis=1)
        zero_rows = np.flatnonzero(norms == 0.0)
        if zero_rows.size:
            raise TensorValidationError(
                f"all-zero embedding row(s) at frame index {zero_rows.tolist()}"
            )

    @property
    def frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def from_tensor(cls, tensor: TensorFile) -> "EmbeddingMatrix":
        return cls(values=tensor.values)

    def to_tensor(self) -> TensorFile:
        return TensorFile.from_array(np.asarray(self.values, dtype=np.float32))


@dataclass(frozen=True)
class AttentionTensor:
    """Final-layer self-attention, shape (heads, seq, seq); token 0 is [CLS].

    Construction checks structure only; softmax-row invariants are reported
    by :func:`validate_attention` so callers can gate on them explicitly.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise TensorValidationError(
                f"attention tensor must be 3-D (heads x seq x seq), got {self.values.shape}"
            )
        h, l1, l2 = self.values.shape
        if h < 1:
            raise TensorValidationError("attention tensor needs at least one head")
        if l1 != l2:
            raise TensorValidationError(f"attention maps must be square, got {l1}x{l2}")
        if l1 < 2:
            raise TensorValidationError("sequence length must be >= 2 ([CLS] + spatial)")

    @property
    def heads(self) -> int:
        return int(self.values.shape[0])

    @property
    def seq_len(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def from_tensor(cls, tensor: TensorFile) -> "AttentionTensor":
        return cls(values=tensor.values)

    def to_tensor(self) -> TensorFile:
        return TensorFile.from_array(np.asarray(self.values, dtype=np.float32))


@dataclass(frozen=True)
class FeatureGrid:
    """Spatial feature map, shape (height, width, channels)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise TensorValidationError(
                f"feature grid must be 3-D (height x width x channels), got {self.values.shape}"
            )
        if any(d < 1 for d in self.values.shape):
            raise TensorValidationError(f"degenerate feature grid shape {self.values.shape}")

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def channels(self) -> int:
        return int(self.values.shape[2])

    @classmethod
    def from_tensor(cls, tensor: TensorFile) -> "FeatureGrid":
        return cls(values=tensor.values)

    def to_tensor(self) -> TensorFile:
        return TensorFile.from_array(np.asarray(self.values, dtype=np.float32))


def validate_attention(attention: AttentionTensor, tol: float = ATTENTION_ROW_SUM_TOL) -> list[str]:
    """Report softmax-row violations; empty list means the tensor is clean.

    A row is clean when it sums to 1 within ``tol`` and every entry lies in
    [0, 1]. Reports rather than raising so callers can decide severity.
    """
    violations: list[str] = []
    vals = np.asarray(attention.values, dtype=np.float64)
    sums = vals.sum(axis=2)
    for head, row in zip(*np.nonzero(np.abs(sums - 1.0) > tol)):
        violations.append(
            f"head {head} row {row}: sum {sums[head, row]:.6f} "
            f"deviates from 1 by {abs(sums[head, row] - 1.0):.3e}"
        )
    for head, row, col in zip(*np.nonzero((vals < 0.0) | (vals > 1.0))):
        violations.append(
            f"head {head} row {row} col {col}: value {vals[head, row, col]:.6g} outside [0, 1]"
        )
    return violations


def dumps_record(record: dict) -> str:
    """Canonical one-line JSON used for every manifest record."""
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    lines = [dumps_record(rec) for rec in records]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{i + 1}: invalid JSON line: {exc}") from exc
    return records
