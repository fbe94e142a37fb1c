"""Binary dataset container, IDX loading, validation splits, shuffling.

Container layout (all integers little-endian):

    magic   4 bytes  b"CND1"
    version u32      currently 1
    records          one or more tensor records

    record: dtype u32 (0=u8, 1=f32, 2=f64) | ndim u32 | dims u32 each
            | payload, prod(dims) * itemsize bytes, row-major

A dataset file holds exactly two records: images (N, 3, 32, 32) as u8
(raw pixels) or f64 (preprocessed), then labels (N,) as u8 in [0, 9].
The format is fixed-width and bit-exact so other tooling can produce and
consume it without this library.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CND1"
VERSION = 1

_DTYPES = {0: np.dtype("u1"), 1: np.dtype("<f4"), 2: np.dtype("<f8")}


class FormatError(Exception):
    """A file does not conform to its declared binary format."""


def _read_exact(f, n: int, what: str) -> bytes:
    offset = f.tell()
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(
            f"truncated file reading {what} at byte {offset}: "
            f"expected {n} bytes, got {len(buf)}")
    return buf


def _dtype_code(dtype: np.dtype) -> int:
    for code, dt in _DTYPES.items():
        if dtype.kind == dt.kind and dtype.itemsize == dt.itemsize:
            return code
    raise ValueError(f"unsupported dtype {dtype}; use u8, f32 or f64")


def write_record(f, arr: np.ndarray) -> None:
    """Append one tensor record to an open binary stream."""
    arr = np.ascontiguousarray(arr)
    code = _dtype_code(arr.dtype)
    f.write(struct.pack("<II", code, arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(arr.astype(_DTYPES[code], copy=False).tobytes())


def read_record(f) -> np.ndarray:
    """Read one tensor record from an open binary stream."""
    offset = f.tell()
    code, ndim = struct.unpack("<II", _read_exact(f, 8, "record header"))
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code} at byte {offset}")
    if ndim == 0 or ndim > 8:
        raise FormatError(f"implausible ndim {ndim} at byte {offset}")
    dims = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, "record dims"))
    if any(d == 0 for d in dims):
        raise FormatError(f"zero extent in dims {dims} at byte {offset}")
    dtype = _DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64))
    payload = _read_exact(f, count * dtype.itemsize, f"payload for dims {dims}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def _open_checked(path) -> tuple[object, int]:
    f = open(path, "rb")
    magic = f.read(4)
    if magic != MAGIC:
        f.close()
        raise FormatError(f"bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    version = struct.unpack("<I", _read_exact(f, 4, "version"))[0]
    if version != VERSION:
        f.close()
        raise FormatError(f"unsupported container version {version} at byte 4")
    return f, version


def write_container(path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write an images+labels dataset file; read_container inverts it bit-exactly."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.ndim != 4 or images.shape[1:] != (3, 32, 32):
        raise ValueError(f"images must be (N, 3, 32, 32), got {images.shape}")
    if labels.shape != (images.shape[0],):
        raise ValueError(
            f"labels shape {labels.shape} does not match {images.shape[0]} images")
    if labels.dtype != np.uint8:
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
        labels = labels.astype(np.uint8)
    if labels.size and labels.max() > 9:
        raise ValueError(f"labels must lie in [0, 9], found {labels.max()}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        write_record(f, images)
        write_record(f, labels)


def read_container(path) -> tuple[np.ndarray, np.ndarray]:
    """Read and validate an images+labels dataset file."""
    f, _ = _open_checked(path)
    with f:
        images = read_record(f)
        labels = read_record(f)
        trailing = f.read(1)
        if trailing:
            raise FormatError(f"unexpected trailing bytes at byte {f.tell() - 1}")
    if images.ndim != 4 or images.shape[1:] != (3, 32, 32):
        raise FormatError(f"images record has shape {images.shape}, expected (N, 3, 32, 32)")
    if labels.ndim != 1 or labels.dtype != np.uint8:
        raise FormatError(
            f"labels record must be 1-d u8, got shape {labels.shape} dtype {labels.dtype}")
    if labels.shape[0] != images.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and labels.max() > 9:
        raise FormatError(f"labels must lie in [0, 9], found {int(labels.max())}")
    return images, labels


# --- IDX (big-endian header, as distributed for classic digit sets) ---

_IDX_DTYPES = {0x08: np.dtype("u1"), 0x09: np.dtype("i1"), 0x0B: np.dtype(">i2"),
               0x0C: np.dtype(">i4"), 0x0D: np.dtype(">f4"), 0x0E: np.dtype(">f8")}


def read_idx(path) -> np.ndarray:
    """Parse an IDX file (0x00000803 images, 0x00000801 labels, etc.)."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"truncated IDX file: {len(raw)} bytes")
    zero, one, code, ndim = struct.unpack(">4B", raw[:4])
    if zero != 0 or one != 0 or code not in _IDX_DTYPES:
        raise FormatError(f"unknown IDX magic {raw[:4].hex()} at byte 0")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"truncated IDX header: need {header} bytes, got {len(raw)}")
    dims = struct.unpack(f">{ndim}i", raw[4:header])
    if any(d <= 0 for d in dims):
        raise FormatError(f"non-positive IDX extent in {dims}")
    dtype = _IDX_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64))
    expected = header + count * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"IDX payload mismatch at byte {header}: expected {expected - header} "
            f"bytes for dims {dims}, got {len(raw) - header}")
    return np.frombuffer(raw, dtype=dtype, offset=header).reshape(dims).copy()


def write_idx(path, arr: np.ndarray) -> None:
    """Write a u8 array in IDX layout (fixture and export helper)."""
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">4B", 0, 0, 0x08, arr.ndim))
        f.write(struct.pack(f">{arr.ndim}i", *arr.shape))
        f.write(arr.tobytes())


def grayscale_to_rgb32(images: np.ndarray) -> np.ndarray:
    """Center H x W u8 grayscale images on a 32 x 32 canvas, replicated to RGB."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise ValueError(f"expected (N, H, W) grayscale images, got {images.shape}")
    n, h, w = images.shape
    if h > 32 or w > 32:
        raise ValueError(f"images {h}x{w} exceed the 32x32 canvas")
    top, left = (32 - h) // 2, (32 - w) // 2
    canvas = np.zeros((n, 32, 32), dtype=np.uint8)
    canvas[:, top:top + h, left:left + w] = images
    return np.repeat(canvas[:, None, :, :], 3, axis=1)


# --- validation split ---

@dataclass(frozen=True)
class SplitSpec:
    per_class_from_train: int = 400
    per_class_from_extra: int = 200
    seed: int = 0
    n_classes: int = 10


@dataclass(frozen=True)
class ValidationSplit:
    """Index sets into the two source label arrays; disjoint and exhaustive."""

    val_train: np.ndarray
    val_extra: np.ndarray
    rest_train: np.ndarray
    rest_extra: np.ndarray


def _draw_per_class(labels: np.ndarray, per_class: int, n_classes: int,
                    rng: np.random.Generator, source: str) -> np.ndarray:
    picks = []
    for cls in range(n_classes):
        idx = np.flatnonzero(labels == cls)
        if idx.size < per_class:
            raise ValueError(
                f"class {cls} has only {idx.size} {source} samples, need {per_class}")
        picks.append(rng.choice(idx, size=per_class, replace=False))
    return np.sort(np.concatenate(picks))


def build_validation_split(train_labels: np.ndarray, extra_labels: np.ndarray,
                           spec: SplitSpec) -> ValidationSplit:
    """Seeded per-class draw of validation indices from two sources.

    Picks `per_class_from_train` indices per class from the first array
    and `per_class_from_extra` from the second; the remaining indices of
    each source are returned alongside, so the three sets partition both
    inputs exactly.
    """
    train_labels = np.asarray(train_labels)
    extra_labels = np.asarray(extra_labels)
    rng = np.random.default_rng(spec.seed)
    val_train = _draw_per_class(train_labels, spec.per_class_from_train,
                                spec.n_classes, rng, "train")
    val_extra = _draw_per_class(extra_labels, spec.per_class_from_extra,
                                spec.n_classes, rng, "extra")
    rest_train = np.setdiff1d(np.arange(train_labels.size), val_train)
    rest_extra = np.setdiff1d(np.arange(extra_labels.size), val_extra)
    return ValidationSplit(val_train, val_extra, rest_train, rest_extra)


def shuffle_epoch(n: int, seed: int, epoch: int) -> np.ndarray:
    """Deterministic permutation of [0, n) that differs across epochs."""
    if n < 1:
        raise ValueError(f"dataset size must be >= 1, got {n}")
    return np.random.default_rng([seed, epoch]).permutation(n)
