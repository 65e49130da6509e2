"""Dataset loaders: MNIST IDX files, feature CSVs and synthetic blobs."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagic, CountMismatch, PpscError, TruncatedFile

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(raw: bytes, magic: int, ndim: int, what: str):
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise TruncatedFile(f"{what}: {len(raw)} bytes is too short for the magic number")
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise BadMagic(f"{what}: magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header:
        raise TruncatedFile(f"{what}: {len(raw)} bytes is shorter than the {header}-byte header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise TruncatedFile(f"{what}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def read_idx_images(path) -> np.ndarray:
    """Raw ``(count, rows, cols)`` uint8 pixels."""
    return _parse_idx(_read_bytes(path), IMAGES_MAGIC, 3, str(path))


def read_idx_labels(path) -> np.ndarray:
    return _parse_idx(_read_bytes(path), LABELS_MAGIC, 1, str(path))


def load_mnist_idx(images_path, labels_path, positive=(0,), limit=None):
    """Flattened pixels scaled to ``[0, 1]`` and binary labels (digit in ``positive``)."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    X = images.reshape(images.shape[0], -1).astype(float) / 255.0
    y = np.isin(labels, list(positive)).astype(np.int64)
    return X, y


def write_idx(path, array: np.ndarray, magic: int) -> None:
    """Write a uint8 array in IDX layout (used to build fixtures)."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def load_csv(path):
    """Features followed by a 0/1 label in the last column; ``#`` starts a comment."""
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise PpscError(f"{path}: {exc}") from exc
    if data.shape[1] < 2:
        raise PpscError(f"{path}: need at least one feature column and a label column")
    X, y = data[:, :-1], data[:, -1]
    if not np.all((y == 0) | (y == 1)):
        raise PpscError(f"{path}: labels must be 0 or 1")
    return X, y.astype(np.int64)


def synthetic_blobs(count: int, m: int, separation: float, rng, spread: float = 1.0):
    """Two Gaussian blobs at ``+/- separation/2`` along a fixed random unit direction.

    The direction is drawn first, so two calls with identically seeded
    streams give the same geometry.
    """
    direction = rng.standard_normal(m)
    direction /= np.linalg.norm(direction)
    y = rng.integers(0, 2, size=count)
    centers = np.where(y[:, None] == 1, 0.5, -0.5) * separation * direction
    X = centers + spread * rng.standard_normal((count, m))
    return X, y
