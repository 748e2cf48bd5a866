"""Versioned binary checkpoint format ("ADK1").

All integers and floats are little-endian::

    magic        4 bytes  b"ADK1"
    version      u16      currently 1
    kind tag     u8       0 ae_pixel, 1 ae_feature, 2 center_distance, 3 latent_gaussian
    reserved     u8       0
    epoch        u32
    side         u32
    n_hyper      u32
    n_hyper x    u8 name length, ASCII name, u8 type (b"u" -> u64, b"f" -> f64), 8-byte value
    n_blocks     u32
    n_blocks x   u8 name length, ASCII name, u8 ndim, ndim x u32 dims, prod(dims) x f64 (C order)

Hyperparameters are the estimator's constructor arguments sorted by name,
tuples flattened as ``name.0``, ``name.1``, ... Parameter blocks follow each
detector's own documented order (see ``_blocks`` on each class).
"""

from __future__ import annotations

import struct

import numpy as np

from ..exceptions import CheckpointError
from .autoencoder import AutoencoderDetector, FeatureAutoencoderDetector
from .center import CenterDistanceDetector
from .latent import LatentGaussianDetector

MAGIC = b"ADK1"
VERSION = 1
DETECTOR_CLASSES = {
    "ae_pixel": AutoencoderDetector,
    "ae_feature": FeatureAutoencoderDetector,
    "center_distance": CenterDistanceDetector,
    "latent_gaussian": LatentGaussianDetector,
}
KIND_TAGS = {name: i for i, name in enumerate(DETECTOR_CLASSES)}


def _name(s: str) -> bytes:
    b = s.encode("ascii")
    if len(b) > 255:
        raise CheckpointError(f"name too long: {s!r}")
    return struct.pack("<B", len(b)) + b


def _flatten_hyper(params: dict):
    items = []
    for key, value in params.items():
        if isinstance(value, (tuple, list)):
            items.extend((f"{key}.{i}", v) for i, v in enumerate(value))
        else:
            items.append((key, value))
    return sorted(items)


def snapshot(detector) -> bytes:
    """Serialize a fitted detector; identical states give identical bytes."""
    if not hasattr(detector, "epoch_"):
        raise CheckpointError("cannot snapshot an uninitialized detector")
    out = [MAGIC, struct.pack("<HBBII", VERSION, KIND_TAGS[detector.kind], 0, detector.epoch_, detector.side)]
    hyper = _flatten_hyper(detector.get_params(deep=False))
    out.append(struct.pack("<I", len(hyper)))
    for key, value in hyper:
        out.append(_name(key))
        if isinstance(value, (bool, np.bool_)):
            raise CheckpointError(f"unsupported boolean hyperparameter {key!r}")
        if isinstance(value, (int, np.integer)):
            out.append(b"u" + struct.pack("<Q", int(value)))
        else:
            out.append(b"f" + struct.pack("<d", float(value)))
    blocks = detector._blocks()
    out.append(struct.pack("<I", len(blocks)))
    for key, arr in blocks:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        out.append(_name(key))
        out.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def name(self, what: str) -> str:
        (n,) = self.unpack("<B", what)
        return self.take(n, what).decode("ascii")


def read_header(data: bytes) -> dict:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("not an ADK1 checkpoint (bad magic)")
    version, tag, _, epoch, side = r.unpack("<HBBII", "header")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    kinds = list(DETECTOR_CLASSES)
    if tag >= len(kinds):
        raise CheckpointError(f"unknown kind tag {tag}")
    return {"kind": kinds[tag], "epoch": epoch, "side": side, "reader": r}


def restore(data: bytes, kind: str | None = None, side: int | None = None):
    """Rebuild a detector from :func:`snapshot` bytes.

    ``kind`` and ``side``, when given, must match the checkpoint.
    """
    head = read_header(bytes(data))
    r = head.pop("reader")
    if kind is not None and head["kind"] != kind:
        raise CheckpointError(f"kind mismatch: checkpoint holds {head['kind']!r}, expected {kind!r}")
    if side is not None and head["side"] != side:
        raise CheckpointError(
            f"dimension mismatch: checkpoint side {head['side']}, expected {side}"
        )
    (n_hyper,) = r.unpack("<I", "hyperparameter count")
    flat = {}
    for _ in range(n_hyper):
        key = r.name("hyperparameter name")
        typ = r.take(1, "hyperparameter type")
        if typ == b"u":
            (flat[key],) = r.unpack("<Q", key)
        elif typ == b"f":
            (flat[key],) = r.unpack("<d", key)
        else:
            raise CheckpointError(f"unknown hyperparameter type {typ!r} for {key!r}")
    params: dict = {}
    tuples: dict = {}
    for key, value in flat.items():
        base, _, idx = key.partition(".")
        if idx:
            tuples.setdefault(base, {})[int(idx)] = value
        else:
            params[key] = value
    for base, items in tuples.items():
        params[base] = tuple(items[i] for i in range(len(items)))

    cls = DETECTOR_CLASSES[head["kind"]]
    try:
        det = cls(**params)
    except TypeError as exc:
        raise CheckpointError(f"hyperparameters do not match {cls.__name__}: {exc}") from exc
    if int(det.side) != head["side"]:
        raise CheckpointError("dimension mismatch between header side and hyperparameters")

    (n_blocks,) = r.unpack("<I", "block count")
    blocks = {}
    for _ in range(n_blocks):
        key = r.name("block name")
        (ndim,) = r.unpack("<B", key)
        shape = r.unpack(f"<{ndim}I", key)
        count = int(np.prod(shape)) if ndim else 1
        raw = r.take(8 * count, key)
        blocks[key] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(r.data):
        raise CheckpointError(f"{len(r.data) - r.pos} trailing bytes after checkpoint")
    try:
        det._load_blocks(blocks)
    except KeyError as exc:
        raise CheckpointError(f"missing parameter block {exc}") from exc
    first = blocks[det._blocks()[0][0]]
    if first.shape[0] != det.n_inputs:
        raise CheckpointError(
            f"dimension mismatch: first block has {first.shape[0]} inputs, side {det.side} needs {det.n_inputs}"
        )
    det.epoch_ = head["epoch"]
    return det
