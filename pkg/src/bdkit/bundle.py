"""Binary serialization of the seven trained category MLPs.

Layout (all integers little-endian uint32, floats little-endian float64):

    magic "BDCI" | format version | metadata length | metadata JSON (UTF-8)
    category count | per category:
        name length | name UTF-8 | dim count | layer dims
        per layer: weight matrix (row-major) then bias vector
    SHA-256 checksum of everything before it (32 bytes)

Round trips are bit-exact.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .categories import CATEGORY_ORDER, SegmentCategory
from .errors import BadMagic, ChecksumMismatch, MissingCategory, VersionUnsupported
from .nn import DEFAULT_LOG_SIGMA_CLAMP, MLP

MAGIC = b"BDCI"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelBundle:
    models: Dict[SegmentCategory, MLP]
    metadata: dict
    content_hash: str  # hex SHA-256 of the serialized bytes

    def model_for(self, category: SegmentCategory) -> MLP:
        return self.models[category]


def _u32(value: int) -> bytes:
    return struct.pack("<I", value)


def save_bundle(models: Dict[SegmentCategory, MLP], metadata: dict) -> bytes:
    """Serialize category models plus metadata; see the module docstring."""
    parts = [MAGIC, _u32(FORMAT_VERSION)]
    scales = {
        c.value: models[c].sigma_scale
        for c in CATEGORY_ORDER
        if c in models and models[c].sigma_scale != 1.0
    }
    if scales:
        metadata = dict(metadata)
        metadata["sigma_scales"] = scales
    meta_blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
    parts.append(_u32(len(meta_blob)))
    parts.append(meta_blob)
    present = [c for c in CATEGORY_ORDER if c in models]
    parts.append(_u32(len(present)))
    for category in present:
        model = models[category]
        name = category.value.encode("utf-8")
        parts.append(_u32(len(name)))
        parts.append(name)
        dims = model.layer_dims
        parts.append(_u32(len(dims)))
        parts.extend(_u32(d) for d in dims)
        for w, b in zip(model.weights, model.biases):
            parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ChecksumMismatch("bundle truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64_array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        raw = self.take(count * 8)
        return np.frombuffer(raw, dtype="<f8").astype(float).reshape(shape)


def load_bundle(data: bytes) -> ModelBundle:
    """Parse bundle bytes; raises BadMagic / VersionUnsupported /
    ChecksumMismatch / MissingCategory."""
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagic("not a BDCI model bundle")
    if len(data) < len(MAGIC) + 4 + 32:
        raise ChecksumMismatch("bundle truncated")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumMismatch("bundle checksum does not match")

    r = _Reader(body)
    r.take(len(MAGIC))
    version = r.u32()
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"bundle format version {version}")
    meta_len = r.u32()
    metadata = json.loads(r.take(meta_len).decode("utf-8"))
    clamp = tuple(metadata.get("log_sigma_clamp", DEFAULT_LOG_SIGMA_CLAMP))
    scales = metadata.get("sigma_scales", {})

    count = r.u32()
    models: Dict[SegmentCategory, MLP] = {}
    for _ in range(count):
        name_len = r.u32()
        name = r.take(name_len).decode("utf-8")
        category = SegmentCategory(name)
        n_dims = r.u32()
        dims = [r.u32() for _ in range(n_dims)]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(r.f64_array((fan_out, fan_in)))
            biases.append(r.f64_array((fan_out,)))
        models[category] = MLP(
            weights=weights,
            biases=biases,
            log_sigma_clamp=clamp,
            sigma_scale=float(scales.get(name, 1.0)),
        )

    missing = [c.value for c in CATEGORY_ORDER if c not in models]
    if missing:
        raise MissingCategory(f"bundle lacks categories: {', '.join(missing)}")
    return ModelBundle(
        models=models,
        metadata=metadata,
        content_hash=hashlib.sha256(data).hexdigest(),
    )
