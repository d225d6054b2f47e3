"""Versioned binary model container with a whole-file checksum.

Layout (all integers little-endian):

    magic  b"SBNN"
    u32    format version (currently 1)
    u32    config JSON byte length, then that many UTF-8 bytes
           (object: {"config": NetworkConfig fields, "training_metadata": {...}})
    u32    array count
    per array, in the declared parameter order:
        u16     name byte length, then the name (UTF-8)
        u8      ndim
        u64×nd  shape
        f64×N   values (little-endian)
    32 B   SHA-256 of every preceding byte

Round-trips are bit-exact; any truncation, trailing bytes, checksum or shape
inconsistency raises a model-format error without producing a partial model.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError, VersionMismatchError
from .network import PARAM_ORDER, Network, NetworkConfig

__all__ = ["save_model", "load_model", "MODEL_MAGIC", "MODEL_FORMAT_VERSION"]

MODEL_MAGIC = b"SBNN"
MODEL_FORMAT_VERSION = 1


def save_model(network: Network, path) -> None:
    """Serialize a Network; see module docstring for the layout."""
    buffer = io.BytesIO()
    buffer.write(MODEL_MAGIC)
    buffer.write(struct.pack("<I", MODEL_FORMAT_VERSION))

    header = {
        "config": network.config.to_dict(),
        "training_metadata": network.training_metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buffer.write(struct.pack("<I", len(header_bytes)))
    buffer.write(header_bytes)

    buffer.write(struct.pack("<I", len(PARAM_ORDER)))
    for name in PARAM_ORDER:
        arr = network.params[name]
        name_bytes = name.encode("utf-8")
        buffer.write(struct.pack("<H", len(name_bytes)))
        buffer.write(name_bytes)
        buffer.write(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            buffer.write(struct.pack("<Q", dim))
        buffer.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    payload = buffer.getvalue()
    digest = hashlib.sha256(payload).digest()
    Path(path).write_bytes(payload + digest)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int) -> bytes:
        if self.offset + count > len(self.data):
            raise ModelFormatError("model file truncated")
        chunk = self.data[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def load_model(path) -> Network:
    """Load and fully validate a model file saved by :func:`save_model`."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    if len(raw) < len(MODEL_MAGIC) + 4 + 32:
        raise ModelFormatError("model file truncated")

    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise ModelFormatError("model file checksum mismatch (corrupt file)")

    reader = _Reader(payload)
    if reader.take(4) != MODEL_MAGIC:
        raise ModelFormatError("not a structbias model file (bad magic)")
    version = reader.unpack("<I")
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format version {version} unsupported (this build reads "
            f"{MODEL_FORMAT_VERSION})"
        )

    header_len = reader.unpack("<I")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
        config = NetworkConfig.from_dict(header["config"])
        metadata = header.get("training_metadata", {})
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"model header unreadable: {exc}") from exc

    expected_shapes = config.parameter_shapes()
    n_arrays = reader.unpack("<I")
    if n_arrays != len(PARAM_ORDER):
        raise ModelFormatError(
            f"model declares {n_arrays} arrays, expected {len(PARAM_ORDER)}"
        )

    params = {}
    for expected_name in PARAM_ORDER:
        name_len = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        if name != expected_name:
            raise ModelFormatError(
                f"array order mismatch: found {name!r}, expected {expected_name!r}"
            )
        ndim = reader.unpack("<B")
        shape = tuple(reader.unpack("<Q") for _ in range(ndim))
        if shape != expected_shapes[name]:
            raise ModelFormatError(
                f"array {name} has shape {shape}, config implies {expected_shapes[name]}"
            )
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(reader.take(count * 8), dtype="<f8").astype(np.float64)
        params[name] = values.reshape(shape)

    if reader.offset != len(payload):
        raise ModelFormatError("model file has trailing bytes after the declared arrays")

    return Network(config=config, params=params, training_metadata=metadata)
