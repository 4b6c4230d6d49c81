"""Network checkpoints.

Layout::

    b"RPCK"                 magic
    u8                      format version
    u32 (little-endian)     header length in bytes
    header                  UTF-8 JSON: dtype, byte order, layer dims, activations
    per layer               weights (out x in, row-major) then biases

Weights are little-endian IEEE-754, 32-bit by default; ``precision=64``
round-trips bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..network import DenseNetwork, Layer
from .errors import FormatError

MAGIC = b"RPCK"
VERSION = 1
_DTYPES = {32: "<f4", 64: "<f8"}


def save_checkpoint(net: DenseNetwork, path, precision: int = 32) -> None:
    if precision not in _DTYPES:
        raise ValueError("precision must be 32 or 64")
    dtype = _DTYPES[precision]
    header = {
        "format": "riskprune-checkpoint",
        "version": VERSION,
        "dtype": dtype,
        "byteorder": "little",
        "layout": "per layer: weights [out x in] row-major, then biases [out]",
        "layers": [{"in": layer.in_dim, "out": layer.out_dim, "activation": layer.activation}
                   for layer in net.layers],
    }
    blob = json.dumps(header).encode("utf-8")
    parts = [MAGIC, struct.pack("<BI", VERSION, len(blob)), blob]
    for layer in net.layers:
        parts.append(layer.weights.astype(dtype).tobytes())
        parts.append(layer.biases.astype(dtype).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_header(data: bytes, magic: bytes, path) -> tuple[dict, int]:
    if data[:4] != magic:
        raise FormatError(f"{path}: not a {magic.decode()} file")
    if len(data) < 9:
        raise FormatError(f"{path}: truncated header")
    version, size = struct.unpack("<BI", data[4:9])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version} (expected {VERSION})")
    try:
        header = json.loads(data[9:9 + size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header") from exc
    return header, 9 + size


def load_checkpoint(path) -> DenseNetwork:
    data = Path(path).read_bytes()
    header, offset = read_header(data, MAGIC, path)
    dtype = np.dtype(header.get("dtype", "<f4"))
    layers = []
    for spec in header["layers"]:
        n_in, n_out = int(spec["in"]), int(spec["out"])
        need = (n_out * n_in + n_out) * dtype.itemsize
        if len(data) - offset < need:
            raise FormatError(f"{path}: payload shorter than the header's layer sizes")
        w = np.frombuffer(data, dtype=dtype, count=n_out * n_in, offset=offset).reshape(n_out, n_in)
        offset += n_out * n_in * dtype.itemsize
        b = np.frombuffer(data, dtype=dtype, count=n_out, offset=offset)
        offset += n_out * dtype.itemsize
        layers.append(Layer(w.astype(np.float64), b.astype(np.float64), spec["activation"]))
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes after the last layer")
    return DenseNetwork(layers)
