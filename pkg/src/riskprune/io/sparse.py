"""Coordinate-list export of pruned networks.

Same framing as checkpoints (magic ``b"RPSP"``, version byte, JSON header).
Then, per layer: ``u64`` count of non-zero weights, ``count`` records of
``(u32 row, u32 column, f64 value)``, and the biases as ``out`` f64 values.
Everything is little-endian and 64-bit, so reconstruction is exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..network import DenseNetwork, Layer
from ..pruning import PrunedNetwork
from .checkpoint import VERSION, read_header
from .errors import FormatError

MAGIC = b"RPSP"
_TRIPLE = np.dtype([("row", "<u4"), ("col", "<u4"), ("value", "<f8")])


def export_sparse(net: PrunedNetwork | DenseNetwork, path) -> None:
    if isinstance(net, PrunedNetwork):
        net = net.network
    header = {
        "format": "riskprune-sparse",
        "version": VERSION,
        "byteorder": "little",
        "layers": [{"in": layer.in_dim, "out": layer.out_dim, "activation": layer.activation}
                   for layer in net.layers],
    }
    blob = json.dumps(header).encode("utf-8")
    parts = [MAGIC, struct.pack("<BI", VERSION, len(blob)), blob]
    for layer in net.layers:
        rows, cols = np.nonzero(layer.weights)
        triples = np.empty(rows.size, dtype=_TRIPLE)
        triples["row"], triples["col"] = rows, cols
        triples["value"] = layer.weights[rows, cols]
        parts.append(struct.pack("<Q", rows.size))
        parts.append(triples.tobytes())
        parts.append(layer.biases.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def import_sparse(path) -> DenseNetwork:
    data = Path(path).read_bytes()
    header, offset = read_header(data, MAGIC, path)
    layers = []
    for spec in header["layers"]:
        n_in, n_out = int(spec["in"]), int(spec["out"])
        if len(data) - offset < 8:
            raise FormatError(f"{path}: truncated layer record")
        (count,) = struct.unpack("<Q", data[offset:offset + 8])
        offset += 8
        if len(data) - offset < count * _TRIPLE.itemsize + n_out * 8:
            raise FormatError(f"{path}: truncated layer payload")
        triples = np.frombuffer(data, dtype=_TRIPLE, count=count, offset=offset)
        offset += count * _TRIPLE.itemsize
        if count and (triples["row"].max() >= n_out or triples["col"].max() >= n_in):
            raise FormatError(f"{path}: coordinate outside layer dimensions")
        w = np.zeros((n_out, n_in))
        w[triples["row"], triples["col"]] = triples["value"]
        b = np.frombuffer(data, dtype="<f8", count=n_out, offset=offset).astype(np.float64)
        offset += n_out * 8
        layers.append(Layer(w, b, spec["activation"]))
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes after the last layer")
    return DenseNetwork(layers)
