"""Versioned on-disk format for MaskedMlp checkpoints.

Layout::

    prunedec-checkpoint 1\\n
    <header byte length>\\n
    <JSON header, UTF-8>
    <payload: little-endian float64, row-major, arrays in header order>

The header lists every array with its name, shape and byte offset into the
payload, plus ``layer_dims`` and free-form training metadata.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .neural import MaskedMlp, validate_layer_dims

MAGIC = b"prunedec-checkpoint"
VERSION = 1
_GROUPS = ("weights", "biases", "masks", "init_weights", "init_biases")


class CheckpointError(ValueError):
    pass


def to_bytes(net: MaskedMlp) -> bytes:
    arrays, payload, offset = [], [], 0
    for group in _GROUPS:
        for i, a in enumerate(getattr(net, group)):
            raw = np.ascontiguousarray(a, dtype="<f8").tobytes()
            arrays.append({"name": f"{group}/{i}", "shape": list(a.shape), "offset": offset})
            payload.append(raw)
            offset += len(raw)
    header = {
        "layer_dims": list(net.layer_dims),
        "metadata": net.metadata,
        "arrays": arrays,
        "payload_bytes": offset,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    return b"%s %d\n%d\n" % (MAGIC, VERSION, len(head)) + head + b"".join(payload)


def from_bytes(data: bytes) -> MaskedMlp:
    try:
        magic_line, rest = data.split(b"\n", 1)
        magic, version = magic_line.rsplit(b" ", 1)
        length_line, rest = rest.split(b"\n", 1)
        head_len = int(length_line)
    except ValueError as exc:
        raise CheckpointError("not a prunedec checkpoint") from exc
    if magic != MAGIC:
        raise CheckpointError("bad checkpoint magic")
    if int(version) != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {int(version)}")
    header = json.loads(rest[:head_len].decode("utf-8"))
    payload = rest[head_len:]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError("truncated checkpoint payload")
    groups = {g: [] for g in _GROUPS}
    for entry in header["arrays"]:
        group, _, _ = entry["name"].partition("/")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        a = np.frombuffer(payload, dtype="<f8", count=count, offset=entry["offset"])
        groups[group].append(a.reshape(shape).astype(np.float64))
    dims = validate_layer_dims(header["layer_dims"])
    net = MaskedMlp(layer_dims=dims, metadata=header["metadata"], **groups)
    expected = [(a, b) for a, b in zip(dims[:-1], dims[1:])]
    if [w.shape for w in net.weights] != expected:
        raise CheckpointError("weight shapes disagree with layer_dims")
    return net


def save(net: MaskedMlp, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(net))
    os.replace(tmp, path)
    return path


def load(path) -> MaskedMlp:
    return from_bytes(Path(path).read_bytes())
