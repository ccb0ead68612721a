"""Single-file model checkpoints.

Layout: one ASCII magic line, one JSON header line (config echo, vocab hash
and a parameter table of name/shape/offset), then the raw little-endian
float64 parameter bytes in table order.  Nothing time- or host-dependent is
written, so identical parameters give identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"OVERLAPRE-CKPT\n"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: dict[str, np.ndarray], config: dict, vocab_hash: str) -> None:
    table = []
    offset = 0
    for name, arr in params.items():
        nbytes = int(np.prod(arr.shape)) * 8
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += nbytes
    header = {"version": VERSION, "config": config, "vocab_hash": vocab_hash, "params": table}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict, str]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    rest = raw[len(MAGIC):]
    newline = rest.index(b"\n")
    header = json.loads(rest[:newline])
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
    body = rest[newline + 1:]
    params = {}
    for entry in header["params"]:
        count = int(np.prod(entry["shape"]))
        start = entry["offset"]
        chunk = body[start:start + count * 8]
        if len(chunk) != count * 8:
            raise CheckpointError(f"{path}: truncated data for {entry['name']}")
        params[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(entry["shape"]).astype(np.float64)
    return params, header["config"], header["vocab_hash"]
