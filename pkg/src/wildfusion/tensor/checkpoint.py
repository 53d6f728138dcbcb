"""Versioned checkpoint container.

Layout::

    WFCKPT <version>\\n
    <header byte length>\\n
    <JSON header>            # config digest, tensor directory, user metadata
    <raw little-endian tensor payloads, concatenated in directory order>
"""

from __future__ import annotations

import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

MAGIC = "WFCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict, config_digest: str, metadata: dict | None = None) -> None:
    directory = []
    payloads = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = np.ascontiguousarray(le).tobytes()
        directory.append(
            {"name": name, "shape": list(arr.shape), "dtype": le.dtype.str, "offset": offset, "nbytes": len(raw)}
        )
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "config_digest": config_digest,
            "tensors": directory,
            "metadata": metadata or {},
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} {FORMAT_VERSION}\n{len(header)}\n".encode())
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        header, _ = _read_header(fh, path)
    return header


def _read_header(fh, path):
    first = fh.readline().decode(errors="replace").split()
    if len(first) != 2 or first[0] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if int(first[1]) != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {first[1]}")
    size = int(fh.readline())
    header = json.loads(fh.read(size))
    return header, fh.tell()


def load_checkpoint(path, expected_digest: str | None = None):
    """Return ``(tensors, header)``; refuse a mismatched config digest."""
    path = Path(path)
    with open(path, "rb") as fh:
        header, start = _read_header(fh, path)
        if expected_digest is not None and header["config_digest"] != expected_digest:
            raise CheckpointError(
                f"config digest mismatch: checkpoint {header['config_digest']} vs config {expected_digest}"
            )
        blob = fh.read()
    tensors = OrderedDict()
    for entry in header["tensors"]:
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"{path}: truncated payload for {entry['name']}")
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(arr.dtype.newbyteorder("="))
    return tensors, header
