"""Binary checkpoint container.

Layout (all integers little-endian)::

    bytes 0..15   magic  b"SLAVGAE-CKPT-v1\\n"
    bytes 16..23  uint64 header length H
    next H bytes  UTF-8 JSON header, keys sorted, no whitespace:
                    {"config": {...}, "dims": {...}, "format": 1,
                     "seed": int, "tensors": [{"name": str, "shape": [..]}, ...]}
    remainder     each tensor's float64 data ('<f8', C order), in header order

The file has no timestamps, so identical parameters and metadata always
produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ParseError
from .model import ModelDims, check_params

MAGIC = b"SLAVGAE-CKPT-v1\n"
FORMAT_VERSION = 1


def save_checkpoint(path, params, dims: ModelDims, seed, config=None) -> None:
    check_params(params, dims)
    header = {
        "config": config or {},
        "dims": asdict(dims),
        "format": FORMAT_VERSION,
        "seed": int(seed),
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for v in params.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns ``(params, dims, seed, config)``."""
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise ParseError(path, None, "not a checkpoint file (bad magic)")
    off = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    header = json.loads(data[off:off + hlen].decode())
    off += hlen
    if header.get("format") != FORMAT_VERSION:
        raise ParseError(path, None, f"unsupported checkpoint format {header.get('format')}")
    params = {}
    for t in header["tensors"]:
        shape = tuple(t["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = off + 8 * count
        if end > len(data):
            raise ParseError(path, None, f"truncated data for tensor {t['name']}")
        params[t["name"]] = np.frombuffer(data[off:end], dtype="<f8").astype(np.float64).reshape(shape)
        off = end
    if off != len(data):
        raise ParseError(path, None, "trailing bytes after last tensor")
    dims = ModelDims(**header["dims"])
    check_params(params, dims)
    return params, dims, header["seed"], header["config"]
