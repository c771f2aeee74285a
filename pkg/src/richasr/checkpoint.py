"""Binary checkpoint files: magic "RNTM", versioned, bit-exact round trips.

Layout (all integers little-endian u32):
    magic "RNTM" | version | tensor_count
    per tensor:  name_len | name utf-8 | rank | dims... | float64 values (LE)
    trailer:     meta_len | metadata JSON utf-8

The metadata block carries the frozen flags, the vocabulary, and whatever
model-rebuilding details the caller supplies (kept JSON so the format stays
inspectable).
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .nnet.params import ParamStore

MAGIC = b"RNTM"
VERSION = 1


def save_checkpoint(path, store: ParamStore, metadata: dict | None = None) -> None:
    metadata = dict(metadata or {})
    metadata["frozen"] = {name: p.frozen for name, p in store.entries.items()}
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(store.entries))
    for name, p in store.entries.items():
        raw = name.encode("utf-8")
        blob += struct.pack("<I", len(raw))
        blob += raw
        blob += struct.pack("<I", p.values.ndim)
        blob += struct.pack(f"<{p.values.ndim}I", *p.values.shape)
        blob += np.ascontiguousarray(p.values, dtype="<f8").tobytes()
    meta_raw = json.dumps(metadata, sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
    blob += struct.pack("<I", len(meta_raw))
    blob += meta_raw
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path):
    """Returns (ParamStore, metadata dict)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ContractViolation(f"{path}: not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ContractViolation(f"{path}: unsupported checkpoint version {version}")
    off = 12
    store = ParamStore()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, off)
        off += 4
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", data, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(dims)
        off += 8 * n
        store.add(name, values.astype(np.float64))
    (meta_len,) = struct.unpack_from("<I", data, off)
    off += 4
    metadata = json.loads(data[off:off + meta_len].decode("utf-8"))
    for name, frozen in metadata.get("frozen", {}).items():
        if name in store:
            store[name].frozen = bool(frozen)
    return store, metadata
