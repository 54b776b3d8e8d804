"""Versioned binary blob store used by the PE and molecule caches.

File layout: 8-byte magic, u32 format version, u32 CRC32 of the payload,
u64 payload length, payload bytes. Corrupt or mismatching files are treated
as misses (and counted); writes go through a temp file plus atomic rename so
concurrent writers of the same key are last-write-wins.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"MMIXBLOB"
_HEADER = struct.Struct("<8sIIQ")


def key_hash(*parts: str) -> str:
    """Stable hex digest of key material (e.g. canonical key + config tag)."""
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def write_blob(path: Path, payload: bytes, version: int) -> None:
    header = _HEADER.pack(MAGIC, version, zlib.crc32(payload), len(payload))
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_blob(path: Path, version: int) -> tuple[bytes | None, str]:
    """Read a blob; returns (payload, status) with status in
    {"hit", "miss", "corrupt", "stale"}."""
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        return None, "miss"
    if len(raw) < _HEADER.size:
        return None, "corrupt"
    magic, ver, crc, length = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        return None, "corrupt"
    if ver != version:
        return None, "stale"
    payload = raw[_HEADER.size:]
    if len(payload) != length or zlib.crc32(payload) != crc:
        return None, "corrupt"
    return payload, "hit"


class BlobStore:
    """Keyed blob files under a root directory.

    `sharded` adds a two-hex-char prefix directory level (used by the
    molecule cache); the PE cache keeps one flat file per key.
    """

    def __init__(self, root: str | Path, version: int = 1,
                 sharded: bool = False):
        self.root = Path(root)
        self.version = version
        self.sharded = sharded
        self.hits = 0
        self.misses = 0
        self.corrupt = 0

    def path_for(self, key: str) -> Path:
        digest = key_hash(key)
        if self.sharded:
            return self.root / digest[:2] / f"{digest}.bin"
        return self.root / f"{digest}.bin"

    def get(self, key: str) -> bytes | None:
        payload, status = read_blob(self.path_for(key), self.version)
        if status == "hit":
            self.hits += 1
        elif status == "corrupt":
            self.corrupt += 1
        else:
            self.misses += 1
        return payload

    def put(self, key: str, payload: bytes) -> None:
        write_blob(self.path_for(key), payload, self.version)


def pack_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    """Deterministic serialization of named arrays (sorted by name)."""
    names = sorted(arrays)
    meta = [{"name": n, "dtype": str(arrays[n].dtype),
             "shape": list(arrays[n].shape)} for n in names]
    head = json.dumps(meta, sort_keys=True).encode("utf-8")
    chunks = [struct.pack("<I", len(head)), head]
    for n in names:
        chunks.append(np.ascontiguousarray(arrays[n]).tobytes())
    return b"".join(chunks)


def unpack_arrays(blob: bytes) -> dict[str, np.ndarray]:
    (head_len,) = struct.unpack_from("<I", blob)
    meta = json.loads(blob[4:4 + head_len].decode("utf-8"))
    out: dict[str, np.ndarray] = {}
    offset = 4 + head_len
    for entry in meta:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = dtype.itemsize * count
        arr = np.frombuffer(blob[offset:offset + nbytes], dtype=dtype)
        out[entry["name"]] = arr.reshape(shape).copy()
        offset += nbytes
    return out
