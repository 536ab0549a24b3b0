"""Binary checkpoint: magic, length-prefixed JSON header with a tensor manifest, raw float64 payload.

Layout::

    b"UNIOD\\x01" | uint64 LE header length | header (UTF-8 JSON) | payload

The payload holds every tensor as little-endian float64 in manifest order;
manifest offsets are relative to the start of the payload.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .model import ModelParams

MAGIC = b"UNIOD\x01"
FORMAT_VERSION = 1
_LEN = struct.Struct("<Q")


class CheckpointError(ValueError):
    pass


def _atomic_write(path: Path, blobs) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    except OSError as exc:
        raise CheckpointError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            for blob in blobs:
                fh.write(blob)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise CheckpointError(f"cannot write {path}: {exc}") from exc


def save_checkpoint(params: ModelParams, path, corpus_fingerprint: str = "") -> None:
    manifest = []
    offset = 0
    for name, arr in params:
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = {
        "format_version": FORMAT_VERSION,
        "config": params.config.to_dict(),
        "config_fingerprint": params.fingerprint,
        "corpus_fingerprint": corpus_fingerprint,
        "payload_bytes": offset,
        "tensors": manifest,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = (np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in params)
    _atomic_write(Path(path), [MAGIC, _LEN.pack(len(head)), head, *payload])


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh, path)


def _read_header(fh, path) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    raw = fh.read(_LEN.size)
    if len(raw) != _LEN.size:
        raise CheckpointError(f"{path}: truncated header")
    (length,) = _LEN.unpack(raw)
    blob = fh.read(length)
    if len(blob) != length:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    return header


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Return the parameters and the raw header."""
    path = Path(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    with fh:
        header = _read_header(fh, path)
        config = TrainConfig.from_dict(header["config"])
        if config.fingerprint() != header.get("config_fingerprint"):
            raise CheckpointError(f"{path}: config fingerprint mismatch")
        expected = 0
        for entry in header["tensors"]:
            if entry["offset"] != expected:
                raise CheckpointError(f"{path}: manifest offsets are not contiguous at {entry['name']}")
            expected += int(np.prod(entry["shape"], dtype=np.int64)) * 8
        if expected != header["payload_bytes"]:
            raise CheckpointError(f"{path}: manifest size disagrees with payload_bytes")
        payload = fh.read(expected)
    if len(payload) < expected:
        raise CheckpointError(f"{path}: payload shorter than manifest ({len(payload)} < {expected} bytes)")
    arrays = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        flat = np.frombuffer(payload, dtype="<f8", count=count, offset=entry["offset"])
        arrays[entry["name"]] = flat.astype(np.float64).reshape(entry["shape"])
    try:
        params = ModelParams(config, arrays)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    return params, header


def save_report(path, report: dict) -> None:
    _atomic_write(Path(path), [json.dumps(report, indent=2, sort_keys=True).encode("utf-8")])
