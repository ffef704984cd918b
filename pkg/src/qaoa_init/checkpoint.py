"""Versioned model checkpoints: a JSON container holding named float64
arrays as base64-encoded little-endian bytes plus shape metadata, so files
are human-inspectable and platform-stable. Round trips are bit-exact.
"""

import base64
import json

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


def save_checkpoint(path, kind, arrays, metadata=None):
    """Write named arrays with metadata; `kind` tags the model type."""
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "metadata": metadata or {},
        "arrays": {
            name: {
                "shape": list(arr.shape),
                "dtype": "float64",
                "data": base64.b64encode(
                    np.ascontiguousarray(arr, dtype="<f8").tobytes()
                ).decode("ascii"),
            }
            for name, arr in arrays.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_checkpoint(path, expect_kind=None):
    """Read a checkpoint back; returns (arrays, metadata).

    Raises CheckpointCorruptError for unreadable/truncated files,
    CheckpointVersionError for unknown format versions and
    CheckpointShapeError when array payloads disagree with their declared
    shapes or the expected kind.
    """
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: unreadable checkpoint ({exc})")
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointCorruptError(f"{path}: missing format_version")
    if payload["format_version"] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {payload['format_version']} "
            f"(supported: {FORMAT_VERSION})"
        )
    if expect_kind is not None and payload.get("kind") != expect_kind:
        raise CheckpointShapeError(
            f"{path}: checkpoint kind {payload.get('kind')!r}, "
            f"expected {expect_kind!r}"
        )
    arrays = {}
    for name, entry in payload.get("arrays", {}).items():
        try:
            raw = base64.b64decode(entry["data"], validate=True)
        except (KeyError, ValueError, TypeError) as exc:
            raise CheckpointCorruptError(f"{path}: array {name!r} ({exc})")
        shape = tuple(entry.get("shape", ()))
        expected_bytes = int(np.prod(shape, dtype=np.int64)) * 8
        if len(raw) != expected_bytes:
            raise CheckpointShapeError(
                f"{path}: array {name!r} holds {len(raw)} bytes, "
                f"shape {shape} needs {expected_bytes}"
            )
        arrays[name] = np.frombuffer(raw, dtype="<f8").astype(
            np.float64
        ).reshape(shape)
    return arrays, payload.get("metadata", {})
