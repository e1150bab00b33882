"""Reader/writer for the safetensors single-file tensor container.

Layout: an 8-byte little-endian header length, a JSON header mapping tensor
names to ``{"dtype", "shape", "data_offsets"}`` (offsets are relative to the
start of the payload), then the raw little-endian row-major payload.

Files produced by :func:`emit_tensors` are byte-deterministic for a given
input: names are sorted, the JSON header is compact with sorted keys and is
padded with spaces to an 8-byte boundary, and payload blocks are contiguous
in name order starting at offset 0.
"""

import json
import os
import struct

import numpy as np

from .errors import IoFailureError, NonFiniteError, UnreadableFileError

_TAG_FOR_KIND = {
    ("f", 8): "F64",
    ("f", 4): "F32",
    ("f", 2): "F16",
    ("i", 8): "I64",
    ("i", 4): "I32",
    ("i", 2): "I16",
    ("i", 1): "I8",
    ("u", 8): "U64",
    ("u", 4): "U32",
    ("u", 2): "U16",
    ("u", 1): "U8",
    ("b", 1): "BOOL",
}

_DTYPE_FOR_TAG = {
    "F64": "<f8",
    "F32": "<f4",
    "F16": "<f2",
    "I64": "<i8",
    "I32": "<i4",
    "I16": "<i2",
    "I8": "|i1",
    "U64": "<u8",
    "U32": "<u4",
    "U16": "<u2",
    "U8": "|u1",
    "BOOL": "|b1",
}


def _prepare(name, arr) -> np.ndarray:
    if not isinstance(name, str) or not name:
        raise ValueError(f"tensor name must be a non-empty string, got {name!r}")
    a = np.asarray(arr)
    key = (a.dtype.kind, a.dtype.itemsize)
    if key not in _TAG_FOR_KIND:
        raise ValueError(f"unsupported dtype {a.dtype} for tensor {name!r}")
    if a.dtype.kind == "f" and not np.isfinite(a).all():
        raise NonFiniteError(f"tensor {name!r} contains NaN or infinite values")
    little = a.dtype.newbyteorder("<")
    if a.dtype != little:
        a = a.astype(little)
    if not a.flags["C_CONTIGUOUS"]:
        # note: ascontiguousarray would flatten 0-d arrays, but those are
        # always contiguous and never reach this branch
        a = np.ascontiguousarray(a)
    return a


def emit_tensors(tensors, path, metadata=None) -> None:
    """Write ``{name: array}`` to ``path`` in the container format.

    ``metadata``, if given, must be a flat ``str -> str`` mapping; it is
    stored in the header under the reserved ``__metadata__`` key.
    """
    items = dict(tensors)
    if not items:
        raise ValueError("refusing to write an empty tensor file")
    arrays = {name: _prepare(name, arr) for name, arr in items.items()}

    header: dict = {}
    if metadata is not None:
        meta = dict(metadata)
        for k, v in meta.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ValueError("metadata must map strings to strings")
        header["__metadata__"] = meta

    offset = 0
    for name in sorted(arrays):
        a = arrays[name]
        header[name] = {
            "dtype": _TAG_FOR_KIND[(a.dtype.kind, a.dtype.itemsize)],
            "shape": list(a.shape),
            "data_offsets": [offset, offset + a.nbytes],
        }
        offset += a.nbytes

    blob = json.dumps(header, separators=(",", ":"), sort_keys=True).encode("utf-8")
    blob += b" " * (-len(blob) % 8)

    try:
        with open(os.fspath(path), "wb") as fh:
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for name in sorted(arrays):
                fh.write(arrays[name].tobytes())
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def _decode(name, entry, payload) -> np.ndarray:
    if not isinstance(entry, dict):
        raise UnreadableFileError(f"malformed header entry for {name!r}")
    tag = entry.get("dtype")
    shape = entry.get("shape")
    offsets = entry.get("data_offsets")
    if tag not in _DTYPE_FOR_TAG and tag != "BF16":
        raise UnreadableFileError(f"unsupported dtype {tag!r} for tensor {name!r}")
    if not isinstance(shape, list) or any(
        not isinstance(d, int) or d < 0 for d in shape
    ):
        raise UnreadableFileError(f"malformed shape for tensor {name!r}")
    if (
        not isinstance(offsets, list)
        or len(offsets) != 2
        or not all(isinstance(o, int) for o in offsets)
        or not 0 <= offsets[0] <= offsets[1] <= len(payload)
    ):
        raise UnreadableFileError(f"bad data offsets for tensor {name!r}")

    itemsize = 2 if tag == "BF16" else np.dtype(_DTYPE_FOR_TAG[tag]).itemsize
    expected = int(np.prod(shape, dtype=np.int64)) * itemsize
    if offsets[1] - offsets[0] != expected:
        raise UnreadableFileError(
            f"tensor {name!r}: payload span {offsets[1] - offsets[0]} bytes, "
            f"expected {expected}"
        )
    chunk = payload[offsets[0] : offsets[1]]
    if tag == "BF16":
        # bfloat16 is the high half of a float32; widen by shifting into
        # the exponent/mantissa position (numpy has no native bfloat16).
        raw = np.frombuffer(chunk, dtype="<u2").astype(np.uint32) << 16
        return raw.view(np.float32).reshape(shape).copy()
    return np.frombuffer(chunk, dtype=_DTYPE_FOR_TAG[tag]).reshape(shape).copy()


def _read_header(path):
    try:
        with open(os.fspath(path), "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    if len(data) < 8:
        raise UnreadableFileError(f"{path}: too short for a header length")
    (hlen,) = struct.unpack("<Q", data[:8])
    if 8 + hlen > len(data):
        raise UnreadableFileError(f"{path}: truncated header")
    try:
        header = json.loads(data[8 : 8 + hlen])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise UnreadableFileError(f"{path}: malformed JSON header: {exc}") from exc
    if not isinstance(header, dict):
        raise UnreadableFileError(f"{path}: header is not a JSON object")
    return header, data[8 + hlen :]


def read_tensors(path) -> dict:
    """Read a container file and return ``{name: array}``.

    Arrays own their memory.  bfloat16 tensors are widened to float32; all
    other dtypes are preserved.
    """
    header, payload = _read_header(path)
    return {
        name: _decode(name, entry, payload)
        for name, entry in header.items()
        if name != "__metadata__"
    }


def read_metadata(path) -> dict:
    """Return the ``__metadata__`` mapping of a container file (may be empty)."""
    header, _ = _read_header(path)
    meta = header.get("__metadata__", {})
    if not isinstance(meta, dict):
        raise UnreadableFileError(f"{path}: malformed __metadata__")
    return dict(meta)
