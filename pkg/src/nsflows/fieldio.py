"""Binary and CSV persistence for :class:`SampledField`.

Layout of a field file::

    bytes 0-7    b"NSFIELD1"
    bytes 8-11   format version, uint32 little-endian
    bytes 12-15  JSON header length in bytes, uint32 little-endian
    header       UTF-8 JSON: axes, label, real flag, free-form meta
    payload      float64 little-endian, (re, im) interleaved, row-major
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .core_fields import Grid1D, SampledField
from .errors import InvalidArgumentError, MalformedFileError

MAGIC = b"NSFIELD1"
VERSION = 1
_PRELUDE = struct.Struct("<8sII")


def encode_field(fld: SampledField) -> bytes:
    header = {
        "axes": [ax.to_dict() for ax in fld.axes],
        "label": fld.label,
        "real": bool(fld.real),
        "meta": fld.meta,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(fld.values, dtype="<c16").tobytes()
    return _PRELUDE.pack(MAGIC, VERSION, len(hbytes)) + hbytes + payload


def decode_field(data: bytes) -> SampledField:
    if len(data) < _PRELUDE.size:
        raise MalformedFileError("file shorter than the 16-byte prelude", len(data))
    magic, version, hlen = _PRELUDE.unpack_from(data, 0)
    if magic != MAGIC:
        raise MalformedFileError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise MalformedFileError(f"unsupported version {version}", 8)
    start = _PRELUDE.size
    if len(data) < start + hlen:
        raise MalformedFileError("truncated header", len(data))
    try:
        header = json.loads(data[start:start + hlen].decode("utf-8"))
        axes = tuple(Grid1D.from_dict(a) for a in header["axes"])
    except (ValueError, KeyError, TypeError, InvalidArgumentError) as exc:
        raise MalformedFileError(f"malformed header: {exc}", start) from exc
    count = int(np.prod([ax.count for ax in axes]))
    pstart = start + hlen
    need = 16 * count
    have = len(data) - pstart
    if have != need:
        raise MalformedFileError(
            f"payload has {have} bytes, header implies {need}", pstart + min(have, need))
    values = np.frombuffer(data, dtype="<c16", count=count, offset=pstart)
    return SampledField(axes, values.astype(np.complex128), header.get("label", ""),
                        bool(header.get("real", False)), dict(header.get("meta", {})))


def store_field(fld: SampledField, path) -> None:
    Path(path).write_bytes(encode_field(fld))


def load_field(path) -> SampledField:
    return decode_field(Path(path).read_bytes())


def export_csv(fld: SampledField, path) -> None:
    """One row per node: axis coordinates followed by re, im."""
    mesh = fld.mesh()
    names = [f"x{i}" for i in range(fld.rank)] + ["re", "im"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        flat = [m.ravel() for m in mesh]
        vals = fld.values.ravel()
        for i in range(vals.size):
            writer.writerow([repr(float(c[i])) for c in flat]
                            + [repr(float(vals[i].real)), repr(float(vals[i].imag))])


def write_ppm_heatmap(fld: SampledField, path, part: str = "abs") -> None:
    """Binary PPM (P6) heatmap of a rank-2 field; blue-white-red for re/im, grey for abs."""
    if fld.rank != 2:
        raise InvalidArgumentError("heatmap export needs a rank-2 field")
    v = {"abs": np.abs, "re": np.real, "im": np.imag}[part](fld.values)
    v = np.where(np.isfinite(v), v, 0.0)
    scale = np.max(np.abs(v)) or 1.0
    s = v / scale
    if part == "abs":
        g = (255 * s).astype(np.uint8)
        rgb = np.stack([g, g, g], axis=-1)
    else:
        pos = np.clip(s, 0, 1)
        neg = np.clip(-s, 0, 1)
        r = 255 * (1 - neg)
        b = 255 * (1 - pos)
        g = 255 * (1 - pos - neg)
        rgb = np.stack([r, g, b], axis=-1).astype(np.uint8)
    # rows = second axis (top = largest), columns = first axis
    img = np.ascontiguousarray(np.transpose(rgb, (1, 0, 2))[::-1])
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6 {w} {h} 255\n".encode("ascii"))
        fh.write(img.tobytes())
