"""File formats: STF tensor-field files, ray-table CSV and key-value reports.

STF stores one symmetric tensor field on a uniform grid.  The header is

    {version, n, m, dims, spacing, origin,
     component_order: "lex-nondecreasing", scalar: "complex"}

and the values are a flat row-major array over (grid index..., component)
written as interleaved (re, im) pairs.  The text container is a JSON
object ``{"header": ..., "values": [...]}``.  The binary container is the
magic ``b"STF1"``, a little-endian uint32 header length, the UTF-8 JSON
header, then little-endian float64 pairs.

All writes go to a temporary file in the destination directory which is
then renamed over the target.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from . import tensor_core as tc
from .fields import GridDomain, TensorField
from .mrt import Ray

__all__ = [
    "STF_VERSION",
    "FormatError",
    "atomic_write",
    "field_header",
    "write_stf",
    "read_stf",
    "write_ray_table",
    "read_ray_table",
    "write_report",
    "read_report",
    "format_report",
]

STF_VERSION = 1
MAGIC = b"STF1"


class FormatError(ValueError):
    """Malformed or inconsistent input file."""


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def field_header(f: TensorField) -> dict:
    d = f.domain
    return {
        "version": STF_VERSION,
        "n": d.n,
        "m": f.m,
        "dims": list(d.shape),
        "spacing": [float(s) for s in d.spacing],
        "origin": [float(o) for o in d.origin],
        "component_order": "lex-nondecreasing",
        "scalar": "complex",
    }


def _pairs(f: TensorField) -> np.ndarray:
    v = np.ascontiguousarray(f.values, dtype=complex).ravel()
    return np.stack([v.real, v.imag], axis=1).ravel()


def write_stf(path, f: TensorField, binary: bool = False) -> Path:
    header = field_header(f)
    if binary:
        hb = json.dumps(header).encode()
        body = _pairs(f).astype("<f8").tobytes()
        return atomic_write(path, MAGIC + struct.pack("<I", len(hb)) + hb + body)
    return atomic_write(path, json.dumps({"header": header, "values": _pairs(f).tolist()}))


def _check_header(h: dict) -> None:
    required = ("version", "n", "m", "dims", "spacing", "origin", "component_order", "scalar")
    missing = [k for k in required if k not in h]
    if missing:
        raise FormatError(f"STF header missing {missing}")
    if h["version"] != STF_VERSION:
        raise FormatError(f"unsupported STF version {h['version']}")
    if h["component_order"] != "lex-nondecreasing" or h["scalar"] != "complex":
        raise FormatError("unsupported component order or scalar type")
    n = h["n"]
    if not (len(h["dims"]) == len(h["spacing"]) == len(h["origin"]) == n):
        raise FormatError("dims, spacing and origin must have length n")
    if h["m"] < 0 or n < 1 or min(h["dims"]) < 1 or min(h["spacing"]) <= 0:
        raise FormatError("invalid n, m, dims or spacing")


def _build(h: dict, flat: np.ndarray) -> TensorField:
    _check_header(h)
    ncomp = tc.num_components(h["n"], h["m"])
    expected = 2 * math.prod(h["dims"]) * ncomp
    if flat.size != expected:
        raise FormatError(f"expected {expected} reals, found {flat.size}")
    pairs = flat.reshape(-1, 2)
    vals = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(tuple(h["dims"]) + (ncomp,))
    dom = GridDomain(tuple(h["dims"]), tuple(h["spacing"]), tuple(h["origin"]))
    return TensorField(dom, h["m"], vals)


def read_stf(path) -> TensorField:
    raw = Path(path).read_bytes()
    if raw[:4] == MAGIC:
        if len(raw) < 8:
            raise FormatError("truncated STF binary file")
        (hl,) = struct.unpack("<I", raw[4:8])
        try:
            h = json.loads(raw[8:8 + hl].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad STF header: {exc}") from exc
        body = raw[8 + hl:]
        if len(body) % 8:
            raise FormatError("STF binary body is not a whole number of float64 values")
        return _build(h, np.frombuffer(body, dtype="<f8"))
    try:
        doc = json.loads(raw.decode())
        return _build(doc["header"], np.asarray(doc["values"], dtype=float))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"bad STF text file: {exc}") from exc


def write_ray_table(path, rays, values) -> Path:
    rays = list(rays)
    if not rays:
        raise ValueError("empty ray table")
    n = rays[0].n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x_{i + 1}" for i in range(n)] + [f"xi_{i + 1}" for i in range(n)] + ["k", "value_re", "value_im"])
    for ray, val in zip(rays, values, strict=True):
        val = complex(val)
        w.writerow([repr(float(c)) for c in ray.x] + [repr(float(c)) for c in ray.xi]
                   + [ray.k, repr(val.real), repr(val.imag)])
    return atomic_write(path, buf.getvalue())


def read_ray_table(path) -> tuple[list[Ray], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration as exc:
            raise FormatError("empty ray table") from exc
        n = (len(head) - 3) // 2
        expected = [f"x_{i + 1}" for i in range(n)] + [f"xi_{i + 1}" for i in range(n)] + ["k", "value_re", "value_im"]
        if n < 1 or head != expected:
            raise FormatError(f"unexpected ray-table columns {head}")
        rays, vals = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(head):
                raise FormatError(f"line {lineno}: expected {len(head)} fields")
            try:
                x = np.array(row[:n], dtype=float)
                xi = np.array(row[n:2 * n], dtype=float)
                rays.append(Ray(x, xi, int(row[2 * n])))
                vals.append(complex(float(row[2 * n + 1]), float(row[2 * n + 2])))
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    return rays, np.asarray(vals, dtype=complex)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+}j"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_report(metrics: dict, fmt: str = "text") -> str:
    """Render scalar metrics as ``key = value`` lines or two-column CSV."""
    items = [(k, _fmt(v)) for k, v in metrics.items() if not isinstance(v, (np.ndarray, list, dict))]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerows(items)
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    width = max((len(k) for k, _ in items), default=0)
    return "".join(f"{k:<{width}} = {v}\n" for k, v in items)


def write_report(path, metrics: dict, fmt: str = "text") -> Path:
    return atomic_write(path, format_report(metrics, fmt))


def read_report(path) -> dict[str, str]:
    """Parse a text report back into raw string values."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"bad report line {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
