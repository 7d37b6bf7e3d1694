"""Readers and writers for the on-disk artifacts.

Formats
-------
PFM
    ``Pf`` (1 channel) / ``PF`` (3 channels), header ``magic\\nW H\\nscale\\n``
    followed by W*H*(channels) float32 samples, rows stored bottom-up.
    The sign of ``scale`` encodes byte order (negative = little-endian);
    its magnitude is preserved in the header but not applied to samples.
    Invalid pixels are stored as NaN; non-finite samples read back as
    invalid.
16-bit disparity PNG
    Single-channel 16-bit PNG; ``d = (raw - 1) / scale`` for valid
    pixels, ``raw == invalid_value`` (default 0) marks missing data.
PLY
    Oriented point clouds: ``x y z nx ny nz`` float32 vertex properties,
    ASCII or binary little-endian, vertices in source raster order.
Normal-map PNG
    8-bit RGB, channel = round(255 * (n + 1) / 2) (half away from zero);
    invalid pixels render white.
Stats JSON
    Label, configuration echo and the five summary statistics.

Readers raise :class:`FormatError` (with a byte offset where it makes
sense) on malformed input instead of crashing.
"""

from __future__ import annotations

import io
import json

import numpy as np
from PIL import Image

from .evaluation import ErrorStats
from .fields import NormalField, ScalarField


class FormatError(Exception):
    """Malformed file content; ``offset`` is the parse position if known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


# --------------------------------------------------------------------------
# PFM

def _read_pfm_header(data: bytes):
    """Parse (magic, width, height, scale, payload_offset)."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if pos == start:
            raise FormatError("truncated PFM header", offset=pos)
        tokens.append(data[start:pos])
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError("missing whitespace after PFM scale", offset=pos)
    pos += 1
    magic = tokens[0]
    if magic not in (b"Pf", b"PF"):
        raise FormatError(f"bad PFM magic {magic!r}", offset=0)
    try:
        width, height = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError as exc:
        raise FormatError(f"bad PFM header field: {exc}") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"bad PFM dimensions {width}x{height}")
    if scale == 0.0:
        raise FormatError("PFM scale must be nonzero")
    return magic, width, height, scale, pos


def _read_pfm_payload(data: bytes, magic: bytes):
    magic_, width, height, scale, pos = _read_pfm_header(data)
    if magic_ != magic:
        kind = "grayscale 'Pf'" if magic == b"Pf" else "3-channel 'PF'"
        raise FormatError(f"expected {kind} PFM, got {magic_.decode()!r}", offset=0)
    channels = 3 if magic == b"PF" else 1
    count = width * height * channels
    need = count * 4
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise FormatError(f"truncated PFM payload: need {need} bytes, "
                          f"have {len(payload)}", offset=pos + len(payload))
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float64)
    if channels == 1:
        grid = flat.reshape(height, width)
    else:
        grid = flat.reshape(height, width, 3)
    return grid[::-1].copy(), scale  # rows are stored bottom-up


def read_pfm(data: bytes) -> ScalarField:
    """Grayscale PFM to a scalar field; non-finite samples become invalid."""
    grid, _ = _read_pfm_payload(data, b"Pf")
    return ScalarField.from_array(grid)


def write_pfm(field: ScalarField) -> bytes:
    """Little-endian grayscale PFM; invalid pixels stored as NaN."""
    header = f"Pf\n{field.width} {field.height}\n-1.0\n".encode("ascii")
    rows = field.values[::-1].astype("<f4")
    return header + rows.tobytes()


def read_pfm_normals(data: bytes) -> NormalField:
    """3-channel PFM to a normal field; any non-finite component invalidates."""
    grid, _ = _read_pfm_payload(data, b"PF")
    return NormalField.from_array(grid)


def write_pfm_normals(field: NormalField) -> bytes:
    header = f"PF\n{field.width} {field.height}\n-1.0\n".encode("ascii")
    rows = field.vectors[::-1].astype("<f4")
    return header + rows.tobytes()


# --------------------------------------------------------------------------
# 16-bit disparity PNG

def read_disparity_png16(data: bytes, scale: float = 256.0,
                         invalid_value: int = 0) -> ScalarField:
    """Quantized disparity: d = (raw - 1) / scale, raw == invalid_value masked."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise FormatError(f"not a decodable PNG: {exc}") from None
    if img.format != "PNG":
        raise FormatError(f"expected PNG, got {img.format}")
    if img.mode not in ("I;16", "I"):
        raise FormatError(f"expected 16-bit single-channel PNG, got mode {img.mode!r}")
    raw = np.asarray(img, dtype=np.int64)
    if raw.ndim != 2 or raw.min() < 0 or raw.max() > 0xFFFF:
        raise FormatError("PNG samples out of 16-bit range")
    mask = raw != invalid_value
    values = (raw.astype(np.float64) - 1.0) / float(scale)
    return ScalarField(np.where(mask, values, np.nan), mask)


def write_disparity_png16(field: ScalarField, scale: float = 256.0,
                          invalid_value: int = 0) -> bytes:
    """Inverse of :func:`read_disparity_png16`; valid raws clamp to [1, 65535]."""
    raw = np.rint(field.values * float(scale) + 1.0)
    raw = np.clip(raw, 1, 0xFFFF)
    raw = np.where(field.mask, raw, float(invalid_value)).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(raw).save(buf, format="PNG")
    return buf.getvalue()


# --------------------------------------------------------------------------
# PLY oriented point clouds

_PLY_PROPS = ("x", "y", "z", "nx", "ny", "nz")


def write_ply_oriented(points, normals, binary: bool = True) -> bytes:
    """Vertex cloud with per-point unit normals, source order preserved."""
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    nrm = np.asarray(normals, dtype=np.float32).reshape(-1, 3)
    if len(pts) != len(nrm):
        raise ValueError(f"point/normal count mismatch: {len(pts)} vs {len(nrm)}")
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {len(pts)}"]
    header += [f"property float {p}" for p in _PLY_PROPS]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")
    rows = np.hstack([pts, nrm])
    if binary:
        return head + rows.astype("<f4").tobytes()
    body = "\n".join(" ".join(f"{v:.9g}" for v in row) for row in rows)
    return head + (body + "\n" if len(rows) else "").encode("ascii")


def read_ply_oriented(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Decode clouds produced by :func:`write_ply_oriented`."""
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise FormatError("not a PLY produced by this writer", offset=0)
    head_lines = data[:end].decode("ascii", "replace").splitlines()
    fmt = next((ln.split()[1] for ln in head_lines if ln.startswith("format ")), None)
    count = next((int(ln.split()[2]) for ln in head_lines
                  if ln.startswith("element vertex ")), None)
    if fmt not in ("ascii", "binary_little_endian") or count is None:
        raise FormatError("unsupported PLY header")
    body = data[end + len(b"end_header\n"):]
    if fmt == "binary_little_endian":
        need = count * 6 * 4
        if len(body) < need:
            raise FormatError("truncated PLY payload", offset=end + 11 + len(body))
        rows = np.frombuffer(body, dtype="<f4", count=count * 6).reshape(-1, 6)
    else:
        rows = np.array([[float(v) for v in ln.split()]
                         for ln in body.decode("ascii").splitlines()[:count]],
                        dtype=np.float64).reshape(-1, 6)
        if len(rows) != count:
            raise FormatError("truncated ASCII PLY payload")
    return rows[:, :3].astype(np.float64), rows[:, 3:].astype(np.float64)


# --------------------------------------------------------------------------
# Normal-map PNG and stats JSON

def write_normal_png(field: NormalField) -> bytes:
    """RGB visualization; invalid pixels are white."""
    rgb = np.floor(255.0 * (field.vectors + 1.0) / 2.0 + 0.5)
    rgb = np.clip(np.nan_to_num(rgb, nan=255.0), 0, 255).astype(np.uint8)
    rgb[~field.mask] = 255
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_stats_json(stats: ErrorStats, label: str = "",
                     config: dict | None = None) -> bytes:
    doc = {"label": label, "config": config or {}, "stats": stats.as_dict()}
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def read_stats_json(data: bytes) -> tuple[ErrorStats, dict]:
    try:
        doc = json.loads(data.decode("utf-8"))
        stats = ErrorStats.from_dict(doc["stats"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad stats JSON: {exc}") from None
    return stats, doc
