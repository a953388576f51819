"""Netpbm images, label files, boundary maps and key=value config files."""
from __future__ import annotations

import json
import os
from typing import Dict, Tuple

import numpy as np

from .bench import BoundaryMap
from .core import ImageBuffer, LabelMap


class FormatError(ValueError):
    pass


def _tokens(data: bytes, count: int, pos: int) -> Tuple[list, int]:
    """Read ``count`` whitespace-separated header tokens, skipping # comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("malformed header: unexpected end of file")
        out.append(data[start:pos])
    return out, pos


def _int_token(tok: bytes, what: str) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise FormatError(f"malformed header: {what} is {tok!r}") from None
    if v <= 0:
        raise FormatError(f"malformed header: {what} must be positive, got {v}")
    return v


def parse_netpbm(data: bytes):
    """Decode P1/P4 (bitmap), P2/P5 (gray) or P3/P6 (color). Returns (magic, array)."""
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in b"123456":
        raise FormatError("malformed header: not a Netpbm P1-P6 file")
    magic = data[:2].decode()
    if magic in ("P1", "P4"):
        (wt, ht), pos = _tokens(data, 2, 2)
        w, h = _int_token(wt, "width"), _int_token(ht, "height")
        if magic == "P4":
            pos += 1
            row_bytes = (w + 7) // 8
            payload = data[pos:pos + row_bytes * h]
            if len(payload) != row_bytes * h:
                raise FormatError(f"truncated payload: expected {row_bytes * h} bytes, got {len(payload)}")
            bits = np.unpackbits(np.frombuffer(payload, np.uint8).reshape(h, row_bytes), axis=1)[:, :w]
            return magic, bits.astype(bool)
        body = bytes(c for c in data[pos:] if c in b"01")
        if len(body) < w * h:
            raise FormatError(f"truncated payload: expected {w * h} bits, got {len(body)}")
        return magic, (np.frombuffer(body[:w * h], np.uint8) == ord("1")).reshape(h, w)
    (wt, ht, mt), pos = _tokens(data, 3, 2)
    w, h, maxval = _int_token(wt, "width"), _int_token(ht, "height"), _int_token(mt, "maxval")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 255 is accepted")
    channels = 3 if magic in ("P3", "P6") else 1
    expected = w * h * channels
    if magic in ("P5", "P6"):
        pos += 1  # single whitespace byte after maxval
        payload = data[pos:pos + expected]
        if len(payload) != expected:
            raise FormatError(f"truncated payload: expected {expected} bytes, got {len(payload)}")
        arr = np.frombuffer(payload, np.uint8).reshape(h, w, channels)
    else:
        vals = data[pos:].split()
        if len(vals) < expected:
            raise FormatError(f"truncated payload: expected {expected} values, got {len(vals)}")
        arr = np.array([int(v) for v in vals[:expected]], dtype=np.int64)
        if arr.min() < 0 or arr.max() > 255:
            raise FormatError("sample out of range 0..255")
        arr = arr.astype(np.uint8).reshape(h, w, channels)
    return magic, arr.copy()


def _read(path) -> bytes:
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "rb") as fh:
        return fh.read()


def load_image(path) -> ImageBuffer:
    magic, arr = parse_netpbm(_read(path))
    if magic in ("P1", "P4"):
        raise FormatError(f"{path}: bitmap files are not accepted as input images")
    return ImageBuffer(arr)


def load_boundary_map(path) -> BoundaryMap:
    magic, arr = parse_netpbm(_read(path))
    if magic in ("P1", "P4"):
        return BoundaryMap(arr)
    if arr.shape[2] != 1:
        raise FormatError(f"{path}: ground truth must be a bitmap or gray image")
    return BoundaryMap(arr[:, :, 0] > 0)


def encode_image(img: ImageBuffer) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    return magic + b"\n%d %d\n255\n" % (img.width, img.height) + img.to_bytes()


def encode_pbm(bmap: BoundaryMap) -> bytes:
    """Plain (P1) bitmap; 1 marks a boundary pixel."""
    lines = [b"P1", b"%d %d" % (bmap.width, bmap.height)]
    for row in bmap.bits:
        lines.append(b" ".join(b"1" if v else b"0" for v in row))
    return b"\n".join(lines) + b"\n"


def save_image(img: ImageBuffer, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_image(img))


def save_pbm(bmap: BoundaryMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pbm(bmap))


def format_labels(labels: LabelMap) -> str:
    body = " ".join(str(int(v)) for v in labels.labels.ravel())
    return f"{labels.width} {labels.height}\n{body}"


def parse_labels(text: str) -> LabelMap:
    head, _, body = text.partition("\n")
    try:
        w, h = (int(v) for v in head.split())
        vals = [int(v) for v in body.split()]
    except ValueError:
        raise FormatError("malformed label file") from None
    if len(vals) != w * h:
        raise FormatError(f"label file holds {len(vals)} labels, expected {w * h}")
    return LabelMap(np.array(vals, dtype=np.int64).reshape(h, w))


def save_labels(labels: LabelMap, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_labels(labels))


def load_labels(path) -> LabelMap:
    with open(path) as fh:
        return parse_labels(fh.read())


def mean_color_image(img: ImageBuffer, labels: LabelMap) -> ImageBuffer:
    """Paint every region with the rounded mean color of its pixels."""
    lab = labels.labels.ravel()
    ids, inv = np.unique(lab, return_inverse=True)
    px = img.data.reshape(-1, img.channels).astype(np.float64)
    counts = np.bincount(inv, minlength=ids.size)
    out = np.empty_like(px)
    for c in range(img.channels):
        means = np.bincount(inv, weights=px[:, c], minlength=ids.size) / counts
        out[:, c] = np.floor(means + 0.5)[inv]
    return ImageBuffer(out.reshape(img.data.shape).astype(np.uint8))


def read_config_file(path) -> Dict[str, str]:
    """``key=value`` per line; blank lines and ``#`` comments are ignored."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
