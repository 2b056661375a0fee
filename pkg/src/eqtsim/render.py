"""Grayscale PGM rendering of point clouds."""

from __future__ import annotations

import numpy as np

AXES = {"x": 0, "y": 1, "z": 2}


def _view_basis(axis: str):
    sign = -1.0 if axis.startswith("-") else 1.0
    k = AXES[axis.lstrip("+-")]
    view = np.zeros(3)
    view[k] = sign
    # right-handed (right, up, view): for view +z the picture is the xy plane
    up = np.array([0.0, 0.0, 1.0]) if k != 2 else np.array([0.0, 1.0, 0.0])
    right = np.cross(up, view)
    return right, up


def project(points, axis: str = "+y") -> np.ndarray:
    """Orthographic image-plane coordinates ``(u, v)`` looking down ``axis``."""
    right, up = _view_basis(axis)
    pts = np.asarray(points, dtype=float)
    return np.column_stack([pts @ right, pts @ up])


def hit_counts(uv, size: int = 512, window=(0.0, 0.0, 2.0)) -> np.ndarray:
    """Per-pixel counts over the square ``window = (cx, cy, width)``; row 0 is the top."""
    cx, cy, w = window
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    col = np.floor((uv[:, 0] - (cx - w / 2)) / w * size).astype(np.int64)
    row = np.floor(((cy + w / 2) - uv[:, 1]) / w * size).astype(np.int64)
    ok = (col >= 0) & (col < size) & (row >= 0) & (row < size)
    img = np.zeros(size * size, dtype=np.int64)
    np.add.at(img, row[ok] * size + col[ok], 1)
    return img.reshape(size, size)


def tone_map(counts: np.ndarray) -> np.ndarray:
    """``log(1 + count)`` scaled to 0..255, dark points on a white background."""
    lg = np.log1p(counts.astype(float))
    top = lg.max()
    if top == 0:
        return np.full(counts.shape, 255, dtype=np.uint8)
    return (255 - np.round(255 * lg / top)).astype(np.uint8)


def pgm_bytes(gray: np.ndarray) -> bytes:
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(gray, dtype=np.uint8).tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise ValueError("not an 8-bit binary PGM")
    w, h = int(fields[1]), int(fields[2])
    body = data[pos + 1 : pos + 1 + w * h]
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


def render_pgm(points, axis: str = "+y", size: int = 512, window=(0.0, 0.0, 2.0)) -> bytes:
    return pgm_bytes(tone_map(hit_counts(project(points, axis), size, window)))


def rotation_chi2(counts: np.ndarray) -> float:
    """Normalized chi^2 per occupied pixel between an image and its 90-degree rotation."""
    rot = np.rot90(counts)
    tot = counts + rot
    m = tot > 0
    if not m.any():
        return 0.0
    return float((((counts - rot) ** 2)[m] / tot[m]).sum() / m.sum())
