"""Classical IFS baseline, box-counting dimension and Lyapunov estimates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bloch import DetectorConfig, chaos_game, jump_map, rotate_z
from .rng import as_generator


@dataclass(frozen=True, eq=False)
class AffineIfs:
    """Affine maps in homogeneous 3x3 form, each picked with a fixed probability."""

    maps: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        maps = np.array(self.maps, dtype=float).reshape(-1, 3, 3)
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (maps.shape[0],):
            raise ValueError("need one probability per map")
        if not np.allclose(maps[:, 2], [0.0, 0.0, 1.0], rtol=0, atol=0):
            raise ValueError("last row of every map must be (0, 0, 1)")
        if abs(probs.sum() - 1.0) > 1e-12 or (probs < 0).any():
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "probs", probs)

    def fixed_point(self, i: int) -> np.ndarray:
        A = self.maps[i]
        return np.linalg.solve(np.eye(2) - A[:2, :2], A[:2, 2])


def sierpinski_ifs() -> AffineIfs:
    offsets = [(1.0, 1.0), (1.0, 0.5), (0.5, 1.0)]
    maps = [[[0.5, 0, ax], [0, 0.5, ay], [0, 0, 1]] for ax, ay in offsets]
    return AffineIfs(maps, [1 / 3, 1 / 3, 1 / 3])


def chaos_game_affine(ifs: AffineIfs, v0, n_points: int, rng) -> np.ndarray:
    """Orbit of ``v0`` under randomly chosen maps; returns the (x, y) of every iterate."""
    gen = as_generator(rng)
    choices = gen.choice(len(ifs.probs), size=int(n_points), p=ifs.probs).astype(np.int64)
    v = np.array([v0[0], v0[1], 1.0], dtype=float)
    out = np.empty((int(n_points), 2))
    _kernels.affine_orbit(ifs.maps, choices, v, out)
    return out


@dataclass
class DimensionResult:
    estimate: float
    residual: float
    scales: list[float]
    counts: list[int]

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "residual": self.residual,
            "scales": self.scales,
            "counts": self.counts,
        }


def default_scales(points: np.ndarray) -> np.ndarray:
    lo, hi = points.min(axis=0), points.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    return diag * 2.0 ** -np.arange(3, 11)


def box_dimension(points, scales=None) -> DimensionResult:
    """Slope of ``log N(s)`` against ``log(1/s)`` on a grid anchored at the bounding box.

    ``residual`` is the RMS deviation of the log-counts from the fitted line.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0 or np.all(pts == pts[0]):
        warnings.warn("degenerate point set; dimension is 0", RuntimeWarning, stacklevel=2)
        return DimensionResult(0.0, 0.0, [], [])
    if len(pts) < 10_000:
        raise ValueError(f"need at least 10^4 points, got {len(pts)}")
    scales = default_scales(pts) if scales is None else np.asarray(scales, dtype=float)
    if len(scales) < 4 or np.log10(scales.max() / scales.min()) < 2 - 1e-9:
        raise ValueError("need at least 4 scales spanning 2 decades")
    lo = pts.min(axis=0)
    counts = []
    for s in scales:
        idx = np.floor((pts - lo) / s).astype(np.int64)
        # flatten cell indices to one integer per point
        key = np.zeros(len(idx), dtype=np.int64)
        for col in idx.T:
            key = key * (int(col.max()) + 1) + col
        counts.append(len(np.unique(key)))
    x = np.log(1.0 / scales)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DimensionResult(float(slope), resid, scales.tolist(), [int(c) for c in counts])


def _tangent_basis(r):
    """Two orthonormal tangent vectors at each point of ``r`` (shape (n, 3))."""
    helper = np.where(np.abs(r[:, [2]]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(r, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(r, e1)
    return e1, e2


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def lyapunov_estimate(
    cfg: DetectorConfig, r0, n_jumps: int, rng, h: float = 1e-6, burn_in: int = 1000
) -> float:
    """Mean log of the largest tangent-map stretch of the selected jump map.

    The tangent map at each pre-jump point is taken by central differences
    along two orthonormal tangent directions.  Rotations between jumps are
    isometries and drop out.
    """
    total = burn_in + int(n_jumps)
    points, clicks = chaos_game(cfg, r0, total, rng)
    r0 = np.asarray(r0, dtype=float)
    before = np.vstack([r0[None, :], points[:-1]])[burn_in:]
    waits = np.diff(np.concatenate([[0.0], clicks.times]))[burn_in:]
    if cfg.omega:
        before = rotate_z(before, cfg.omega * waits)
    n = cfg.directions[clicks.detectors[burn_in:]]
    eps = np.full(len(n), cfg.epsilon)
    e1, e2 = _tangent_basis(before)
    cols = []
    for e in (e1, e2):
        fp, _ = jump_map(_unit(before + h * e), n, eps)
        fm, _ = jump_map(_unit(before - h * e), n, eps)
        cols.append((fp - fm) / (2 * h))
    J = np.stack(cols, axis=-1)
    stretch = np.linalg.svd(J, compute_uv=False)[:, 0]
    return float(np.mean(np.log(stretch)))
