"""Spin-1/2 monitored by fuzzy yes/no detectors.

Pure states are unit Bloch vectors ``r`` with projector ``(I + r.sigma)/2``.
Detector ``i`` responds through ``a_i = (I + eps n_i.sigma)/2``.  When the
directions sum to zero the total jump rate is state independent, and the
whole process reduces to a chaos game on the sphere.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .algebra import BlockOperator, Model, RegisterCouplingMap, Segment
from .pdp import clicks_to_csv
from .rng import RngStream, as_generator

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
IDENTITY = np.eye(2, dtype=np.complex128)

ZERO_SUM_TOL = 1e-9
UNIT_TOL = 1e-12

GOLDEN = (1 + 5**0.5) / 2

OCTAHEDRON = ((0, 0, 1), (1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0), (0, 0, -1))


class AnnihilationError(ValueError):
    """A sharp projection hit the antipodal state."""


def _dodecahedron():
    v = [(x, y, z) for x in (1, -1) for y in (1, -1) for z in (1, -1)]
    a, b = 1 / GOLDEN, GOLDEN
    for s in (1, -1):
        for t in (1, -1):
            v += [(0, s * a, t * b), (s * a, t * b, 0), (s * b, 0, t * a)]
    return tuple(tuple(c / 3**0.5 for c in p) for p in v)


BUILTIN = {
    "octahedron": OCTAHEDRON,
    "square": OCTAHEDRON[1:5],
    "dodecahedron": _dodecahedron(),
}


def bloch_projector(r) -> np.ndarray:
    """``(I + r.sigma)/2`` for one vector or a stack of shape (..., 3)."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (IDENTITY + np.tensordot(r, PAULI, axes=([-1], [0])))


def fuzzy_projection(n, eps: float, strict: bool = True) -> np.ndarray:
    """Detector operator ``(I + eps n.sigma)/2``; eigenvalues ``(1 +- eps)/2``."""
    if strict and not 0.0 < eps <= 1.0:
        raise ValueError(f"fuzziness must lie in (0, 1], got {eps}")
    n = np.asarray(n, dtype=float)
    if strict and abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise ValueError("detector direction must be a unit vector")
    return 0.5 * (IDENTITY + eps * np.tensordot(n, PAULI, axes=([-1], [0])))


def bloch_vector(psi) -> np.ndarray:
    """Expectation of the Pauli vector in the normalized spinor(s) ``psi``."""
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi, axis=-1, keepdims=True)
    return np.einsum("...i,kij,...j->...k", psi.conj(), PAULI, psi).real


def spinor(r) -> np.ndarray:
    """``(cos(theta/2), exp(i phi) sin(theta/2))`` for Bloch vector(s) ``r``."""
    r = np.asarray(r, dtype=float)
    theta = np.arccos(np.clip(r[..., 2], -1.0, 1.0))
    phi = np.arctan2(r[..., 1], r[..., 0])
    return np.stack([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


def jump_map(r, n, eps):
    """Post-jump Bloch vector and weight after detector ``(n, eps)`` fires.

    Broadcasts over leading axes.  Returns ``(r_prime, lam)`` with
    ``lam P(r_prime) = a P(r) a``.
    """
    r = np.asarray(r, dtype=float)
    n = np.asarray(n, dtype=float)
    eps = np.asarray(eps, dtype=float)
    nr = np.sum(n * r, axis=-1)
    denom = 1.0 + eps**2 + 2.0 * eps * nr
    if np.any(denom <= 0.0):
        raise AnnihilationError("sharp detector annihilates the antipodal state")
    num = (1.0 - eps**2)[..., None] * r + (2.0 * eps * (1.0 + eps * nr))[..., None] * n
    return num / denom[..., None], denom / 4.0


def hilbert_oracle_jump(r, n, eps) -> np.ndarray:
    """Same map computed the long way: spinor, 2x2 matrix, normalize, read off."""
    psi = spinor(r)
    a = fuzzy_projection(n, 1.0, strict=False)
    a = 0.5 * IDENTITY + (np.asarray(eps, dtype=float)[..., None, None]) * (a - 0.5 * IDENTITY)
    v = np.einsum("...ij,...j->...i", a, psi)
    nv = np.linalg.norm(v, axis=-1)
    # the spinor of an exact pole carries ~1e-17 residue in the other component
    if np.any(nv <= 1e-12):
        raise AnnihilationError("detector operator annihilates the state")
    return bloch_vector(v / nv[..., None])


@dataclass(frozen=True)
class RegisterState:
    bits: int = 0

    def flip(self, i: int) -> "RegisterState":
        return RegisterState(self.bits ^ (1 << i))

    def hamming(self, other: "RegisterState") -> int:
        return bin(self.bits ^ other.bits).count("1")


@dataclass(frozen=True, eq=False)
class DetectorConfig:
    directions: np.ndarray
    epsilon: float
    kappa: float = 1.0
    omega: float = 0.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        d = np.array(self.directions, dtype=float).reshape(-1, 3)
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    @property
    def n(self) -> int:
        return self.directions.shape[0]

    @property
    def zero_sum(self) -> bool:
        return bool(np.linalg.norm(self.directions.sum(axis=0)) <= ZERO_SUM_TOL)

    @property
    def jump_rate(self) -> float:
        """Total jump rate ``kappa N (1 + eps^2) / 4`` of a zero-sum set."""
        return self.kappa * self.n * (1.0 + self.epsilon**2) / 4.0

    def validate(self) -> "DetectorConfig":
        if self.n < 1:
            raise ValueError("need at least one detector")
        bad = np.abs(np.linalg.norm(self.directions, axis=1) - 1.0) > UNIT_TOL
        if bad.any():
            raise ValueError(f"directions {np.flatnonzero(bad).tolist()} are not unit vectors")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        return self

    def operators(self) -> list[np.ndarray]:
        return [fuzzy_projection(n, self.epsilon, strict=False) for n in self.directions]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "directions": self.directions.tolist(),
            "epsilon": float(self.epsilon),
            "kappa": float(self.kappa),
            "omega": float(self.omega),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        return cls(d["directions"], d["epsilon"], d.get("kappa", 1.0), d.get("omega", 0.0),
                   d.get("name", "custom"))


def builtin_config(name: str, eps: float, kappa: float = 1.0, omega: float = 0.0) -> DetectorConfig:
    try:
        dirs = BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown configuration {name!r}; choose from {sorted(BUILTIN)}") from None
    return DetectorConfig(dirs, eps, kappa, omega, name).validate()


def register_coupling(cfg: DetectorConfig) -> RegisterCouplingMap:
    """``g[alpha ^ (1 << i), alpha] = sqrt(kappa) a_i`` for every register state."""
    if cfg.n > 62:
        raise ValueError("at most 62 detectors fit in the register")
    return RegisterCouplingMap([np.sqrt(cfg.kappa) * a for a in cfg.operators()])


def spin_model(cfg: DetectorConfig) -> Model:
    """Hilbert-space model: ``H = (omega/2) sigma_z`` in all ``2**N`` sectors."""
    g = register_coupling(cfg)
    H = BlockOperator.repeated(g.spec, 0.5 * cfg.omega * SIGMA_Z)
    model = Model((Segment(-np.inf, H, g),))
    model.detector_config = cfg
    return model


def jump_probabilities(r, cfg: DetectorConfig) -> np.ndarray:
    """``p_i = (1 + eps^2 + 2 eps n_i.r) / (N (1 + eps^2))``; broadcasts over ``r``."""
    if not cfg.zero_sum:
        raise ValueError(
            "closed-form probabilities need zero-sum directions; "
            "use the Hilbert-space engine for this configuration"
        )
    eps = cfg.epsilon
    nr = np.asarray(r, dtype=float) @ cfg.directions.T
    return (1.0 + eps**2 + 2.0 * eps * nr) / (cfg.n * (1.0 + eps**2))


def rotate_z(r, angle):
    r = np.asarray(r, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([c * r[..., 0] - s * r[..., 1], s * r[..., 0] + c * r[..., 1], r[..., 2]], axis=-1)


@dataclass
class ClickRecord:
    """Time-ordered detector flips with the register before/after each one."""

    times: np.ndarray
    detectors: np.ndarray
    alpha_from: np.ndarray
    alpha_to: np.ndarray
    seed: int | None = None
    stream: int | None = None

    def __len__(self):
        return len(self.times)

    def to_csv(self) -> str:
        return clicks_to_csv(self.times, self.detectors, self.alpha_from, self.alpha_to)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def register_path(detectors, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    flips = np.left_shift(np.int64(1), np.asarray(detectors, dtype=np.int64))
    after = np.bitwise_xor.accumulate(np.concatenate([[start], flips]).astype(np.int64))
    return after[:-1], after[1:]


def chaos_game(
    cfg: DetectorConfig,
    r0,
    n_jumps: int,
    rng,
    t0: float = 0.0,
    register0: int = 0,
) -> tuple[np.ndarray, ClickRecord]:
    """Post-jump Bloch vectors and the click record of one long sample path.

    Waiting times are exponential with the state-independent total rate;
    between clicks the state precesses about z by ``omega`` times the wait.
    ``rng`` is an RngStream, a numpy Generator or an integer seed.
    """
    if not cfg.zero_sum:
        raise ValueError("the chaos-game fast path needs zero-sum directions")
    gen = as_generator(rng)
    n_jumps = int(n_jumps)
    waits = gen.exponential(1.0 / cfg.jump_rate, n_jumps)
    us = gen.random(n_jumps)
    points = np.empty((n_jumps, 3))
    dets = np.empty(n_jumps, dtype=np.int64)
    r0 = np.asarray(r0, dtype=float)
    _kernels.chaos_game(
        np.ascontiguousarray(cfg.directions), float(cfg.epsilon), float(cfg.omega),
        r0, waits, us, points, dets,
    )
    times = t0 + np.cumsum(waits)
    a_from, a_to = register_path(dets, register0)
    seed = rng.seed if isinstance(rng, RngStream) else None
    stream = rng.stream_id if isinstance(rng, RngStream) else None
    return points, ClickRecord(times, dets, a_from, a_to, seed, stream)


def replay_clicks(cfg: DetectorConfig, r0, times, detectors, t0: float = 0.0) -> np.ndarray:
    """Bloch vectors after each click of a given record (deterministic replay)."""
    r = np.asarray(r0, dtype=float)
    out = np.empty((len(times), 3))
    t = t0
    for k, (tk, i) in enumerate(zip(times, detectors)):
        r = rotate_z(r, cfg.omega * (tk - t))
        r, _ = jump_map(r, cfg.directions[i], cfg.epsilon)
        out[k] = r
        t = tk
    return out


def points_to_bytes(points: np.ndarray) -> bytes:
    """Little-endian float64 ``x, y, z`` triples."""
    return np.ascontiguousarray(points, dtype="<f8").tobytes()


def points_from_bytes(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype="<f8").reshape(-1, 3).copy()


def points_to_csv(points: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("x,y,z\n")
    for x, y, z in np.asarray(points, dtype=float).tolist():
        buf.write(f"{x!r},{y!r},{z!r}\n")
    return buf.getvalue()
