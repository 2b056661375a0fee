"""A Gaussian particle detector on a 1-D wavefunction grid.

The detector profile is ``g(x) = sqrt(kappa) (sigma sqrt(pi))^(-1/2)
exp(-x^2 / 2 sigma^2)``, so ``integral g^2 dx = kappa`` for any width.  The
click probability over a short exposure ``dt`` is ``dt * integral g^2 |psi|^2``,
which tends to ``kappa |psi(a)|^2 dt`` as ``sigma -> 0``.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid


class ResolutionError(ValueError):
    """The grid is too coarse to resolve the detector profile."""


@dataclass(frozen=True)
class GaussianDetector:
    kappa: float
    sigma: float
    position: float | Callable[[float], float] = 0.0

    def __post_init__(self):
        if not self.kappa > 0 or not self.sigma > 0:
            raise ValueError("kappa and sigma must be positive")

    def center(self, t: float) -> float:
        return float(self.position(t)) if callable(self.position) else float(self.position)

    def profile(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float) - self.center(t)
        pref = np.sqrt(self.kappa) * (1.0 / (self.sigma * np.sqrt(np.pi))) ** 0.5
        return pref * np.exp(-(x**2) / (2 * self.sigma**2))


def piecewise_linear(times: Sequence[float], positions: Sequence[float]) -> Callable[[float], float]:
    """Detector path through ``(times[k], positions[k])``, held constant outside."""
    ts = np.asarray(times, dtype=float)
    xs = np.asarray(positions, dtype=float)
    return lambda t: float(np.interp(t, ts, xs))


@dataclass(frozen=True, eq=False)
class GridWavefunction:
    x_min: float
    dx: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex128))

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(len(self.samples))

    @classmethod
    def from_function(cls, f, x_min: float, x_max: float, n: int, normalize: bool = True):
        x = np.linspace(x_min, x_max, n)
        psi = cls(x_min, x[1] - x[0], f(x))
        return psi.normalized() if normalize else psi

    def norm2(self) -> float:
        return float(trapezoid(np.abs(self.samples) ** 2, dx=self.dx))

    def normalized(self) -> "GridWavefunction":
        return GridWavefunction(self.x_min, self.dx, self.samples / np.sqrt(self.norm2()))

    def value_at(self, a: float) -> complex:
        x = self.x
        return complex(
            np.interp(a, x, self.samples.real) + 1j * np.interp(a, x, self.samples.imag)
        )

    def validate(self, tol: float = 1e-10) -> "GridWavefunction":
        if abs(self.norm2() - 1.0) > tol:
            raise ValueError(f"wavefunction norm {self.norm2()!r} != 1")
        return self

    @classmethod
    def read_csv(cls, path) -> "GridWavefunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        x = data[:, 0]
        dx = np.diff(x)
        if not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
            raise ValueError("wavefunction grid must be uniform")
        return cls(float(x[0]), float(dx[0]), data[:, 1] + 1j * data[:, 2])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "re", "im"])
        for x, z in zip(self.x, self.samples):
            w.writerow([repr(float(x)), repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()


def detection_probability(psi: GridWavefunction, det: GaussianDetector, t0: float, dt: float) -> float:
    if det.sigma < 3 * psi.dx:
        raise ResolutionError(f"sigma={det.sigma} is below 3 grid spacings (dx={psi.dx})")
    if det.kappa * dt > 0.1:
        warnings.warn("kappa*dt > 0.1: first-order detection formula is inaccurate", stacklevel=2)
    g = det.profile(psi.x, t0)
    return float(trapezoid(g**2 * np.abs(psi.samples) ** 2, dx=psi.dx) * dt)


def born_limit_check(psi: GridWavefunction, a: float, kappas, sigmas, dt: float) -> list[dict]:
    """Detection probability against the sharp-detector value for every (kappa, sigma)."""
    rows = []
    density = abs(psi.value_at(a)) ** 2
    for kappa in np.atleast_1d(kappas):
        for sigma in sigmas:
            p = detection_probability(psi, GaussianDetector(float(kappa), float(sigma), a), 0.0, dt)
            born = float(kappa) * density * dt
            rel = abs(p - born) / born if born > 0 else float("nan")
            rows.append({"kappa": float(kappa), "sigma": float(sigma), "p": p,
                         "born": born, "rel_error": rel})
    return rows


def table_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) for k, v in r.items()})
    return buf.getvalue()
