"""Ensemble evolution: fixed-step RK4 on the master equation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import DensityFamily, Model, StructureError, liouville_rhs


class NumericalBlowup(ArithmeticError):
    def __init__(self, step: int, message: str = "non-finite value"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class PositivityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    renorm_interval: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.renorm_interval < 1:
            raise ValueError("renorm_interval must be >= 1")

    @classmethod
    def for_model(cls, model: Model, **kw) -> "IntegratorConfig":
        """Default step ``1e-3 / kappa_max``, ``kappa_max`` the largest jump rate."""
        rate = model.max_rate()
        return cls(dt=1e-3 / rate if rate > 0 else 1e-3, **kw)


class _Blocks:
    __slots__ = ("spec", "blocks")

    def __init__(self, spec, blocks):
        self.spec = spec
        self.blocks = blocks


def _rk4_step(spec, blocks, seg, lam, h):
    def f(bs):
        return liouville_rhs(_Blocks(spec, bs), seg.H, seg.g, lam)

    k1 = f(blocks)
    k2 = f([b + 0.5 * h * k for b, k in zip(blocks, k1)])
    k3 = f([b + 0.5 * h * k for b, k in zip(blocks, k2)])
    k4 = f([b + h * k for b, k in zip(blocks, k3)])
    return [
        b + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        for b, a1, a2, a3, a4 in zip(blocks, k1, k2, k3, k4)
    ]


def _check_positive(spec, blocks, t, tol=1e-8):
    lo = min(
        (np.linalg.eigvalsh((b + b.conj().T) / 2).min() for b in blocks if b.size),
        default=0.0,
    )
    if lo < -tol:
        raise PositivityError(f"eigenvalue {lo:.3e} < -{tol:g} at t={t!r}")


def evolve_grid(
    rho0: DensityFamily,
    model: Model,
    t_grid: Sequence[float],
    cfg: IntegratorConfig | None = None,
    t0: float | None = None,
) -> list[DensityFamily]:
    """Integrate from ``t0`` (default ``t_grid[0]``) and sample at every grid time.

    Each interval between consecutive stops (grid times and schedule
    breakpoints) is cut into ``ceil(len / dt)`` equal RK4 steps.
    """
    if rho0.spec != model.spec:
        raise StructureError("initial state and model have different sector specs")
    cfg = cfg or IntegratorConfig.for_model(model)
    t_grid = [float(t) for t in t_grid]
    t = t_grid[0] if t0 is None else float(t0)
    if any(b < a for a, b in zip([t] + t_grid, t_grid)):
        raise ValueError("time grid must be nondecreasing and start at or after t0")
    spec = model.spec
    blocks = [np.array(b) for b in rho0.blocks]
    out = []
    step = 0
    for t_next in t_grid:
        stops = model.breakpoints(t, t_next) + [t_next]
        for t_stop in stops:
            if t_stop <= t:
                continue
            idx = model.segment_index(t)
            seg = model.segments[idx]
            lam = model.lambda_(idx)
            n = max(1, math.ceil((t_stop - t) / cfg.dt - 1e-9))
            h = (t_stop - t) / n
            for _ in range(n):
                with np.errstate(over="ignore", invalid="ignore"):
                    blocks = _rk4_step(spec, blocks, seg, lam, h)
                step += 1
                if not all(np.all(np.isfinite(b)) for b in blocks):
                    raise NumericalBlowup(step)
                if step % cfg.renorm_interval == 0:
                    blocks = [(b + b.conj().T) / 2 for b in blocks]
            t = t_stop
        _check_positive(spec, blocks, t)
        out.append(DensityFamily(spec, [b.copy() for b in blocks]))
    return out


def evolve_density(
    rho0: DensityFamily,
    model: Model,
    t_span: tuple[float, float],
    cfg: IntegratorConfig | None = None,
) -> DensityFamily:
    """State at ``t_span[1]`` starting from ``rho0`` at ``t_span[0]``."""
    t0, t1 = t_span
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    if t1 == t0:
        return rho0
    return evolve_grid(rho0, model, [t1], cfg, t0=t0)[0]


def trace_distance(a: DensityFamily, b: DensityFamily) -> float:
    """Half the summed trace norms of the blockwise differences."""
    if a.spec != b.spec:
        raise StructureError("density families have different sector specs")
    total = 0.0
    for x, y in zip(a.blocks, b.blocks):
        if x.size:
            total += float(np.linalg.svd(x - y, compute_uv=False).sum())
    return 0.5 * total
