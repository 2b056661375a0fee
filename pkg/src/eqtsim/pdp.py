"""Individual description: piecewise-deterministic jump trajectories.

One trajectory step, starting from ``(t0, alpha0, psi0)`` with unit norm:

1. draw ``r`` uniform on (0, 1);
2. propagate ``psi' = (-i H - Lambda/2) psi`` until ``|psi(t1)|^2 = r``;
3. draw ``r'``;
4. walk the target sectors in ascending order and stop at the first whose
   cumulative jump probability ``|g psi|^2 / <psi, Lambda psi>`` reaches ``r'``;
5. continue from ``g psi / |g psi|`` in the target sector.

Averaging ``|psi><psi|`` over many trajectories reproduces the master
equation solution.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .algebra import DensityFamily, Model, PureState, SectorSpec
from .rng import RngStream, uniform_open

CHUNK = 256
_NO_HIST = np.empty(0)


class IntegratorError(ArithmeticError):
    """The no-jump propagation increased the norm."""


class NoJumpPossible(ValueError):
    """``<psi, Lambda psi>`` vanished where a jump was requested."""


class ZeroImage(ValueError):
    """A jump operator annihilated the state."""


def default_dt(model: Model) -> float:
    rate = model.max_rate()
    return 1e-3 / rate if rate > 0 else 1e-3


def _leg(model, idx, alpha, psi, t, t_stop, dt, r, hist=None):
    """Advance within one segment; returns ``(psi, t_reached, jumped)``."""
    K = model.generator_at(idx, alpha)
    n = max(1, math.ceil((t_stop - t) / dt - 1e-9))
    h = (t_stop - t) / n
    if hist is None:
        hist = _NO_HIST
    psi, k, s, status = _kernels.advance(K, np.ascontiguousarray(psi), h, n, r, hist)
    if status == _kernels.GROWTH:
        raise IntegratorError(f"norm increased during no-jump step {k} at t={t + k * h!r}")
    if status == _kernels.JUMP:
        return psi, min(t + k * h + s, t_stop), True
    return psi, t_stop, False


def propagate_nojump(psi0: PureState, model: Model, t0: float, t_stop: float, dt: float | None = None):
    """Unnormalized no-jump evolution from ``t0`` to ``t_stop``.

    Returns the final vector and the array of ``(t, |psi|^2)`` sampled at
    every RK4 step.
    """
    dt = dt or default_dt(model)
    psi = np.asarray(psi0.psi, dtype=np.complex128)
    t = float(t0)
    ts, ns = [t], [float(np.vdot(psi, psi).real)]
    stops = model.breakpoints(t, t_stop) + [float(t_stop)]
    for stop in stops:
        if stop <= t:
            continue
        idx = model.segment_index(t)
        n = max(1, math.ceil((stop - t) / dt - 1e-9))
        hist = np.empty(n + 1)
        psi, _, _ = _leg(model, idx, psi0.alpha, psi, t, stop, dt, -1.0, hist)
        ts.extend(np.linspace(t, stop, n + 1)[1:])
        ns.extend(hist[1:])
        t = stop
    return psi, np.column_stack([ts, ns])


def sample_jump_time(
    psi0: PureState, model: Model, t0: float, r: float, t_max: float, dt: float | None = None
) -> float | None:
    """Time ``t1`` at which ``|psi(t1)|^2 = r``, or None if it lies beyond ``t_max``."""
    if not 0.0 < r <= 1.0:
        raise ValueError(f"r must lie in (0, 1], got {r}")
    dt = dt or default_dt(model)
    psi = np.asarray(psi0.psi, dtype=np.complex128)
    t = float(t0)
    for stop in model.breakpoints(t, t_max) + [float(t_max)]:
        if stop <= t:
            continue
        psi, t, jumped = _leg(model, model.segment_index(t), psi0.alpha, psi, t, stop, dt, r)
        if jumped:
            return t
    if np.vdot(psi, psi).real <= r:
        return t
    return None


def channel_probabilities(psi, alpha: int, model: Model, t: float) -> list[tuple[int, int, float]]:
    """``(target, channel, p)`` for every outgoing channel, ascending target order."""
    idx = model.segment_index(t)
    g = model.segments[idx].g
    weights = []
    for beta, ch, gb in g.outgoing(alpha):
        v = gb @ psi
        weights.append((beta, ch, float(np.vdot(v, v).real)))
    lam = model.lambda_at(idx, alpha)
    total = float(np.vdot(psi, lam @ psi).real)
    if total <= 0.0:
        raise NoJumpPossible(f"<psi, Lambda psi> = {total!r} in sector {alpha}")
    return [(b, c, w / total) for b, c, w in weights]


def select_channel(psi, alpha: int, model: Model, r_prime: float, t: float = 0.0):
    """Target sector, channel index and operator chosen by the draw ``r_prime``.

    The first channel whose cumulative probability reaches ``r_prime`` wins;
    zero-probability channels are skipped, so a map that would annihilate
    the state is never selected.
    """
    probs = channel_probabilities(psi, alpha, model, t)
    g = model.segments[model.segment_index(t)].g
    ops = {(b, c): gb for b, c, gb in g.outgoing(alpha)}
    cum = 0.0
    last = None
    for beta, ch, p in probs:
        if p <= 0.0:
            continue
        last = (beta, ch)
        cum += p
        if cum >= r_prime:
            return beta, ch, ops[last]
    if last is None:
        raise NoJumpPossible(f"all channels out of sector {alpha} have zero weight")
    return last[0], last[1], ops[last]


def apply_jump(psi, g, beta: int) -> PureState:
    v = np.asarray(g) @ np.asarray(psi)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ZeroImage("jump operator annihilates the state")
    return PureState(beta, v / nv)


@dataclass(frozen=True)
class Event:
    t: float
    alpha_from: int
    alpha_to: int
    channel: int


@dataclass
class Trajectory:
    t0: float
    initial: PureState
    events: list[Event]
    t_final: float
    final: PureState
    seed: int | None = None
    stream: int | None = None
    snapshots: list[PureState] = field(default_factory=list)
    jump_states: list[PureState] = field(default_factory=list)

    def click_csv(self) -> str:
        return clicks_to_csv(
            [e.t for e in self.events],
            [e.channel for e in self.events],
            [e.alpha_from for e in self.events],
            [e.alpha_to for e in self.events],
        )

    def metadata(self, model: Model) -> dict:
        from .modelio import model_hash

        return {"seed": self.seed, "stream": self.stream, "model_hash": model_hash(model)}


def clicks_to_csv(times, detectors, alpha_from, alpha_to) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["event_index", "t", "detector", "alpha_from", "alpha_to"])
    for k, (t, d, a, b) in enumerate(zip(times, detectors, alpha_from, alpha_to)):
        w.writerow([k, repr(float(t)), int(d), int(a), int(b)])
    return buf.getvalue()


def run_trajectory(
    init: PureState,
    t_span: tuple[float, float],
    model: Model,
    rng: RngStream,
    dt: float | None = None,
    record_times: Sequence[float] = (),
    keep_states: bool = False,
) -> Trajectory:
    """Chain jump steps from ``t_span[0]`` until ``t_span[1]``.

    ``record_times`` (sorted, inside ``t_span``) collect normalized
    snapshots; the no-jump step grid restarts at each of them.  With
    ``keep_states`` the state right after every jump is kept as well.
    """
    t0, t_fin = map(float, t_span)
    dt = dt or default_dt(model)
    gen = rng.generator()
    alpha = init.alpha
    psi = np.array(init.psi, dtype=np.complex128)
    psi /= np.linalg.norm(psi)
    t = t0
    events: list[Event] = []
    snaps: list[PureState] = []
    kept: list[PureState] = []
    pending = [float(x) for x in record_times]
    while pending and pending[0] <= t:
        snaps.append(PureState(alpha, psi / np.linalg.norm(psi)))
        pending.pop(0)
    r = uniform_open(gen)
    while t < t_fin:
        idx = model.segment_index(t)
        t_stop = min(t_fin, model.segment_end(idx), pending[0] if pending else math.inf)
        psi, t_new, jumped = _leg(model, idx, alpha, psi, t, t_stop, dt, r)
        if jumped:
            t_jump = t_new
            if t_jump <= (events[-1].t if events else -math.inf):
                t_jump = math.nextafter(events[-1].t, math.inf)
            beta, ch, g = select_channel(psi, alpha, model, gen.random(), t_jump)
            state = apply_jump(psi, g, beta)
            events.append(Event(t_jump, alpha, beta, ch))
            if keep_states:
                kept.append(state)
            alpha, psi = beta, np.array(state.psi)
            t = t_jump
            r = uniform_open(gen)
        else:
            t = t_new
        while pending and pending[0] <= t:
            snaps.append(PureState(alpha, psi / np.linalg.norm(psi)))
            pending.pop(0)
    final = PureState(alpha, psi / np.linalg.norm(psi))
    return Trajectory(t0, init, events, t, final, rng.seed, rng.stream_id, snaps, kept)


class EnsembleAccumulator:
    """Running sums of ``|psi><psi|`` per sector at each grid time."""

    def __init__(self, spec: SectorSpec, n_times: int):
        self.spec = spec
        self.n_times = n_times
        self.sums: list[dict[int, np.ndarray]] = [{} for _ in range(n_times)]
        self.count = 0

    def add(self, snapshots: Sequence[PureState]) -> None:
        if len(snapshots) != self.n_times:
            raise ValueError("snapshot count does not match the grid")
        for k, st in enumerate(snapshots):
            proj = np.outer(st.psi, st.psi.conj())
            acc = self.sums[k]
            if st.alpha in acc:
                acc[st.alpha] = acc[st.alpha] + proj
            else:
                acc[st.alpha] = proj
        self.count += 1

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        out = EnsembleAccumulator(self.spec, self.n_times)
        for k in range(self.n_times):
            keys = sorted(set(self.sums[k]) | set(other.sums[k]))
            for a in keys:
                x, y = self.sums[k].get(a), other.sums[k].get(a)
                out.sums[k][a] = x + y if x is not None and y is not None else (x if y is None else y)
        out.count = self.count + other.count
        return out

    def finalize(self) -> list[DensityFamily]:
        if self.count == 0:
            raise ValueError("no trajectories accumulated")
        out = []
        for acc in self.sums:
            blocks = [
                acc[a] / self.count if a in acc else np.zeros((n, n), dtype=np.complex128)
                for a, n in enumerate(self.spec.dims)
            ]
            out.append(DensityFamily(self.spec, blocks))
        return out


def _pairwise(accs: list[EnsembleAccumulator]) -> EnsembleAccumulator:
    while len(accs) > 1:
        nxt = [accs[i].merge(accs[i + 1]) for i in range(0, len(accs) - 1, 2)]
        if len(accs) % 2:
            nxt.append(accs[-1])
        accs = nxt
    return accs[0]


def run_ensemble(
    init: PureState,
    t_grid: Sequence[float],
    model: Model,
    n_traj: int,
    master_seed: int,
    workers: int = 1,
    dt: float | None = None,
    t0: float | None = None,
) -> list[DensityFamily]:
    """Empirical density families at the grid times.

    Trajectory ``k`` uses stream ``(master_seed, k)``.  Trajectories are
    processed in fixed chunks of 256 and merged by a fixed pairwise tree, so
    the result is bitwise independent of ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    t_grid = [float(t) for t in t_grid]
    start = t_grid[0] if t0 is None else float(t0)
    dt = dt or default_dt(model)

    def chunk(lo: int) -> EnsembleAccumulator:
        acc = EnsembleAccumulator(model.spec, len(t_grid))
        for k in range(lo, min(lo + CHUNK, n_traj)):
            tr = run_trajectory(
                init, (start, t_grid[-1]), model, RngStream(master_seed, k), dt, t_grid
            )
            acc.add(tr.snapshots)
        return acc

    starts = range(0, n_traj, CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            accs = list(ex.map(chunk, starts))
    else:
        accs = [chunk(lo) for lo in starts]
    return _pairwise(accs).finalize()


def trajectory_metadata_json(tr: Trajectory, model: Model) -> str:
    return json.dumps(tr.metadata(model), sort_keys=True, indent=1) + "\n"
