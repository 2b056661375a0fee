"""Block-diagonal operator algebra over classical sectors.

A total Hilbert space is the direct sum of finite-dimensional sectors, one
per classical state ``alpha``.  Operators, density matrices and the
inter-sector couplings ``g[alpha, beta]: H_beta -> H_alpha`` are stored
sector by sector; the full direct sum is never materialized.

Sector labels are 0-based integers.  Coupling entries are keyed
``(target, source, channel)`` so that ``g[(a, b, c)]`` is the c-th parallel
channel carrying sector ``b`` into sector ``a``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
POSITIVE_TOL = 1e-10


class StructureError(ValueError):
    """Shapes or sector specs do not fit together."""


class ValidationError(ValueError):
    """An object violates a documented invariant (hermiticity, trace, ...)."""


@dataclass(frozen=True)
class SectorSpec:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1:
            raise StructureError("need at least one sector")
        if any(d < 1 for d in dims):
            raise StructureError(f"sector dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def uniform(cls, m: int, n: int) -> "SectorSpec":
        return cls((n,) * m)

    @property
    def m(self) -> int:
        return len(self.dims)

    def dim(self, alpha: int) -> int:
        return self.dims[alpha]


class _Repeated(Sequence):
    """Read-only sequence returning one shared block for every index."""

    def __init__(self, block: np.ndarray, m: int):
        self._block = block
        self._m = m

    def __len__(self):
        return self._m

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._block] * len(range(*i.indices(self._m)))
        if not -self._m <= i < self._m:
            raise IndexError(i)
        return self._block


def _as_block(a) -> np.ndarray:
    arr = np.array(a, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def _check_blocks(spec: SectorSpec, blocks: Sequence[np.ndarray]):
    if len(blocks) != spec.m:
        raise StructureError(f"expected {spec.m} blocks, got {len(blocks)}")
    if isinstance(blocks, _Repeated):
        blocks = blocks[:1]
    for alpha, b in enumerate(blocks):
        n = spec.dims[alpha]
        if b.shape != (n, n):
            raise StructureError(f"block {alpha} has shape {b.shape}, expected {(n, n)}")


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Family ``{A_alpha}`` of square matrices, one per sector."""

    spec: SectorSpec
    blocks: Sequence[np.ndarray]

    def __post_init__(self):
        if not isinstance(self.blocks, _Repeated):
            object.__setattr__(self, "blocks", tuple(_as_block(b) for b in self.blocks))
        _check_blocks(self.spec, self.blocks)

    @classmethod
    def zeros(cls, spec: SectorSpec) -> "BlockOperator":
        return cls(spec, [np.zeros((n, n)) for n in spec.dims])

    @classmethod
    def repeated(cls, spec: SectorSpec, block) -> "BlockOperator":
        """Same block in every sector, stored once (for 2**N-sector register models)."""
        if len(set(spec.dims)) != 1:
            raise StructureError("repeated blocks need equal sector dimensions")
        return cls(spec, _Repeated(_as_block(block), spec.m))

    def __getitem__(self, alpha: int) -> np.ndarray:
        return self.blocks[alpha]

    def _distinct(self) -> Iterable[np.ndarray]:
        return self.blocks[:1] if isinstance(self.blocks, _Repeated) else self.blocks

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return all(np.max(np.abs(b - b.conj().T), initial=0.0) <= tol for b in self._distinct())

    def is_positive(self, tol: float = POSITIVE_TOL) -> bool:
        if not self.is_hermitian(max(tol, HERMITIAN_TOL)):
            return False
        return all(
            np.linalg.eigvalsh((b + b.conj().T) / 2).min() >= -tol for b in self._distinct()
        )

    def validate(self, hermitian: bool = False, positive: bool = False) -> "BlockOperator":
        if hermitian and not self.is_hermitian():
            raise ValidationError("operator is not Hermitian")
        if positive and not self.is_positive():
            raise ValidationError("operator is not positive semidefinite")
        return self


@dataclass(frozen=True, eq=False)
class DensityFamily:
    """Statistical state ``{rho_alpha}`` with total trace one."""

    spec: SectorSpec
    blocks: Sequence[np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(_as_block(b) for b in self.blocks))
        _check_blocks(self.spec, self.blocks)

    @classmethod
    def pure(cls, spec: SectorSpec, alpha: int, psi) -> "DensityFamily":
        psi = np.asarray(psi, dtype=np.complex128)
        psi = psi / np.linalg.norm(psi)
        blocks = [np.zeros((n, n), dtype=np.complex128) for n in spec.dims]
        blocks[alpha] = np.outer(psi, psi.conj())
        return cls(spec, blocks)

    def __getitem__(self, alpha: int) -> np.ndarray:
        return self.blocks[alpha]

    def total_trace(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks))

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh((b + b.conj().T) / 2).min() for b in self.blocks))

    def validate(
        self, herm_tol: float = 1e-12, eig_tol: float = 1e-10, trace_tol: float = 1e-10
    ) -> "DensityFamily":
        for alpha, b in enumerate(self.blocks):
            if np.max(np.abs(b - b.conj().T), initial=0.0) > herm_tol:
                raise ValidationError(f"rho[{alpha}] is not Hermitian")
        if self.min_eigenvalue() < -eig_tol:
            raise ValidationError(f"negative eigenvalue {self.min_eigenvalue():.3e}")
        if abs(self.total_trace() - 1.0) > trace_tol:
            raise ValidationError(f"total trace {self.total_trace()!r} != 1")
        return self


@dataclass(frozen=True)
class PureState:
    alpha: int
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi", _as_block(self.psi))

    def normalized(self) -> "PureState":
        return PureState(self.alpha, self.psi / np.linalg.norm(self.psi))

    def projector(self, spec: SectorSpec) -> DensityFamily:
        return DensityFamily.pure(spec, self.alpha, self.psi)


def _key(k) -> tuple[int, int, int]:
    if isinstance(k, str):
        k = tuple(int(s) for s in k.split(","))
    if len(k) == 2:
        return (int(k[0]), int(k[1]), 0)
    if len(k) == 3:
        return (int(k[0]), int(k[1]), int(k[2]))
    raise StructureError(f"bad coupling key {k!r}")


class CouplingMap:
    """Sparse family of transition operators ``g[alpha, beta]: H_beta -> H_alpha``.

    Parallel channels between the same pair of sectors are kept apart under
    distinct channel indices.  The master equation only sees their sum, but
    the jump process reports which channel fired.
    """

    def __init__(self, spec: SectorSpec, entries: Mapping | None = None):
        self.spec = spec
        self._entries: dict[tuple[int, int, int], np.ndarray] = {}
        for k, g in (entries or {}).items():
            a, b, c = _key(k)
            if not (0 <= a < spec.m and 0 <= b < spec.m):
                raise StructureError(f"coupling {(a, b, c)} refers to a missing sector")
            g = _as_block(g)
            if g.shape != (spec.dims[a], spec.dims[b]):
                raise StructureError(
                    f"coupling {(a, b, c)} has shape {g.shape}, "
                    f"expected {(spec.dims[a], spec.dims[b])}"
                )
            if a == b and np.any(g != 0):
                raise StructureError(f"diagonal coupling {(a, b, c)} must vanish")
            if a != b:
                self._entries[(a, b, c)] = g
        self._out: dict[int, list] = {}
        self._in: dict[int, list] = {}
        for (a, b, c), g in sorted(self._entries.items()):
            self._out.setdefault(b, []).append((a, c, g))
            self._in.setdefault(a, []).append((b, c, g))

    def __len__(self):
        return len(self._entries)

    def items(self) -> Iterator[tuple[tuple[int, int, int], np.ndarray]]:
        return iter(sorted(self._entries.items()))

    def outgoing(self, alpha: int) -> list[tuple[int, int, np.ndarray]]:
        """``(target, channel, g[target, alpha])`` in ascending target order."""
        return self._out.get(alpha, [])

    def incoming(self, alpha: int) -> list[tuple[int, int, np.ndarray]]:
        """``(source, channel, g[alpha, source])``."""
        return self._in.get(alpha, [])

    def validate(self) -> "CouplingMap":
        # shapes and vanishing diagonal are enforced on construction
        return self


class RegisterCouplingMap(CouplingMap):
    """Couplings of a spin-1/2 monitored by N two-state detectors.

    Sector ``alpha`` is the N-bit detector register.  Flipping bit ``i``
    applies ``ops[i]``, whatever the other bits are.  Entries are generated
    on demand, so 2**N sectors cost nothing until visited.
    """

    def __init__(self, ops: Sequence[np.ndarray]):
        self.ops = tuple(_as_block(op) for op in ops)
        self.n_detectors = len(self.ops)
        dim = self.ops[0].shape[0]
        self.spec = SectorSpec.uniform(2 ** self.n_detectors, dim)

    def __len__(self):
        return self.spec.m * self.n_detectors

    def items(self):
        for b in range(self.spec.m):
            for a, c, g in self.outgoing(b):
                yield (a, b, c), g

    def outgoing(self, alpha):
        out = [(alpha ^ (1 << i), i, op) for i, op in enumerate(self.ops)]
        out.sort(key=lambda e: e[0])
        return out

    def incoming(self, alpha):
        return [(alpha ^ (1 << i), i, op) for i, op in enumerate(self.ops)]


def lambda_block(g: CouplingMap, alpha: int) -> np.ndarray:
    """``Lambda_alpha = sum_beta g[beta, alpha]^dagger g[beta, alpha]``."""
    n = g.spec.dims[alpha]
    lam = np.zeros((n, n), dtype=np.complex128)
    for _, _, gb in g.outgoing(alpha):
        lam += gb.conj().T @ gb
    return lam


def build_lambda(g: CouplingMap) -> BlockOperator:
    """Jump-rate operator for every sector.

    Sectors without outgoing couplings get a zero block.
    """
    if isinstance(g, RegisterCouplingMap):
        return BlockOperator.repeated(g.spec, lambda_block(g, 0))
    return BlockOperator(g.spec, [lambda_block(g, a) for a in range(g.spec.m)])


def _same_spec(*objs):
    spec = objs[0].spec
    for o in objs[1:]:
        if o.spec != spec:
            raise StructureError("arguments do not share one SectorSpec")
    return spec


def liouville_rhs(rho, H: BlockOperator, g: CouplingMap, Lambda: BlockOperator) -> list[np.ndarray]:
    """Time derivative of a density family under the master equation.

    ``rho`` may be a DensityFamily or anything with ``spec`` and ``blocks``.
    Trace is conserved exactly: the gain term into ``alpha`` balances the
    anticommutator loss out of every source sector.
    """
    spec = _same_spec(rho, H, g, Lambda)
    out = []
    for alpha in range(spec.m):
        r = rho.blocks[alpha]
        h = H.blocks[alpha]
        lam = Lambda.blocks[alpha]
        d = -1j * (h @ r - r @ h) - 0.5 * (lam @ r + r @ lam)
        for beta, _, gab in g.incoming(alpha):
            d = d + gab @ rho.blocks[beta] @ gab.conj().T
        out.append(d)
    return out


def effective_generator(H: BlockOperator, Lambda: BlockOperator) -> BlockOperator:
    """No-jump generator ``K_alpha = -i H_alpha - Lambda_alpha / 2``."""
    _same_spec(H, Lambda)
    if not H.is_hermitian():
        raise ValidationError("Hamiltonian is not Hermitian")
    if isinstance(H.blocks, _Repeated) and isinstance(Lambda.blocks, _Repeated):
        return BlockOperator.repeated(H.spec, -1j * H[0] - 0.5 * Lambda[0])
    return BlockOperator(
        H.spec, [-1j * h - 0.5 * lam for h, lam in zip(H.blocks, Lambda.blocks)]
    )


@dataclass(frozen=True, eq=False)
class Segment:
    t_start: float
    H: BlockOperator
    g: CouplingMap


@dataclass(eq=False)
class Model:
    """Piecewise-constant schedule of ``(H, g)`` segments.

    The first segment extends to ``-inf``; each later segment takes over at
    its ``t_start``.  ``Lambda`` and ``K`` are derived per segment and cached.
    """

    segments: tuple[Segment, ...]
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise StructureError("model needs at least one segment")
        spec = segs[0].H.spec
        for s in segs:
            if s.H.spec != spec or s.g.spec != spec:
                raise StructureError("segments do not share one SectorSpec")
        starts = [s.t_start for s in segs[1:]]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise StructureError("segment start times must be strictly increasing")
        self.segments = segs
        self._starts = starts

    @classmethod
    def constant(cls, H: BlockOperator, g: CouplingMap) -> "Model":
        return cls((Segment(-math.inf, H, g),))

    @property
    def spec(self) -> SectorSpec:
        return self.segments[0].H.spec

    def segment_index(self, t: float) -> int:
        return bisect.bisect_right(self._starts, t)

    def segment_end(self, idx: int) -> float:
        return self._starts[idx] if idx < len(self._starts) else math.inf

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        return [t for t in self._starts if t0 < t < t1]

    def lambda_(self, idx: int) -> BlockOperator:
        key = ("lambda", idx)
        if key not in self._cache:
            self._cache[key] = build_lambda(self.segments[idx].g)
        return self._cache[key]

    def lambda_at(self, idx: int, alpha: int) -> np.ndarray:
        key = ("lambda", idx, alpha)
        if key not in self._cache:
            g = self.segments[idx].g
            if isinstance(g, RegisterCouplingMap):
                self._cache[key] = self.lambda_(idx)[alpha]
            else:
                self._cache[key] = lambda_block(g, alpha)
        return self._cache[key]

    def generator_at(self, idx: int, alpha: int) -> np.ndarray:
        """``K_alpha`` of segment ``idx`` as a contiguous complex matrix."""
        key = ("K", idx, alpha)
        if key not in self._cache:
            h = self.segments[idx].H[alpha]
            if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise ValidationError(f"Hamiltonian block {alpha} is not Hermitian")
            k = -1j * h - 0.5 * self.lambda_at(idx, alpha)
            self._cache[key] = np.ascontiguousarray(k)
        return self._cache[key]

    def max_rate(self) -> float:
        """Largest eigenvalue of any ``Lambda_alpha`` over all segments."""
        top = 0.0
        for idx in range(len(self.segments)):
            for b in self.lambda_(idx)._distinct():
                if b.size:
                    top = max(top, float(np.linalg.eigvalsh(b).max()))
        return top
