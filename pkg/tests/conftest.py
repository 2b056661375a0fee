import numpy as np
import pytest

from eqtsim.algebra import CouplingMap, DensityFamily, SectorSpec


def random_unit(rng, size=None):
    v = rng.standard_normal((3,) if size is None else (size, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_matrix(rng, rows, cols, scale=1.0):
    return scale * (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols)))


def random_hermitian(rng, n):
    a = random_matrix(rng, n, n)
    return (a + a.conj().T) / 2


def random_density(rng, spec):
    blocks = []
    for n in spec.dims:
        a = random_matrix(rng, n, n)
        blocks.append(a @ a.conj().T)
    total = sum(np.trace(b).real for b in blocks)
    blocks = [b / total for b in blocks]
    blocks = [(b + b.conj().T) / 2 for b in blocks]
    return DensityFamily(spec, blocks)


def random_coupling(rng, spec, density=0.6, scale=0.5):
    entries = {}
    for a in range(spec.m):
        for b in range(spec.m):
            if a != b and rng.random() < density:
                entries[(a, b)] = random_matrix(rng, spec.dims[a], spec.dims[b], scale)
    return CouplingMap(spec, entries)


def random_spec(rng, max_m=4, max_n=4):
    m = int(rng.integers(1, max_m + 1))
    return SectorSpec(tuple(int(x) for x in rng.integers(1, max_n + 1, size=m)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
