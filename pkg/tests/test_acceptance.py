"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import time

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.linalg import expm

from eqtsim.algebra import BlockOperator, DensityFamily, Model, PureState, SectorSpec, build_lambda, lambda_block
from eqtsim.bloch import (
    BUILTIN,
    IDENTITY,
    bloch_projector,
    builtin_config,
    chaos_game,
    fuzzy_projection,
    hilbert_oracle_jump,
    jump_map,
    jump_probabilities,
    points_from_bytes,
    register_coupling,
    spin_model,
)
from eqtsim.cli import main
from eqtsim.detector import GridWavefunction, born_limit_check
from eqtsim.fractal import box_dimension, chaos_game_affine, sierpinski_ifs
from eqtsim.liouville import IntegratorConfig, evolve_density, evolve_grid, trace_distance
from eqtsim.models import qubit_toy, toy_initial, two_state
from eqtsim.pdp import propagate_nojump, run_ensemble, run_trajectory
from eqtsim.render import hit_counts, project, read_pgm, rotation_chi2
from eqtsim.rng import RngStream

from conftest import random_coupling, random_density, random_hermitian, random_unit, record_acceptance

pytestmark = pytest.mark.acceptance


def _check(number, title, ok, detail):
    record_acceptance(number, title, bool(ok), detail)
    assert ok, detail


def test_01_jump_map_oracle():
    rng = np.random.default_rng(101)
    m = 10_000
    r, n, eps = random_unit(rng, m), random_unit(rng, m), rng.uniform(0, 1, m)
    start = time.perf_counter()
    ours, _ = jump_map(r, n, eps)
    oracle = hilbert_oracle_jump(r, n, eps)
    elapsed = time.perf_counter() - start
    dev = np.linalg.norm(ours - oracle, axis=1).max()
    _check(1, "jump map vs Hilbert-space oracle", dev <= 1e-10 and elapsed < 1.0,
           f"max dev {dev:.2e} <= 1e-10, {elapsed:.3f} s < 1 s")


def test_02_operator_identity():
    rng = np.random.default_rng(102)
    m = 10_000
    r, n, eps = random_unit(rng, m), random_unit(rng, m), rng.uniform(0, 1, m)
    rp, lam = jump_map(r, n, eps)
    a = 0.5 * IDENTITY + eps[:, None, None] * (fuzzy_projection(n, 1.0, strict=False) - 0.5 * IDENTITY)
    dev = np.abs(lam[:, None, None] * bloch_projector(rp) - a @ bloch_projector(r) @ a).max()
    _check(2, "operator identity lambda P(r') = a P(r) a", dev <= 1e-12, f"max dev {dev:.2e} <= 1e-12")


def test_03_square_identity():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(100):
        n, eps = random_unit(rng), rng.uniform(0, 1)
        a = fuzzy_projection(n, eps)
        rhs = (1 + eps**2) / 2 * fuzzy_projection(n, 2 * eps / (1 + eps**2))
        worst = max(worst, np.abs(a @ a - rhs).max())
    _check(3, "square identity of fuzzy projections", worst <= 1e-14, f"max dev {worst:.2e} <= 1e-14")


def test_04_zero_sum_lambda_and_waiting_times():
    rng = np.random.default_rng(104)
    worst = 0.0
    for name in sorted(BUILTIN):
        cfg = builtin_config(name, 0.58, kappa=1.3)
        target = cfg.jump_rate * np.eye(2)
        g = register_coupling(cfg)
        # the register has 2**N sectors; check Lambda on a sample of them
        sectors = rng.integers(0, g.spec.m, size=min(64, g.spec.m))
        for alpha in sectors:
            worst = max(worst, np.abs(lambda_block(g, int(alpha)) - target).max())
        worst = max(worst, np.abs(build_lambda(g)[0] - target).max())
    cfg = builtin_config("octahedron", 0.58, omega=0.8)
    rate = cfg.jump_rate
    tr = run_trajectory(PureState(0, [1.0, 0.0]), (0, 100_500 / rate), spin_model(cfg), RngStream(104),
                        dt=0.01 / rate)
    waits = np.diff([0.0] + [e.t for e in tr.events])[:100_000]
    mean_err = abs(waits.mean() * rate - 1)
    p = stats.kstest(waits, "expon", args=(0, 1 / rate)).pvalue
    ok = worst <= 1e-12 and len(waits) == 100_000 and mean_err <= 0.02 and p > 0.01
    _check(4, "zero-sum Lambda and Poisson waiting times", ok,
           f"Lambda dev {worst:.1e}, mean rel err {mean_err:.4f}, KS p {p:.3f}, {len(waits)} jumps")


def test_05_probability_normalization():
    rng = np.random.default_rng(105)
    r = random_unit(rng, 10_000)
    worst = max(np.abs(jump_probabilities(r, builtin_config(name, rng.uniform(0.01, 1))).sum(axis=1) - 1).max()
                for name in sorted(BUILTIN))
    _check(5, "jump probabilities sum to one", worst <= 1e-14, f"max dev {worst:.1e} <= 1e-14")


def test_06_ensemble_matches_master_equation():
    model = qubit_toy(omega=1.0, kappa=1.0, eps=0.7)
    init = toy_initial("qubit-toy")
    grid = [0.25, 0.5, 1.0, 2.0]
    ref = evolve_grid(init.projector(model.spec), model, grid, t0=0.0)

    def distances(n):
        ens = run_ensemble(init, grid, model, n, master_seed=2024, t0=0.0)
        return np.array([trace_distance(a, b) for a, b in zip(ens, ref)])

    start = time.perf_counter()
    full = distances(20_000)
    elapsed = time.perf_counter() - start
    sums = [distances(n).sum() for n in (1_000, 4_000, 16_000)]
    ratios = [sums[0] / sums[1], sums[1] / sums[2]]
    ok = full.max() <= 0.02 and elapsed < 120 and all(1.5 <= q <= 3 for q in ratios)
    _check(6, "trajectory ensemble matches the master equation", ok,
           f"max dist {full.max():.4f} <= 0.02 in {elapsed:.1f} s, quadrupling ratios "
           f"{ratios[0]:.2f}, {ratios[1]:.2f} in [1.5, 3]")


def test_07_norm_decay_identity():
    cfg = builtin_config("octahedron", 0.58, omega=1.3)
    model = spin_model(cfg)
    psi0 = np.array([0.6, 0.8j])
    _, hist = propagate_nojump(PureState(0, psi0), model, 0.0, 1.5, dt=1e-3)
    K = model.generator_at(0, 0)
    lam = model.lambda_at(0, 0)

    def rate(s):
        v = expm(s * K) @ psi0
        return (np.vdot(v, lam @ v) / np.vdot(v, v)).real

    worst = 0.0
    for t, n2 in hist[::100]:
        integral, _ = quad(rate, 0.0, t, epsabs=1e-13, epsrel=1e-13)
        worst = max(worst, abs((1 - n2) - (1 - np.exp(-integral))))
    _check(7, "no-jump norm decay equals exp(-int lambda)", worst <= 1e-8, f"max dev {worst:.1e} <= 1e-8")


def test_08_square_confinement():
    cfg = builtin_config("square", 0.7)
    pts, _ = chaos_game(cfg, random_unit(np.random.default_rng(108)), 11_000, RngStream(108))
    med = np.median(np.abs(pts[1000:, 2]))
    _check(8, "square attractor lies on the equator", med < 0.01, f"median |z| {med:.2e} < 0.01")


def test_09_sierpinski():
    ifs = sierpinski_ifs()
    fps = [ifs.fixed_point(i) for i in range(3)]
    exact = all(np.array_equal(fp, want) for fp, want in zip(fps, [(2, 2), (2, 1), (1, 2)]))
    pts = chaos_game_affine(ifs, (0.0, 0.0), 1_000_050, RngStream(109))[50:]
    est = box_dimension(pts).estimate
    ok = exact and abs(est - np.log(3) / np.log(2)) <= 0.1
    _check(9, "Sierpinski dimension and fixed points", ok,
           f"dimension {est:.4f} vs 1.585 +- 0.1, fixed points exact: {exact}")


def test_10_born_limit():
    psi = GridWavefunction.from_function(lambda x: np.exp(-x**2 / 2), -8, 8, 16_001)
    sigmas = [0.4 / 2**k for k in range(5)]
    err = np.array([r["rel_error"] for r in born_limit_check(psi, 0.0, [1.0], sigmas, 1e-3)])
    ratios = err[:-1] / err[1:]
    ok = np.all(np.abs(ratios - 4) <= 1) and err[-1] <= 0.01
    _check(10, "Born limit of the Gaussian detector", ok,
           f"error ratios {np.round(ratios, 2).tolist()}, finest rel err {err[-1]:.2e} <= 0.01")


def test_11_liouville_integrator():
    model = two_state(1.0)
    rho0 = DensityFamily(model.spec, [[[1.0]], [[0.0]]])
    exact = 0.5 + 0.5 * np.exp(-2.0)
    errs = [abs(evolve_density(rho0, model, (0.0, 1.0), IntegratorConfig(dt=dt))[0][0, 0].real - exact)
            for dt in (0.1, 0.05)]
    ratio = errs[0] / errs[1]
    rng = np.random.default_rng(111)
    spec = SectorSpec((2, 3))
    big = Model.constant(BlockOperator(spec, [random_hermitian(rng, n) for n in spec.dims]),
                         random_coupling(rng, spec, density=1.0))
    rho = evolve_density(random_density(rng, spec), big, (0.0, 10.0), IntegratorConfig(dt=1e-3))
    drift = abs(rho.total_trace() - 1)
    ok = 12 <= ratio <= 20 and drift <= 1e-9
    _check(11, "RK4 order and trace conservation", ok,
           f"error ratio {ratio:.2f} in [12, 20], trace drift {drift:.1e} <= 1e-9 over 10^4 steps")


def test_12_cli_determinism(tmp_path):
    args = ["fractal", "--config", "dodecahedron", "--eps", "0.65", "--jumps", "1000000", "--seed", "9"]
    codes = [main([*args, "--threads", str(t), "--out", str(tmp_path / f"t{t}")]) for t in (1, 8)]
    same = all(
        (tmp_path / "t1" / f).read_bytes() == (tmp_path / "t8" / f).read_bytes()
        for f in ("cloud.bin", "clicks.csv", "image.pgm")
    )
    ok = codes == [0, 0] and same
    _check(12, "fractal output independent of thread count", ok, f"exit codes {codes}, byte-identical: {same}")


def test_13_octahedron_symmetry(tmp_path):
    code = main(["fractal", "--config", "octahedron", "--eps", "0.58", "--jumps", "1000000", "--seed", "1",
                 "--cloud-format", "bin", "--out", str(tmp_path)])
    pts = points_from_bytes((tmp_path / "cloud.bin").read_bytes())
    chi2 = rotation_chi2(hit_counts(project(pts, "+z"), size=512))
    image = read_pgm((tmp_path / "image.pgm").read_bytes())
    ok = code == 0 and chi2 < 1.5 and image.shape == (512, 512)
    _check(13, "octahedron image has four-fold symmetry", ok, f"chi2 per pixel {chi2:.3f} < 1.5")
