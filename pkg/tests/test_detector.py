import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from eqtsim.detector import (
    GaussianDetector,
    GridWavefunction,
    ResolutionError,
    born_limit_check,
    detection_probability,
    piecewise_linear,
    table_to_csv,
)


def _gaussian_psi(shift=0.0, n=40_001, half=12.0):
    return GridWavefunction.from_function(lambda x: np.exp(-((x - shift) ** 2) / 2), shift - half, shift + half, n)


def test_uniform_density_example():
    psi = GridWavefunction.from_function(np.ones_like, 0.0, 1.0, 10_001)
    p = detection_probability(psi, GaussianDetector(1.0, 0.01, 0.5), 0.0, 1e-3)
    assert p == pytest.approx(1e-3, rel=0.01)


def test_far_detector_sees_nothing():
    psi = GridWavefunction.from_function(np.ones_like, 0.0, 1.0, 10_001)
    assert detection_probability(psi, GaussianDetector(1.0, 0.01, 10.0), 0.0, 1e-3) <= 1e-12


@pytest.mark.parametrize("sigma", [0.3, 0.1, 0.03])
def test_profile_square_integrates_to_kappa(sigma):
    det = GaussianDetector(2.5, sigma, 0.7)
    val, _ = quad(lambda x: det.profile(x) ** 2, 0.7 - 40 * sigma, 0.7 + 40 * sigma, epsabs=0, epsrel=1e-13)
    assert val == pytest.approx(2.5, rel=1e-10)


def test_born_limit_second_order():
    psi = _gaussian_psi()
    sigmas = [0.4 / 2**k for k in range(5)]
    rows = born_limit_check(psi, 0.0, [1.0], sigmas, 1e-3)
    err = np.array([r["rel_error"] for r in rows])
    assert np.all(np.diff(err) < 0)
    np.testing.assert_allclose(err[:-1] / err[1:], 4.0, atol=1.0)
    assert err[-1] <= 0.01
    # Laplace expansion: relative error ~ sigma^2 |psi''/psi| / 2 = sigma^2 / 2 at the peak
    assert err[-1] == pytest.approx(sigmas[-1] ** 2 / 2, rel=0.05)


def test_born_at_ten_grid_spacings():
    psi = _gaussian_psi()
    row = born_limit_check(psi, 0.0, [1.0], [10 * psi.dx], 1e-3)[0]
    assert row["rel_error"] <= 0.01


def test_node_gives_zero():
    psi = GridWavefunction.from_function(lambda x: x * np.exp(-(x**2) / 2), -10, 10, 40_001)
    ps = [detection_probability(psi, GaussianDetector(1.0, s, 0.0), 0.0, 1e-3) for s in (0.2, 0.1, 0.05)]
    # g^2 / kappa is a normal density of variance v = sigma^2 / 2, so
    # p = dt N^2 E[x^2 exp(-x^2)] = dt N^2 v / (1 + 2v)^(3/2), vanishing like sigma^2
    n2 = 2 / np.sqrt(np.pi)
    exact = [1e-3 * n2 * (s**2 / 2) / (1 + s**2) ** 1.5 for s in (0.2, 0.1, 0.05)]
    np.testing.assert_allclose(ps, exact, rtol=1e-6)


def test_translation_invariance():
    det = lambda a: GaussianDetector(1.0, 0.2, a)
    p0 = detection_probability(_gaussian_psi(0.0), det(0.3), 0.0, 1e-3)
    p1 = detection_probability(_gaussian_psi(4.0), det(4.3), 0.0, 1e-3)
    assert p1 == pytest.approx(p0, rel=1e-10)


def test_linear_in_kappa_and_dt():
    psi = _gaussian_psi()
    p = detection_probability(psi, GaussianDetector(1.0, 0.2, 0.3), 0.0, 1e-3)
    assert detection_probability(psi, GaussianDetector(3.0, 0.2, 0.3), 0.0, 1e-3) == pytest.approx(3 * p, rel=1e-12)
    assert detection_probability(psi, GaussianDetector(1.0, 0.2, 0.3), 0.0, 4e-3) == pytest.approx(4 * p, rel=1e-12)


def test_resolution_error():
    psi = GridWavefunction.from_function(np.ones_like, 0.0, 1.0, 101)
    with pytest.raises(ResolutionError):
        detection_probability(psi, GaussianDetector(1.0, 0.02, 0.5), 0.0, 1e-3)


def test_large_exposure_warns():
    psi = _gaussian_psi()
    with pytest.warns(UserWarning):
        detection_probability(psi, GaussianDetector(1.0, 0.2), 0.0, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        detection_probability(psi, GaussianDetector(1.0, 0.2), 0.0, 0.05)


def test_moving_detector_uses_start_position():
    psi = _gaussian_psi()
    path = piecewise_linear([0.0, 1.0], [-1.0, 1.0])
    moving = GaussianDetector(1.0, 0.2, path)
    p = detection_probability(psi, moving, 0.75, 1e-3)
    assert p == pytest.approx(detection_probability(psi, GaussianDetector(1.0, 0.2, 0.5), 0.0, 1e-3), rel=1e-12)
    assert moving.center(5.0) == 1.0


def test_detector_validation():
    with pytest.raises(ValueError):
        GaussianDetector(0.0, 0.1)
    with pytest.raises(ValueError):
        GaussianDetector(1.0, -0.1)


class TestGridWavefunction:
    def test_normalized(self):
        psi = _gaussian_psi()
        assert psi.norm2() == pytest.approx(1.0, abs=1e-12)
        psi.validate()
        with pytest.raises(ValueError):
            GridWavefunction(0.0, 0.1, np.ones(10)).validate()

    def test_csv_round_trip(self, tmp_path):
        psi = GridWavefunction.from_function(lambda x: np.exp(-(x**2) / 2 + 1j * x), -3, 3, 301)
        path = tmp_path / "psi.csv"
        path.write_text(psi.to_csv())
        back = GridWavefunction.read_csv(path)
        assert np.array_equal(back.samples, psi.samples)
        assert back.dx == pytest.approx(psi.dx, rel=1e-12)

    def test_csv_rejects_nonuniform_grid(self, tmp_path):
        path = tmp_path / "psi.csv"
        path.write_text("x,re,im\n0,1,0\n0.1,1,0\n0.3,1,0\n")
        with pytest.raises(ValueError):
            GridWavefunction.read_csv(path)


def test_table_csv():
    rows = born_limit_check(_gaussian_psi(), 0.0, [1.0, 2.0], [0.2, 0.1], 1e-3)
    lines = table_to_csv(rows).splitlines()
    assert lines[0] == "kappa,sigma,p,born,rel_error"
    assert len(lines) == 5
    assert float(lines[1].split(",")[2]) == rows[0]["p"]
    assert table_to_csv([]) == ""
