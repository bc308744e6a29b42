import math

import numpy as np
import pytest
from scipy import integrate

from irrspec.models import (
    MaternSpec,
    ProcessModel,
    SpectralLine,
    gp_simulate,
    matern_cov,
    matern_sdf,
    process_cov_matrix,
)
from irrspec.sampling import Domain, generate_uniform

BASE = MaternSpec(1.0, 0.1, 0.75)


def _sdf_integral(spec, rtol=1e-12):
    # integrate in t = w/(1+w) to map [0, inf) onto [0, 1)
    f = lambda t: float(matern_sdf(spec, t / (1 - t))) / (1 - t) ** 2
    val, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=rtol, limit=500, points=[0.01, 0.1, 0.5])
    return 2 * val


def test_sdf_symmetric_and_nonnegative():
    rng = np.random.default_rng(0)
    w = rng.uniform(-500, 500, 50)
    np.testing.assert_array_equal(matern_sdf(BASE, w), matern_sdf(BASE, -w))
    grid = np.concatenate([[0], np.logspace(-3, 8, 200)])
    assert np.all(matern_sdf(BASE, grid) >= 0)


def test_sdf_integrates_to_variance():
    assert abs(_sdf_integral(BASE) - 1.0) <= 1e-8
    assert abs(_sdf_integral(MaternSpec(2.0, 0.3, 2.5)) - 4.0) <= 4e-8


def test_sdf_tail_slope():
    w1, w2 = 1e4, 2e4
    slope = math.log(matern_sdf(BASE, w2) / matern_sdf(BASE, w1)) / math.log(w2 / w1)
    assert abs(slope - (-2 * 0.75 - 1)) <= 0.01 * 2.5


def test_sdf_2d_integrates_to_variance():
    spec = MaternSpec(1.0, 0.2, 1.5, dim=2, anisotropy=np.diag([1.0, 2.0]))
    # by anisotropy the density is a rescaled isotropic one; integrate radially
    iso = MaternSpec(1.0, 0.2, 1.5, dim=2)
    f = lambda r: 2 * math.pi * r * float(matern_sdf(iso, np.array([[r, 0.0]]))[0])
    val = integrate.quad(f, 0, np.inf, limit=400, epsrel=1e-11)[0]
    assert abs(val - 1) < 1e-8
    w = np.array([[3.0, 4.0]])
    expect = matern_sdf(iso, w @ np.linalg.inv(np.diag([1.0, 2.0]))) / 2.0
    np.testing.assert_allclose(matern_sdf(spec, w), expect, rtol=1e-14)


def test_cov_at_zero_and_bounded():
    assert matern_cov(BASE, 0.0) == 1.0
    r = np.logspace(-8, 2, 300)
    assert np.all(matern_cov(BASE, r) <= 1.0)
    assert np.all(np.diff(matern_cov(BASE, r)) <= 0)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_half_integer_closed_forms(nu):
    rho = 0.3
    spec = MaternSpec(1.7, rho, nu)
    r = np.logspace(-4, 1, 80)
    z = math.sqrt(2 * nu) * r / rho
    closed = {
        0.5: np.exp(-z),
        1.5: (1 + z) * np.exp(-z),
        2.5: (1 + z + z * z / 3) * np.exp(-z),
    }[nu]
    np.testing.assert_allclose(matern_cov(spec, r), 1.7 ** 2 * closed, rtol=1e-10)


def test_exponential_reduction():
    spec = MaternSpec(1.3, 0.2, 0.5)
    r = np.linspace(0, 2, 41)
    np.testing.assert_allclose(matern_cov(spec, r), 1.69 * np.exp(-r / 0.2), rtol=1e-12)


@pytest.mark.parametrize("frac", [1e-3, 0.01, 0.1, 0.5, 1.0])
def test_fourier_inversion(frac):
    # oracle: K(r) = 2 int_0^inf S(w) cos(2 pi w r) dw with a cosine-weighted QUADPACK rule
    r = frac * BASE.rho
    f = lambda w: float(matern_sdf(BASE, w))
    val = integrate.quad(f, 0, np.inf, weight="cos", wvar=2 * math.pi * r, limlst=200)[0]
    assert abs(2 * val - matern_cov(BASE, r)) <= 1e-6


def test_cov_matrix_diagonal_and_line_rank():
    s = generate_uniform(Domain.interval(0, 1), 40, seed=1)
    m = ProcessModel(BASE, (SpectralLine(30.0, 2e-3), SpectralLine(70.0, 1e-3)), nugget=0.05)
    S = process_cov_matrix(m, s)
    np.testing.assert_allclose(np.diag(S), 1 + 3e-3 + 0.05, rtol=1e-14)
    line = ProcessModel(None, (SpectralLine(12.5, 0.4),))
    L = process_cov_matrix(line, s)
    x = s.x
    np.testing.assert_allclose(L, 0.4 * np.cos(2 * np.pi * 12.5 * (x[:, None] - x[None, :])), atol=1e-14)
    assert np.linalg.matrix_rank(L, tol=1e-10) <= 2


def test_cov_matrix_psd():
    s = generate_uniform(Domain.interval(0, 1), 50, seed=2)
    S = process_cov_matrix(ProcessModel(MaternSpec(1, 0.1, 1.5)), s)
    assert np.linalg.eigvalsh(S).min() >= -1e-10


def test_covariance_method_matches_matrix():
    s = generate_uniform(Domain.box((0, 1), (0, 1)), 30, seed=3)
    m = ProcessModel(MaternSpec(1, 0.2, 1.5, dim=2, anisotropy=[[1, 0.3], [0, 2]]),
                     (SpectralLine((3.0, 1.0), 0.1),))
    S = process_cov_matrix(m, s)
    h = s.locations[:, None, :] - s.locations[None, :, :]
    np.testing.assert_allclose(m.covariance(h.reshape(-1, 2)).reshape(30, 30), S, atol=1e-13)


def test_simulate_mean_and_covariance():
    s = generate_uniform(Domain.interval(0, 1), 20, seed=4)
    m = ProcessModel(MaternSpec(1, 0.1, 1.5), (SpectralLine(10.0, 0.2),))
    Y = gp_simulate(m, s, replicates=5000, seed=9)
    S = process_cov_matrix(m, s)
    assert np.all(np.abs(Y[:2000].mean(axis=0)) <= 4 * math.sqrt(m.variance / 2000))
    C = Y.T @ Y / Y.shape[0]
    # Var(y_i y_j) = S_ii S_jj + S_ij^2 for Gaussians
    se = np.sqrt((np.outer(np.diag(S), np.diag(S)) + S ** 2) / Y.shape[0])
    assert np.all(np.abs(C - S) <= 4 * se)


def test_simulate_deterministic():
    s = generate_uniform(Domain.interval(0, 1), 30, seed=5)
    m = ProcessModel(BASE)
    np.testing.assert_array_equal(gp_simulate(m, s, 3, seed=1), gp_simulate(m, s, 3, seed=1))
    assert not np.allclose(gp_simulate(m, s, 3, seed=1), gp_simulate(m, s, 3, seed=2))


def test_nugget_only_is_scaled_white_noise():
    s = generate_uniform(Domain.interval(0, 1), 10, seed=6)
    Y = gp_simulate(ProcessModel(nugget=4.0), s, 3, seed=7)
    Z = np.random.Generator(np.random.PCG64(np.random.SeedSequence(7))).standard_normal((3, 10))
    np.testing.assert_allclose(Y, 2.0 * Z, rtol=1e-14)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        MaternSpec(1.0, 0.1, 0.0)
    with pytest.raises(ValueError):
        MaternSpec(1.0, -0.1, 1.0)
    with pytest.raises(ValueError):
        ProcessModel()
