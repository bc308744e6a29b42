import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irrspec.nufourier import (
    GramOperator,
    NufftPlan,
    NuftOptions,
    adjoint_nudft,
    adjoint_nufft,
    chebyshev_nodes,
    gauss_legendre,
    nudft,
    nufft,
    sinc_gram_apply,
    tensor_grid,
)
from irrspec.windows import sinc_kernel


def _fast_plan(x, f, tol):
    # small problems default to the direct sum; exercise the gridding path anyway
    plan = NufftPlan(x, f, tol)
    if plan.direct:
        plan.direct, plan._dense = False, None
        plan._build()
    return plan


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_chebyshev_small_cases():
    assert chebyshev_nodes(3.0, 1).nodes.tolist() == [0.0]
    np.testing.assert_allclose(np.sort(chebyshev_nodes(1.0, 2).nodes), [-math.sqrt(0.5), math.sqrt(0.5)],
                               rtol=0, atol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 7, 64, 513])
def test_chebyshev_symmetric(m):
    w = np.sort(chebyshev_nodes(2.5, m).nodes)
    assert np.max(np.abs(w + w[::-1])) <= 1e-15
    assert np.all(np.abs(w) <= 2.5)


def test_gauss_legendre_two_point():
    g = gauss_legendre(1.0, 2)
    np.testing.assert_allclose(g.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=0, atol=1e-15)
    np.testing.assert_allclose(g.quad_weights, [1, 1], rtol=0, atol=1e-15)


@pytest.mark.parametrize("m", [1, 3, 10, 33, 100, 257])
def test_gauss_legendre_exactness(m):
    g = gauss_legendre(1.0, m)
    assert abs(g.quad_weights.sum() - 2) <= 1e-13
    for k in range(0, 2 * m):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(np.sum(g.quad_weights * g.nodes ** k) - exact) <= 1e-13, k


def test_gauss_legendre_scaled():
    g = gauss_legendre(7.5, 40)
    assert abs(g.quad_weights.sum() - 15.0) <= 1e-13 * 15
    assert abs(np.sum(g.quad_weights * g.nodes ** 2) - 2 * 7.5 ** 3 / 3) <= 1e-12 * 7.5 ** 3


def test_tensor_grid_weights():
    t = tensor_grid(gauss_legendre(1.0, 5), gauss_legendre(2.0, 4))
    assert t.nodes.shape == (20, 2)
    assert abs(t.quad_weights.sum() - 8.0) <= 1e-13


def test_nudft_single_location():
    f = np.linspace(-30, 30, 17)
    out = nudft(np.array([0.0]), np.array([2 - 1j]), f)
    np.testing.assert_array_equal(out, np.full(17, 2 - 1j))


def test_nudft_matches_dft():
    n = 64
    x = np.arange(n) / n
    F = np.fft.fft(np.eye(n), axis=0)
    for k in (0, 5, 63):
        e = np.zeros(n)
        e[k] = 1
        np.testing.assert_allclose(nudft(x, e, np.arange(n)), F[:, k], rtol=0, atol=1e-12)


def test_nudft_linear():
    rng = np.random.default_rng(0)
    x, f = rng.uniform(-1, 1, 80), rng.uniform(-40, 40, 50)
    a, b = rng.standard_normal(80) + 1j * rng.standard_normal(80), rng.standard_normal(80)
    assert np.max(np.abs(nudft(x, a + b, f) - nudft(x, a, f) - nudft(x, b, f))) <= 1e-13


@pytest.mark.parametrize("trial", range(20))
def test_nufft_vs_direct_random_shapes(trial):
    rng = np.random.default_rng(100 + trial)
    dim = 1 if trial < 12 else 2
    n = int(rng.integers(10, 4097))
    m = int(rng.integers(10, 4097))
    if dim == 2:
        n, m = min(n, 1500), min(m, 1500)
    x = rng.uniform(-1, 1.5, (n, dim))
    f = rng.uniform(-60, 60, (m, dim)) if dim == 2 else rng.uniform(-300, 300, (m, 1))
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    fast = _fast_plan(x, f, 1e-9)
    ref = nudft(x, c, f)
    assert _rel(fast.forward(c), ref) <= 1e-9
    assert _rel(nufft(x, c, f, NuftOptions(1e-9)), ref) <= 1e-9
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    refa = adjoint_nudft(f, v, x)
    assert _rel(fast.adjoint(v), refa) <= 1e-9


def test_nufft_spec_case():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, 500)
    f = rng.uniform(-250, 250, 1000)
    c = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    ref = nudft(x, c, f)
    assert np.max(np.abs(nufft(x, c, f, NuftOptions(1e-9)) - ref) / np.abs(ref).max()) <= 1e-9


def test_force_direct_bitwise_and_zero():
    rng = np.random.default_rng(2)
    x, f = rng.uniform(0, 1, 300), rng.uniform(-100, 100, 900)
    c = rng.standard_normal(300).astype(complex)
    assert np.array_equal(nufft(x, c, f, NuftOptions(force_direct=True)), nudft(x, c, f))
    assert np.array_equal(nufft(x, np.zeros(300), f), np.zeros(900))


def test_batched_transform():
    rng = np.random.default_rng(3)
    x, f = rng.uniform(0, 1, 2000), rng.uniform(-500, 500, 3000)
    C = rng.standard_normal((3, 2000))
    plan = NufftPlan(x, f, 1e-12)
    out = plan.forward(C)
    assert out.shape == (3, 3000)
    for k in range(3):
        assert _rel(out[k], nudft(x, C[k], f)) <= 1e-11


def test_adjoint_identity():
    rng = np.random.default_rng(4)
    x, f = rng.uniform(-1, 1, 3000), rng.uniform(-200, 200, 2500)
    a = rng.standard_normal(3000) + 1j * rng.standard_normal(3000)
    v = rng.standard_normal(2500) + 1j * rng.standard_normal(2500)
    plan = NufftPlan(x, f, 1e-13)
    lhs = np.vdot(v, plan.forward(a))
    rhs = np.vdot(plan.adjoint(v), a)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs) * 10
    # direct versions are exact adjoints up to rounding
    xs, fs = x[:64], f[:64]
    assert abs(np.vdot(v[:64], nudft(xs, a[:64], fs)) - np.vdot(adjoint_nudft(fs, v[:64], xs), a[:64])) <= 1e-12 * 64


def test_adjoint_zero_frequency():
    x = np.linspace(0, 1, 9)
    v = np.array([1.5 - 0.5j])
    np.testing.assert_allclose(adjoint_nudft(np.array([0.0]), v, x), np.full(9, v[0]))


def test_adjoint_dense_oracle():
    rng = np.random.default_rng(5)
    x, f = rng.uniform(-1, 1, 64), rng.uniform(-20, 20, 64)
    v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    F = np.exp(-2j * np.pi * np.outer(f, x))
    np.testing.assert_allclose(adjoint_nudft(f, v, x), F.conj().T @ v, rtol=0, atol=1e-12)
    np.testing.assert_allclose(adjoint_nufft(f, v, x), F.conj().T @ v, rtol=0, atol=1e-10)


@pytest.mark.parametrize("n", [64, 257, 1024])
def test_parseval_equispaced(n):
    rng = np.random.default_rng(n)
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    out = NufftPlan(np.arange(n) / n, np.arange(n, dtype=float), 1e-13).forward(a)
    assert abs(np.sum(np.abs(out) ** 2) - n * np.sum(np.abs(a) ** 2)) <= 1e-10 * n * np.sum(np.abs(a) ** 2)


def test_sinc_gram_against_dense():
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, 128)
    Om = 20.0
    m = 4 * math.ceil(Om * 2)
    grid = gauss_legendre(Om, m)
    v = rng.standard_normal(128)
    dense = sinc_kernel(x, x, Om) @ v
    got = sinc_gram_apply(x, grid, v)
    assert np.max(np.abs(got - dense)) <= 1e-8 * np.max(np.abs(dense))
    assert np.max(np.abs(got.imag)) <= 1e-12 * np.max(np.abs(got))
    assert np.all(sinc_gram_apply(x, grid, np.zeros(128)) == 0)


def test_gram_operator_2d():
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 1, (100, 2))
    Om = (6.0, 4.0)
    grid = tensor_grid(gauss_legendre(Om[0], 40), gauss_legendre(Om[1], 30))
    v = rng.standard_normal(100)
    K = sinc_kernel(x[:, 0], x[:, 0], Om[0]) * sinc_kernel(x[:, 1], x[:, 1], Om[1])
    got = GramOperator(x, grid).matvec(v)
    assert np.max(np.abs(got - K @ v)) <= 1e-8 * np.max(np.abs(K @ v))


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-50, 50), seed=st.integers(0, 10_000))
def test_shift_theorem(shift, seed):
    rng = np.random.default_rng(seed)
    x, f = rng.uniform(0, 1, 40), rng.uniform(-30, 30, 25)
    c = rng.standard_normal(40)
    lhs = nudft(x + shift, c, f)
    rhs = np.exp(-2j * np.pi * f * shift) * nudft(x, c, f)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.abs(c).sum()


def test_invalid_tolerance():
    with pytest.raises(ValueError):
        NuftOptions(tolerance=0)
    with pytest.raises(ValueError):
        NufftPlan(np.zeros(3), np.zeros((2, 2)))
