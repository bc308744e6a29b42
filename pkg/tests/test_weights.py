import math
import warnings

import numpy as np
import pytest

from irrspec.sampling import Domain, generate_gappy_grid, generate_uniform
from irrspec.weights import (
    QuadratureWeights,
    SolverConfig,
    build_gaussian_precond,
    forward_weights,
    load_weights,
    omega_guidance,
    save_weights,
    solve,
    solve_dense,
    solve_iterative,
    solve_lowrank,
    trapezoid_weights,
    validate_weights,
)
from irrspec.windows import boxcar, kaiser, prolate_1d, prolate_2d

UNIT = Domain.interval(0, 1)
SYM = Domain.interval(-1, 1)


@pytest.fixture(scope="module")
def fig2():
    s = generate_uniform(SYM, 600, seed=2024)
    win = kaiser(SYM)
    q, rep = solve_dense(s, win, 75)
    return s, win, q, rep


def test_trapezoid_example():
    g = trapezoid_weights([0, 0.5, 1])
    np.testing.assert_allclose(g, [0.25, 0.5, 0.25])
    assert g.sum() == 1


def test_trapezoid_equispaced():
    h = 0.01
    g = trapezoid_weights(np.arange(101) * h)
    np.testing.assert_allclose(g[1:-1], h, rtol=1e-12)
    np.testing.assert_allclose(g[[0, -1]], h / 2, rtol=1e-12)


def test_trapezoid_integrates_x():
    x = np.sort(np.random.default_rng(0).uniform(0, 1, 1000))
    assert abs(np.sum(trapezoid_weights(x) * x) - 0.5) <= 2e-3


def test_trapezoid_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        trapezoid_weights([0, 0.5, 0.5, 1])
    with pytest.raises(ValueError):
        trapezoid_weights([0, 1, 0.5])


def test_forward_weights():
    gap = Domain([(-1, -0.15), (0, 1)])
    x = np.array([-0.5, -0.1, 0.3, 0.9])
    a = forward_weights(boxcar(gap), x)
    assert a[1] == 0
    np.testing.assert_allclose(a[[0, 2, 3]], gap.measure / math.sqrt(gap.measure) / 4)
    xs = (np.arange(2000) + 0.5) / 2000
    win = kaiser(UNIT)
    w = np.linspace(-10, 10, 201)
    H = np.exp(-2j * np.pi * np.outer(w, xs)) @ forward_weights(win, xs)
    assert np.max(np.abs(H - win.eval_G(w))) <= 1e-3


def test_fig2_recovery(fig2):
    s, win, q, rep = fig2
    assert q.sup_residual <= 1e-10 * (win.l1norm + q.l1)
    assert q.relative_residual() <= 1e-10
    assert q.l1 >= q.l2
    assert np.isrealobj(q.alpha)
    G0 = win.eval_G(np.array([0.0]))[0].real
    assert abs(q.alpha.sum() - G0) <= q.sup_residual


def test_validate_consistent_with_stored(fig2):
    s, win, q, _ = fig2
    v = validate_weights(q, win, n_check_per_unit=2000)
    assert v["grid_points"] >= 2000 * 150
    assert abs(v["sup_error"] - q.sup_residual) <= 0.1 * q.sup_residual


def test_validate_zero_weights(fig2):
    s, win, q, _ = fig2
    v = validate_weights(np.zeros(s.n), win, locations=s.x, Omega=75)
    assert v["sup_error"] == v["sup_G"]
    assert abs(v["sup_G"] - abs(win.eval_G(np.array([0.0]))[0])) <= 1e-14


def test_boxcar_above_line_explodes(fig2):
    s, win, q, _ = fig2
    # Omega = 150 sits above the recovery line (n - 35)/(5 * 2) = 56.5
    qb, _ = solve_dense(s, boxcar(SYM), 150)
    assert qb.l2 >= 1e6 * q.l2
    assert qb.relative_residual() > 0


def test_omega_guidance():
    assert omega_guidance(535, UNIT) == pytest.approx(100.0, rel=1e-14)
    assert omega_guidance(535, Domain.interval(0, 2)) == pytest.approx(50.0, rel=1e-14)
    with pytest.warns(RuntimeWarning):
        assert omega_guidance(35, UNIT) == 0.0
    g2 = omega_guidance(4096, Domain.box((0, 1), (0, 2)))
    np.testing.assert_allclose(g2, [(64 - 35) / 5, (64 - 35) / 10])


def test_relative_residual_small_under_guidance():
    s = generate_uniform(UNIT, 800, seed=3)
    Om = omega_guidance(800, UNIT)
    for win in (kaiser(UNIT), prolate_1d(UNIT)):
        q, _ = solve_dense(s, win, Om)
        assert q.relative_residual() <= 1e-10


def test_iterative_matches_dense_n512():
    s = generate_uniform(SYM, 512, seed=5)
    win = kaiser(SYM)
    Om = 40.0
    qd, _ = solve_dense(s, win, Om)
    qi, rep = solve_iterative(s, win, Om, SolverConfig(method="normal-krylov"))
    assert rep.converged
    w = np.linspace(-Om, Om, 4001)
    assert np.max(np.abs(qi.H(w) - qd.H(w))) <= 1e-8
    assert rep.info["imag_ratio"] <= 1e-10
    assert qi.l1 >= qi.l2


def test_iterative_loose_tolerance_fewer_iterations():
    s = generate_uniform(UNIT, 400, seed=6)
    win = kaiser(UNIT)
    _, loose = solve_iterative(s, win, 40, SolverConfig(method="normal-krylov", tol=1e-2))
    _, tight = solve_iterative(s, win, 40, SolverConfig(method="normal-krylov", tol=1e-12))
    assert loose.iterations < tight.iterations
    assert loose.final_residual <= 1e-2 and tight.final_residual <= 1e-12


def test_three_paths_agree():
    s = generate_uniform(UNIT, 1024, seed=8)
    win = kaiser(UNIT)
    Om = 4.0
    qd, _ = solve(s, win, Om)
    ql, rl = solve(s, win, Om, SolverConfig(method="low-rank"))
    qi, ri = solve(s, win, Om, SolverConfig(method="normal-krylov"))
    w = np.linspace(-Om, Om, 2001)
    Hd = qd.H(w)
    assert np.max(np.abs(ql.H(w) - Hd)) <= 1e-8
    assert np.max(np.abs(qi.H(w) - Hd)) <= 1e-7
    assert rl.info["rank"] <= 40


def test_lowrank_large_n():
    s = generate_uniform(Domain.interval(0, 2), 10_000, seed=9)
    win = kaiser(Domain.interval(0, 2))
    q, rep = solve_lowrank(s, win, 2.0)
    assert rep.info["rank"] <= 40
    assert q.sup_residual <= 1e-8


def test_lowrank_singular_values_oracle():
    # the numerical rank of a 1024-point subsample bounds what the sketch should find
    s = generate_uniform(UNIT, 10_000, seed=10)
    sub = s.x[:: len(s.x) // 1024][:1024]
    w = np.cos((2 * np.arange(1, 257) - 1) * np.pi / 512) * 4.0
    F = np.exp(-2j * np.pi * np.outer(w, sub))
    sv = np.linalg.svd(np.vstack([F.real, F.imag]), compute_uv=False)
    oracle_rank = int(np.sum(sv > 1e-14 * sv[0]))
    _, rep = solve_lowrank(s, kaiser(UNIT), 4.0)
    assert rep.info["rank"] <= oracle_rank + 8
    assert oracle_rank <= 40


def test_lowrank_zero_rhs():
    s = generate_uniform(UNIT, 200, seed=11)

    class Zero:
        kind = "zero"
        W = 1.0
        domain = UNIT
        l1norm = 0.0

        def eval_G(self, w):
            return np.zeros(np.shape(w)[0], dtype=complex)

        def describe(self):
            return {"kind": "zero"}

    q, _ = solve_lowrank(s, Zero(), 3.0)
    assert np.all(q.alpha == 0)


def test_gappy_scaled_identity_converges_fast():
    for n in (2 ** 10, 2 ** 12):
        s = generate_gappy_grid(UNIT, 1 / n, gaps=[(0.4, 0.5)])
        q, rep = solve_iterative(s, prolate_1d(s.domain), n / 2,
                                 SolverConfig(method="normal-krylov", precond="scaled-identity"))
        assert rep.converged
        assert rep.iterations <= 50


def test_gaussian_precond_structure():
    x = np.sort(np.random.default_rng(12).uniform(0, 1, 300))
    P = build_gaussian_precond(x, 50.0, delta=1e-6)
    M = P.P.toarray()
    assert np.max(np.abs(M - M.T)) == 0
    np.testing.assert_allclose(np.diag(M), 1 + 1e-6, rtol=1e-15)
    wide = build_gaussian_precond(x, 1e9, delta=1e-6)
    assert wide.nnz == 300
    np.testing.assert_allclose(wide.P.toarray(), (1 + 1e-6) * np.eye(300))
    r = np.random.default_rng(0).standard_normal(300)
    np.testing.assert_allclose(M @ P.solve(r), r, atol=1e-8)


def test_sparse_gaussian_reduces_iterations():
    n = 1024
    s = generate_uniform(UNIT, n, seed=7)
    win = kaiser(UNIT)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, r0 = solve_iterative(s, win, n / 10, SolverConfig(method="normal-krylov", max_iter=4000))
        _, rg = solve_iterative(s, win, n / 10, SolverConfig(method="normal-krylov", precond="sparse-gaussian",
                                                               max_iter=4000))
    assert rg.iterations < r0.iterations


def test_dense_2d_small():
    dom = Domain.box((0, 1), (0, 1))
    s = generate_uniform(dom, 900, seed=13)
    win = prolate_2d(dom, W=3, quad_order=32)
    q, _ = solve_dense(s, win, (4.0, 4.0))
    assert q.relative_residual() <= 1e-9
    assert q.l1 >= q.l2


def test_dense_limit_enforced():
    s = generate_uniform(UNIT, 50, seed=0)
    with pytest.raises(ValueError):
        solve_dense(s, kaiser(UNIT), 5, SolverConfig(dense_limit=10))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="qr")
    with pytest.raises(ValueError):
        SolverConfig(precond="ilu")
    with pytest.raises(ValueError):
        SolverConfig(oversample=0.5)


def test_save_load_roundtrip(tmp_path, fig2):
    s, win, q, _ = fig2
    side = save_weights(tmp_path / "w.csv", q, {"seed": 1})
    locs, alpha, meta = load_weights(tmp_path / "w.csv")
    np.testing.assert_array_equal(alpha, q.alpha)
    np.testing.assert_array_equal(locs[:, 0], s.x)
    assert meta["Omega"] == 75 and meta["window"]["kind"] == "kaiser" and meta["seed"] == 1
    assert side.endswith(".json")


def test_quadrature_weights_immutable(fig2):
    q = fig2[2]
    assert isinstance(q, QuadratureWeights)
    with pytest.raises(Exception):
        q.l2 = 0.0
