import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from irrspec.sampling import (
    Domain,
    SampleSet,
    charfn_uniform,
    generate_gappy_grid,
    generate_jittered_grid,
    generate_uniform,
    infer_domain,
    load_csv,
    save_csv,
    spawn_rngs,
)

GAP_DOMAIN = Domain([(-1.0, -0.15), (0.0, 1.0)])


def test_uniform_reproducible():
    a = generate_uniform(Domain.interval(0, 1), 5, seed=7)
    b = generate_uniform(Domain.interval(0, 1), 5, seed=7)
    assert a.n == 5
    assert np.all((a.x >= 0) & (a.x <= 1))
    np.testing.assert_array_equal(a.locations, b.locations)


def test_distinct_seeds_give_distinct_draws():
    a = generate_uniform(Domain.interval(0, 1), 50, seed=1)
    b = generate_uniform(Domain.interval(0, 1), 50, seed=2)
    assert not np.allclose(a.locations, b.locations)
    r1, r2 = spawn_rngs(3, 2)
    assert r1.random() != r2.random()


def test_uniform_avoids_gap():
    s = generate_uniform(GAP_DOMAIN, 3000, seed=0)
    assert not np.any((s.x > -0.15) & (s.x < 0))
    # piece probabilities follow the measures 0.85 : 1
    frac = np.mean(s.x < 0)
    assert abs(frac - 0.85 / 1.85) < 4 * math.sqrt(0.25 / 3000)


def test_uniform_mean():
    s = generate_uniform(Domain.interval(0, 1), 100_000, seed=11)
    assert abs(s.x.mean() - 0.5) < 0.005


def test_uniform_2d_box():
    s = generate_uniform(Domain.box((0, 1), (0, 2)), 400, seed=3)
    assert s.dim == 2
    assert s.locations[:, 1].max() > 1.0


def test_jittered_grid_bounds():
    s = generate_jittered_grid((0, 1), 1000, 5e-5, seed=4)
    mid = (np.arange(1000) + 0.5) / 1000
    assert np.max(np.abs(s.x - mid)) <= 5e-5


def test_jittered_zero_jitter_is_midpoint_grid():
    s = generate_jittered_grid((0, 1), 10, 0.0)
    np.testing.assert_allclose(s.x, (np.arange(10) + 0.5) / 10, rtol=0, atol=1e-15)


def test_jittered_rejects_large_jitter():
    with pytest.raises(ValueError):
        generate_jittered_grid((0, 1), 10, 0.05)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.0, 0.499))
def test_jittered_sorted(seed, frac):
    n = 64
    s = generate_jittered_grid((0, 1), n, frac / n, seed=seed)
    assert np.all(np.diff(s.x) > 0)


def test_gappy_grid_example():
    s = generate_gappy_grid((0, 1), 1 / 8, [(0.3, 0.6)])
    np.testing.assert_allclose(s.x, [0, 0.125, 0.25, 0.625, 0.75, 0.875, 1.0])
    assert len(s.domain.pieces) == 2


def test_gappy_grid_no_gaps():
    s = generate_gappy_grid((0, 2), 0.1)
    assert s.n == int(math.floor(2 / 0.1)) + 1


def test_gappy_grid_full_gap_raises():
    with pytest.raises(ValueError):
        generate_gappy_grid((0, 1), 0.1, [(-1, 2)])


def test_load_csv_1d(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,value\n0.1,2.0\n0.4,-1.0\n")
    s = load_csv(p)
    assert s.n == 2 and s.dim == 1
    np.testing.assert_array_equal(s.values, [2.0, -1.0])


def test_load_csv_2d(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("x,y,value\n0.1,0.2,1\n0.5,0.7,2\n0.9,0.1,3\n")
    assert load_csv(p).dim == 2


def test_load_csv_nan_names_row(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("x,value\n0.2,1.0\n0.1,NaN\n")
    with pytest.raises(ValueError, match="line 3"):
        load_csv(p)


def test_csv_roundtrip(tmp_path):
    s = generate_uniform(Domain.interval(-1, 1), 200, seed=5)
    rng = np.random.default_rng(0)
    s = s.with_values(rng.standard_normal((3, s.n)))
    p = tmp_path / "r.csv"
    save_csv(p, s)
    t = load_csv(p, domain=s.domain)
    assert np.max(np.abs(t.locations - s.locations)) <= 1e-15
    assert np.max(np.abs(t.values - s.values)) <= 1e-15


def test_sampleset_rejects_outside_points():
    with pytest.raises(ValueError):
        SampleSet(np.array([[-0.1]]), GAP_DOMAIN)


def test_infer_domain_recovers_gap_pieces():
    hits = 0
    for seed in range(100):
        s = generate_uniform(GAP_DOMAIN, 3000, seed=seed)
        d = infer_domain(s.x, gap_factor=10)
        hits += len(d.pieces) == 2
    assert hits >= 95


def test_infer_domain_endpoints():
    # the nearest point to a true edge lies Exp-distributed inside it, so
    # "within 2 median spacings" holds per edge with probability ~1 - 2^-2.5
    true = np.array([-1, -0.15, 0, 1])
    ok = total = 0
    for seed in range(100):
        s = generate_uniform(GAP_DOMAIN, 3000, seed=seed)
        d = infer_domain(s.x)
        if len(d.pieces) != 2:
            continue
        med = np.median(np.diff(s.x))
        got = np.array([p[0] for p in d.pieces]).ravel()
        ok += int(np.sum(np.abs(got - true) <= 2 * med))
        total += 4
    assert ok / total >= 0.75
    # inner edges never overshoot the gap
    s = generate_uniform(GAP_DOMAIN, 3000, seed=0)
    d = infer_domain(s.x)
    assert d.pieces[0][0][1] >= s.x[s.x < 0].max()
    assert d.pieces[1][0][0] <= s.x[s.x > -0.1].min()


def test_infer_domain_grid_and_infinite_factor():
    x = np.linspace(0, 1, 101)
    assert len(infer_domain(x).pieces) == 1
    s = generate_uniform(GAP_DOMAIN, 500, seed=1)
    d = infer_domain(s.x, gap_factor=math.inf)
    assert len(d.pieces) == 1
    lo, hi = d.pieces[0][0]
    assert lo <= s.x.min() and hi >= s.x.max()


def test_charfn_uniform():
    phi = charfn_uniform((-1, 1))
    assert phi(0.0) == 1.0
    assert abs(phi(0.5)) < 1e-15
    rng = np.random.default_rng(2)
    for t in rng.uniform(-3, 3, 20):
        re = integrate.quad(lambda x: math.cos(2 * math.pi * t * x) * 0.5, -1, 1,
                            epsabs=1e-14, epsrel=1e-14, limit=200)[0]
        im = integrate.quad(lambda x: math.sin(2 * math.pi * t * x) * 0.5, -1, 1,
                            epsabs=1e-14, epsrel=1e-14, limit=200)[0]
        assert abs(phi(t) - complex(re, im)) <= 1e-12
