import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from openasep.asep import (
    ASEPModel,
    BoundaryRates,
    LaplaceSpec,
    ScalingInput,
    abcd_to_rates,
    boundary_densities,
    generator_apply,
    height_increments,
    kappa_pm,
    laplace_exact,
    mc_simulate,
    pgf_exact,
    rate_matrix,
    rates_to_abcd,
    scaling_to_rates,
    stationary_exact,
)
from openasep.errors import ParameterError

SI = ScalingInput(0.8, 0.7, 1.5, 0.6, 100)


def test_rates_validated():
    with pytest.raises(ParameterError):
        BoundaryRates(0.0, 1.0)
    with pytest.raises(ParameterError):
        BoundaryRates(1.0, 1.0, -0.1)
    with pytest.raises(ParameterError):
        ASEPModel(3, 1.0, BoundaryRates(1.0, 1.0))
    with pytest.raises(ParameterError):
        ScalingInput(0.3, -0.5, 1.0, 1.0, 10)


def test_generator_kills_constants():
    model = ASEPModel(4, 0.4, BoundaryRates(0.7, 0.9, 0.2, 0.1))
    assert np.allclose(generator_apply(model, np.ones(16)), 0.0, atol=1e-15)


def test_generator_single_site():
    # N = 1: L f(0) = (alpha + delta)(f(1) - f(0)), L f(1) = (beta + gamma)(f(0) - f(1))
    r = BoundaryRates(0.7, 0.9, 0.2, 0.1)
    out = generator_apply(ASEPModel(1, 0.5, r), np.array([0.0, 1.0]))
    assert out == pytest.approx([0.8, -1.1])


def test_generator_bulk_hops():
    model = ASEPModel(2, 0.3, BoundaryRates(1e-9, 1e-9))
    f = np.array([0.0, 0.0, 1.0, 0.0])  # indicator of a particle at site 2 only
    out = generator_apply(model, f)
    # state 0b01 (site 1 filled) hops right at rate 1; 0b10 hops left at rate q
    assert out[1] == pytest.approx(1.0, abs=1e-8)
    assert out[2] == pytest.approx(-0.3, abs=1e-8)


def test_rate_matrix_rows_sum_to_zero():
    Q = rate_matrix(ASEPModel(5, 0.6, BoundaryRates(0.7, 0.9, 0.2, 0.1)))
    assert np.allclose(np.asarray(Q.sum(axis=1)).ravel(), 0.0, atol=1e-14)


def test_single_site_stationary():
    r = BoundaryRates(1.0, 0.5, 0.25, 0.5)
    dist = stationary_exact(ASEPModel(1, 0.5, r))
    p = (r.alpha + r.delta) / (r.alpha + r.beta + r.gamma + r.delta)
    assert dist.probabilities[1] == pytest.approx(p, abs=1e-15)
    assert p == pytest.approx(2 / 3)


def test_two_site_matches_long_time_limit():
    model = ASEPModel(2, 0.5, BoundaryRates(1.0, 1.0))
    Q = rate_matrix(model).toarray()
    p0 = np.array([1.0, 0.0, 0.0, 0.0])
    long_run = p0 @ scipy.linalg.expm(200.0 * Q)
    assert np.allclose(stationary_exact(model).probabilities, long_run, atol=1e-12)


def test_sparse_and_dense_paths_agree():
    r = BoundaryRates(0.7, 0.9, 0.2, 0.1)
    m = ASEPModel(11, 0.6, r)
    dist = stationary_exact(m)
    assert dist.residual < 1e-12
    Q = rate_matrix(m).toarray()
    assert np.max(np.abs(dist.probabilities @ Q)) < 1e-12
    with pytest.raises(ParameterError):
        stationary_exact(ASEPModel(21, 0.6, r))


@pytest.mark.parametrize("n", [3, 6])
def test_particle_hole_symmetry(n):
    # exchanging particles and holes and reflecting space swaps (alpha, gamma) with (beta, delta)
    r = BoundaryRates(0.7, 0.9, 0.2, 0.1)
    a = stationary_exact(ASEPModel(n, 0.4, r)).probabilities
    b = stationary_exact(ASEPModel(n, 0.4, BoundaryRates(r.beta, r.alpha, r.delta, r.gamma))).probabilities
    full = (1 << n) - 1
    states = np.arange(1 << n)
    mirrored = np.array([int(format(s ^ full, f"0{n}b")[::-1], 2) for s in states])
    assert np.allclose(a, b[mirrored], atol=1e-14)


def test_kappa_roots():
    kp, km = kappa_pm(0.5, 0.7, 0.2)
    for k in (kp, km):
        assert 0.7 * k * k - (1 - 0.5 - 0.7 + 0.2) * k - 0.2 == pytest.approx(0.0, abs=1e-15)
    assert kp * km == pytest.approx(-0.2 / 0.7, abs=1e-15)
    with pytest.raises(ParameterError):
        kappa_pm(0.5, 0.0, 0.2)


def test_scaling_round_trip_to_exponents():
    q, rates = scaling_to_rates(SI)
    A, B, C, D = rates_to_abcd(ASEPModel(100, q, rates))
    assert A == pytest.approx(q**0.7, abs=1e-12)
    assert B == pytest.approx(-(q**1.5), abs=1e-12)
    assert C == pytest.approx(q**0.8, abs=1e-12)
    assert D == pytest.approx(-(q**0.6), abs=1e-12)


@given(
    st.floats(0.05, 2.0),
    st.floats(0.05, 2.0),
    st.floats(0.0, 1.5),
    st.floats(0.0, 1.5),
    st.floats(0.0, 0.95),
)
def test_rates_round_trip(alpha, beta, gamma, delta, q):
    model = ASEPModel(3, q, BoundaryRates(alpha, beta, gamma, delta))
    back = abcd_to_rates(*rates_to_abcd(model), q)
    for name in ("alpha", "beta", "gamma", "delta"):
        want = getattr(model.rates, name)
        assert getattr(back, name) == pytest.approx(want, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("n", [4, 100, 10_000])
def test_liggett_condition_at_unit_w_r(n):
    q, r = scaling_to_rates(ScalingInput(0.8, 0.7, 1.0, 1.0, n))
    assert abs(r.alpha + r.gamma / q - 1) < 1e-14
    assert abs(r.beta + r.delta / q - 1) < 1e-14


def test_boundary_densities_ignore_w_r():
    base = boundary_densities(ScalingInput(0.8, 0.7, 1.0, 1.0, 50).model())
    other = boundary_densities(ScalingInput(0.8, 0.7, 1.5, 0.6, 50).model())
    assert base == pytest.approx(other, abs=1e-15)


@pytest.mark.parametrize(
    "state,n,x,want",
    [(0b1011, 4, 0.0, 0), (0b1111, 4, 1.0, 4), (0b0101, 4, 1.0, 0), (0b0001, 4, 0.5, 0), (0b0011, 4, 0.5, 2)],
)
def test_height_increments(state, n, x, want):
    assert height_increments(state, n, x) == want


def test_height_increments_vectorised_and_checked():
    out = height_increments(np.arange(8), 3, 1.0)
    assert list(out) == [-3, -1, -1, 1, -1, 1, 1, 3]
    with pytest.raises(ParameterError):
        height_increments(0, 3, 1.5)


def test_laplace_spec():
    spec = LaplaceSpec((0.3, 0.7), (0.5, 0.8))
    assert spec.s == pytest.approx((1.3, 0.8, 0.0))
    assert spec.n_points(10) == (0, 3, 7, 10)
    with pytest.raises(ParameterError):
        LaplaceSpec((0.7, 0.3), (1.0, 1.0))
    with pytest.raises(ParameterError):
        LaplaceSpec((0.5,), (-1.0,))


def test_trivial_transforms():
    small = ScalingInput(0.8, 0.7, 1.5, 0.6, 6).model()
    dist = stationary_exact(small)
    assert laplace_exact(small, LaplaceSpec((0.5,), (0.0,)), dist) == pytest.approx(1.0, abs=1e-15)
    assert pgf_exact(small, np.ones(6), dist) == pytest.approx(1.0, abs=1e-15)
    assert pgf_exact(small, np.zeros(6), dist) == pytest.approx(dist.probabilities[0], abs=1e-16)


def test_laplace_matches_direct_sum():
    si = ScalingInput(0.8, 0.7, 1.5, 0.6, 5)
    model = si.model()
    dist = stationary_exact(model)
    spec = LaplaceSpec((0.4, 1.0), (0.6, 0.3))
    direct = 0.0
    for s, p in enumerate(dist.probabilities):
        bits = [(s >> i) & 1 for i in range(5)]
        h = lambda k: sum(2 * b - 1 for b in bits[:k])
        direct += p * math.exp(-(0.6 * h(2) + 0.3 * h(5)) / math.sqrt(5))
    assert laplace_exact(model, spec, dist) == pytest.approx(direct, rel=1e-14)


def test_pgf_validation():
    model = ASEPModel(2, 0.5, BoundaryRates(1.0, 1.0))
    with pytest.raises(ParameterError):
        pgf_exact(model, [1.0])
    with pytest.raises(ParameterError):
        pgf_exact(model, [1.0, -1.0])


def test_mc_single_site_occupation():
    r = BoundaryRates(1.0, 0.5, 0.25, 0.5)
    res = mc_simulate(ASEPModel(1, 0.5, r), horizon=4000.0, burn_in=10.0, seed=3)
    p = (r.alpha + r.delta) / (r.alpha + r.beta + r.gamma + r.delta)
    assert abs(res.occupation[0] - p) < 3.5 * res.occupation_se[0]


def test_mc_matches_exact_occupation():
    model = ScalingInput(0.8, 0.7, 1.5, 0.6, 10).model()
    exact = stationary_exact(model).occupation()
    # enough replicas that the replica-spread error bar is close to Gaussian
    res = mc_simulate(model, horizon=3000.0, burn_in=100.0, seed=11, n_replicas=16)
    z = (res.occupation - exact) / res.occupation_se
    assert np.max(np.abs(z)) < 4.0


def test_mc_laplace_matches_exact():
    model = ScalingInput(0.8, 0.7, 1.5, 0.6, 8).model()
    spec = LaplaceSpec((0.5,), (1.0,))
    res = mc_simulate(model, horizon=4000.0, burn_in=100.0, seed=5, laplace=spec)
    assert abs(res.laplace - laplace_exact(model, spec)) < 4.0 * res.laplace_se


def test_mc_is_reproducible():
    model = ASEPModel(6, 0.5, BoundaryRates(0.8, 0.6, 0.1, 0.2))
    a = mc_simulate(model, 200.0, 10.0, seed=42, moment_pairs=((0.0, 0.5),))
    b = mc_simulate(model, 200.0, 10.0, seed=42, moment_pairs=((0.0, 0.5),))
    assert np.array_equal(a.occupation, b.occupation)
    assert np.array_equal(a.moments, b.moments)
    c = mc_simulate(model, 200.0, 10.0, seed=43)
    assert not np.array_equal(a.occupation, c.occupation)
    with pytest.raises(ParameterError):
        mc_simulate(model, 10.0, 20.0, seed=0)
