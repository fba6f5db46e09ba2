"""Randomized invariants checked with hypothesis."""

import math

import numpy as np
from hypothesis import assume, given, settings, strategies as st

from ampuniv.amp_symmetric import AmpInstance, OrbitState, amp_step
from ampuniv.ensembles import GAUSSIAN, SignalSpec, make_rng, sample_rectangular
from ampuniv.experiments.stats import wilson_interval
from ampuniv.functions import Poly, Separable
from ampuniv.phase_boundary import G, alpha_star, delta_star, rho_star
from ampuniv.scalar_se import F, joint_error, mse, se_map, soft_threshold
from ampuniv.state_evolution import gaussian_poly_moment
from ampuniv.tree_oracle import Family, count_trees, enumerate_trees
from oracles import isserlis

reals = st.floats(-50, 50, allow_nan=False)
positive = st.floats(1e-3, 10)
unit = st.floats(0.02, 0.98)
LAWS = st.sampled_from(["unit_gaussian", "signed_unit", "plus_one"])


@given(reals, reals, st.floats(0, 20))
def test_soft_threshold_is_odd_shrinking_and_nonexpansive(u, v, theta):
    a, b = soft_threshold(u, theta), soft_threshold(v, theta)
    assert soft_threshold(-u, theta) == -a
    assert abs(a) <= abs(u) and abs(u - a) <= theta + 1e-12
    assert abs(a - b) <= abs(u - v) + 1e-12


@given(unit, LAWS, positive, st.floats(0, 4))
def test_mse_is_nonnegative_and_bounded(eps, law, sigma_sq, alpha):
    comps = SignalSpec(eps, law).components()
    val = mse(sigma_sq, alpha * math.sqrt(sigma_sq), comps)
    # eta(X + sigma Z) - X = sigma Z - clip, |clip| <= theta: error <= (sigma + theta)^2
    assert 0.0 <= val <= (math.sqrt(sigma_sq) * (1 + alpha)) ** 2 + 1e-12


@settings(max_examples=40, deadline=None)
@given(unit, LAWS, st.floats(0.3, 3), st.floats(0.1, 1.0), st.floats(1e-4, 3), st.floats(1.01, 3))
def test_se_map_monotone_in_noise(eps, law, alpha, delta, s2, factor):
    comps = SignalSpec(eps, law).components()
    assert se_map(s2 * factor, alpha, delta, comps) >= se_map(s2, alpha, delta, comps) - 1e-14


@settings(max_examples=40, deadline=None)
@given(unit, st.floats(0.3, 3), st.floats(0.1, 1.0), st.floats(1e-4, 3))
def test_se_map_below_linearization(eps, alpha, delta, s2):
    # concavity with F(0) = 0 puts the map under its tangent at zero
    comps = SignalSpec(eps).components()
    assert se_map(s2, alpha, delta, comps) <= G(eps, alpha) / delta * s2 * (1 + 1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0, 2), st.floats(0.1, 2), st.floats(0.05, 0.95), st.floats(0, 2))
def test_joint_error_on_the_diagonal_is_the_mse(mu, tau2, r, frac, theta):
    # identical noises: the two-time product collapses to the single-time error
    assert math.isclose(joint_error(mu, tau2, r, r, r, theta, theta), mse(r, theta, [(1.0, mu, tau2)]),
                        rel_tol=1e-7, abs_tol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0, 2), st.floats(0.1, 2), st.floats(0.1, 2), st.floats(-0.95, 0.95),
       st.floats(0, 2), st.floats(0, 2))
def test_joint_error_is_a_covariance(mu, tau2, rs, rt, c, ths, tht):
    rst = c * math.sqrt(rs * rt)
    e_s = mse(rs, ths, [(1.0, mu, tau2)])
    e_t = mse(rt, tht, [(1.0, mu, tau2)])
    j = joint_error(mu, tau2, rs, rt, rst, ths, tht)
    assert j * j <= e_s * e_t * (1 + 1e-8) + 1e-14
    assert j == joint_error(mu, tau2, rt, rs, rst, tht, ths) or math.isclose(
        j, joint_error(mu, tau2, rt, rs, rst, tht, ths), rel_tol=1e-9, abs_tol=1e-14)


@given(st.floats(0.01, 0.99))
def test_boundary_parametrizations_are_consistent(delta):
    r = rho_star(delta)
    assert 0 < r < 1
    eps = r * delta
    assert math.isclose(delta_star(eps), delta, rel_tol=1e-7, abs_tol=1e-9)
    assert math.isclose(G(eps, alpha_star(eps)), delta, rel_tol=1e-7, abs_tol=1e-9)


@given(st.integers(0, 200), st.integers(1, 200))
def test_wilson_interval_contains_estimate(k, n):
    assume(k <= n)
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


@given(st.lists(st.integers(0, 2 ** 32), min_size=1, max_size=4))
def test_rng_streams_are_reproducible(seed):
    assert np.array_equal(make_rng(tuple(seed)).random(4), make_rng(tuple(seed)).random(4))


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2 ** 16))
def test_rectangular_samples_are_reproducible(m, extra, seed):
    a = sample_rectangular(GAUSSIAN, m, m + extra, seed)
    assert a.shape == (m, m + extra) and np.array_equal(a, sample_rectangular(GAUSSIAN, m, m + extra, seed))


coeff_lists = st.lists(st.floats(-3, 3), min_size=1, max_size=4)


@given(coeff_lists, coeff_lists, st.floats(-2, 2))
def test_poly_algebra(a, b, x):
    p, q = Poly.univariate(a), Poly.univariate(b)
    pts = np.array([[x]])
    pa, qa = float(p(pts)[0]), float(q(pts)[0])
    assert math.isclose(float((p * q)(pts)[0]), pa * qa, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(float((p + q)(pts)[0]), pa + qa, rel_tol=1e-9, abs_tol=1e-9)
    h = 1e-6
    fd = (float(p(np.array([[x + h]]))[0]) - float(p(np.array([[x - h]]))[0])) / (2 * h)
    assert math.isclose(float(p.derivative(0)(pts)[0]), fd, rel_tol=1e-5, abs_tol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_wick_moments_match_pairings(seed, exps):
    assume(sum(exps) <= 8)
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((3, 3))
    S = L @ L.T
    poly = Poly(3, {tuple(exps): 1.0})
    assert math.isclose(gaussian_poly_moment(S, poly), isserlis(S, tuple(exps)), rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 5), st.integers(1, 2), st.integers(0, 2), st.integers(1, 2), st.sampled_from(list(Family)))
def test_tree_count_matches_enumeration(N, q, d, t, family):
    j = 1 if family is Family.MESSAGE else None
    assume(count_trees(N, q, d, t, family) < 20000)
    assert len(enumerate_trees(N, q, d, t, family, 0, 0, j)) == count_trees(N, q, d, t, family)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(4, 12))
def test_amp_commutes_with_relabeling(seed, N):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, N)) / math.sqrt(N)
    A = (A + A.T) / math.sqrt(2)
    np.fill_diagonal(A, 0)
    f = Separable.polynomial([0.1, 0.8, -0.3])
    x0 = rng.standard_normal(N)
    perm = rng.permutation(N)
    inst = AmpInstance(A, f, x0, check=False)
    pinst = inst.permuted(perm)
    s, ps = OrbitState.initial(inst), OrbitState.initial(pinst)
    for _ in range(3):
        s, ps = amp_step(inst, s), amp_step(pinst, ps)
    assert np.allclose(ps.x_curr, s.x_curr[perm], atol=1e-10)


@given(unit, LAWS, st.floats(0.1, 0.9), st.floats(0.3, 3))
def test_zero_noise_is_a_fixed_point(eps, law, delta, alpha):
    assert F(0.0, 0.0, delta, SignalSpec(eps, law).components()) == 0.0
