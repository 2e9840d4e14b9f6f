"""Randomized invariants driven by hypothesis."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from irs_noma import ccm
from irs_noma.ee import sum_rate
from irs_noma.eigen import eigh_jacobi
from irs_noma.noma_power import sic_rates, solve_power_lp
from irs_noma.oma import oma_equal_share, oma_powermin
from irs_noma.penalty import smooth_max, smooth_min
from irs_noma.scenario import ScenarioConfig, effective_gains, order_keys, random_phases, sample_channels

finite = st.floats(-1e3, 1e3, allow_nan=False)
gains = st.floats(1e-2, 1e3)
rates = st.floats(0.0, 3.0)


def complex_vectors(min_size=1, max_size=16):
    return st.integers(min_size, max_size).flatmap(
        lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite))
    ).map(lambda t: t[0] + 1j * t[1])


@st.composite
def point_and_vector(draw, max_size=16):
    n = draw(st.integers(1, max_size))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    w = ccm.normalize(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    scale = draw(st.floats(1e-6, 1e3))
    v = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return w, v


@settings(max_examples=200, deadline=None)
@given(point_and_vector())
def test_projection_is_tangent_and_idempotent(wv):
    w, v = wv
    xi = ccm.project_tangent(w, v)
    scale = max(1.0, np.abs(v).max())
    assert np.abs(np.real(xi * np.conj(w))).max() <= 1e-10 * scale
    assert np.abs(ccm.project_tangent(w, xi) - xi).max() <= 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(point_and_vector())
def test_retraction_lands_on_the_manifold(wv):
    w, v = wv
    xi = ccm.project_tangent(w, v)
    z = ccm.retract(w, xi)
    assert np.abs(np.abs(z) - 1.0).max() <= 1e-14


@settings(max_examples=200, deadline=None)
@given(complex_vectors())
def test_normalize_gives_unit_modulus(z):
    w = ccm.normalize(z)
    assert np.abs(np.abs(w) - 1.0).max() <= 1e-14
    nz = z != 0
    assert np.allclose(w[nz] * np.abs(z[nz]), z[nz], rtol=1e-12, atol=0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(gains, rates), min_size=1, max_size=4))
def test_power_lp_binds_every_rate(users):
    a = np.sort([g for g, _ in users])[::-1]
    R = np.array([r for _, r in users])
    p = solve_power_lp(a, R, 1.0)
    assert np.all(p >= 0)
    assert np.abs(sic_rates(p, a, 1.0) - R).max() <= 1e-9


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(gains, st.floats(0.0, 10.0)), min_size=1, max_size=6),
       st.floats(1e-3, 10.0))
def test_sum_rate_identity(users, sigma2):
    a = np.array([g for g, _ in users])
    p = np.array([x for _, x in users])
    assert abs(np.sum(sic_rates(p, a, sigma2)) - sum_rate(p, a, sigma2)) <= 1e-10


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 1e3), st.floats(0.05, 3.0)), min_size=1, max_size=4))
def test_oma_powermin_dominates_equal_share(users):
    c = np.array([g for g, _ in users])
    R = np.array([r for _, r in users])
    opt = oma_powermin(c, R, 1.0)
    eq = oma_equal_share(c, R, 1.0)
    assert abs(opt.alpha.sum() - 1.0) <= 1e-10
    assert np.all(opt.alpha >= 0)
    assert opt.average_power <= eq.average_power * (1 + 1e-9)
    achieved = opt.alpha * np.log2(1.0 + opt.p * c)
    assert np.abs(achieved - R).max() <= 1e-9 * max(1.0, R.max())


@settings(max_examples=300, deadline=None)
@given(finite, st.floats(1e-8, 10.0))
def test_smooth_max_bounds(x, u):
    s = smooth_max(x, u)
    hinge = max(0.0, x)
    assert hinge - u / 2 - 1e-12 <= s <= hinge + 1e-12


@settings(max_examples=300, deadline=None)
@given(arrays(float, st.integers(1, 6), elements=st.floats(1e-6, 1e3)), st.floats(0.5, 200.0))
def test_smooth_min_is_a_lower_bound(C, gamma):
    # (sum C_k^-gamma)^(-1/gamma) lies in [n^(-1/gamma) min C, min C]
    m = smooth_min(C, gamma)
    assert m <= C.min() * (1 + 1e-12)
    assert m >= C.size ** (-1.0 / gamma) * C.min() * (1 - 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 33), st.integers(0, 2 ** 32 - 1))
def test_jacobi_reconstructs_hermitian_matrices(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = X + X.conj().T
    lam, Q = eigh_jacobi(A)
    assert np.linalg.norm(A - (Q * lam) @ Q.conj().T) <= 1e-10 * np.linalg.norm(A)
    assert np.all(np.diff(lam) >= 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000), st.integers(0, 2 ** 32 - 1))
def test_sampled_channels_are_sic_sorted(L, trial, seed):
    cfg = ScenarioConfig(L=L, seed=seed % 1000)
    ch = sample_channels(cfg, trial)
    keys = order_keys(ch.g, ch.h, ch.v)
    assert np.all(np.diff(keys) <= 0)
    w = random_phases(L, np.random.default_rng(seed))
    a = effective_gains(ch, w)
    assert np.all(a >= 0) and np.all(a <= keys ** 2 * (1 + 1e-12))
