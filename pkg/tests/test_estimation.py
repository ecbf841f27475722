import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SALARY_PAIRS, random_hasse_order
from shapesurvey.constraints import DomainGrid, build_monotone, build_partial_order
from shapesurvey.estimation import (
    DomainEstimates,
    EmptyDomainError,
    SampleData,
    constrained_estimate,
    domain_estimates,
    hajek_from_weights,
    maxmin_estimate,
    pooled_blocks,
    transitive_closure,
)

MONO3 = build_monotone(DomainGrid((3,)), [0])


def _est(hajek, N_hat):
    hajek = np.asarray(hajek, dtype=float)
    N_hat = np.asarray(N_hat, dtype=float)
    return DomainEstimates(hajek * N_hat, N_hat, hajek, np.ones(hajek.size, dtype=int))


# -- sample validation ---------------------------------------------------------

def test_sample_validation():
    with pytest.raises(ValueError):
        SampleData([1.0], [0.0], [0])
    with pytest.raises(ValueError):
        SampleData([1.0], [1.5], [0])
    with pytest.raises(ValueError):
        SampleData([1.0, 2.0], [0.5, 0.5], [0, -1])
    with pytest.raises(ValueError):
        SampleData([1.0, 2.0], [0.5, 0.5], [0, 0], joint_pi=[[0.5, 0.2], [0.3, 0.5]])
    with pytest.raises(ValueError):
        SampleData([1.0, 2.0], [0.5, 0.5], [0, 0], joint_pi=[[0.4, 0.2], [0.2, 0.5]])
    with pytest.raises(ValueError):
        SampleData([1.0], [0.5], [0], design="cluster")


# -- HT / Hajek ----------------------------------------------------------------

def test_census_recovers_mean():
    e = domain_estimates(SampleData([1.0, 2.0, 3.0], np.ones(3), [0, 0, 0]), 1)
    assert (e.N_hat[0], e.t_hat[0], e.hajek[0]) == (3.0, 6.0, 2.0)


def test_constant_pi_gives_sample_mean():
    e = domain_estimates(SampleData([1.0, 3.0], [0.5, 0.5], [0, 0]), 1)
    assert (e.t_hat[0], e.N_hat[0], e.hajek[0]) == (8.0, 4.0, 2.0)


def test_stratified_desk_example():
    s = SampleData([2.0, 4.0, 10.0], [0.5, 0.5, 0.5], [0, 0, 0], stratum=[0, 0, 1])
    e = domain_estimates(s, 1)
    assert e.t_hat[0] == 32.0 and e.N_hat[0] == 6.0
    assert e.hajek[0] == pytest.approx(16 / 3, abs=1e-15)


def test_ht_mean_needs_known_sizes():
    s = SampleData([1.0, 3.0, 5.0], [0.5, 0.5, 0.25], [0, 0, 1])
    e = domain_estimates(s, 2, N_d=[4, 5])
    np.testing.assert_allclose(e.ht_mean, [8 / 4, 20 / 5])


def test_empty_domain_is_reported():
    s = SampleData([1.0, 3.0], [0.5, 0.5], [0, 2])
    with pytest.raises(EmptyDomainError) as info:
        domain_estimates(s, 3)
    assert info.value.domains == [1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3), st.integers(-20, 20))
def test_hajek_invariant_to_common_weight_scale(seed, c, k):
    rng = np.random.default_rng(seed)
    n, D = 40, 4
    y = rng.standard_normal(n)
    dom = np.concatenate([np.arange(D), rng.integers(0, D, n - D)])
    w = rng.uniform(1, 20, n)
    h1 = hajek_from_weights(y, w, dom, D)[2]
    h2 = hajek_from_weights(y, c * w, dom, D)[2]
    np.testing.assert_allclose(h1, h2, rtol=0, atol=1e-14 * np.abs(y).max())
    # powers of two rescale without rounding, so the means agree bit for bit
    h3 = hajek_from_weights(y, 2.0**k * w, dom, D)[2]
    assert h3.tobytes() == h1.tobytes()


# -- constrained estimator -------------------------------------------------------

def test_feasible_hajek_returned_bitwise():
    e = _est([1.0, 1.0 + 1e-15, 2.0], [3.0, 1.0, 7.0])
    ce = constrained_estimate(e, MONO3)
    assert ce.face == ()
    assert ce.theta.tobytes() == e.hajek.tobytes()


def test_three_domain_pool_and_block():
    ce = constrained_estimate(_est([3.0, 1.0, 2.0], [1.0, 1.0, 1.0]), MONO3)
    np.testing.assert_allclose(ce.theta, [2.0, 2.0, 2.0], atol=1e-14)
    assert ce.pooled_blocks == [(0, 1, 2)]
    np.testing.assert_array_equal(ce.block_ids(), [0, 0, 0])


def test_unequal_sizes_follow_maxmin():
    e = _est([3.0, 1.0, 2.0], [1.0, 1.0, 2.0])
    mm = maxmin_estimate(e, MONO3)
    ce = constrained_estimate(e, MONO3)
    np.testing.assert_allclose(ce.theta, mm, atol=1e-12)
    np.testing.assert_allclose(mm, [2.0, 2.0, 2.0], atol=1e-14)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        constrained_estimate(_est([1.0, 2.0], [1.0, 1.0]), MONO3)


def test_pooled_blocks_partition():
    A = build_partial_order(SALARY_PAIRS, 6)
    theta = np.array([1.0, 2.0, 1.0, 2.0, 1.0, 3.0])
    blocks = pooled_blocks(theta, A)
    assert sorted(d for b in blocks for d in b) == list(range(6))
    assert (0, 2, 4) in blocks


# -- max-min closed form ---------------------------------------------------------

def test_maxmin_examples():
    A = build_partial_order([(0, 1)], 2)
    np.testing.assert_allclose(maxmin_estimate(_est([2.0, 1.0], [1.0, 1.0]), A), [1.5, 1.5])
    iso = _est([1.0, 2.0, 3.0], [4.0, 1.0, 2.0])
    np.testing.assert_allclose(maxmin_estimate(iso, MONO3), iso.hajek)


def test_maxmin_rejects_cycles_and_large_D():
    with pytest.raises(ValueError, match="cyclic"):
        maxmin_estimate(_est([1.0, 2.0], [1.0, 1.0]), [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        maxmin_estimate(_est(np.zeros(13), np.ones(13)), [(0, 1)])


def test_transitive_closure():
    R = transitive_closure([(0, 1), (1, 2)], 4)
    assert R[0, 2] and not R[2, 0] and not R[:, 3].any()


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partial_orders_match_maxmin(seed):
    rng = np.random.default_rng(seed)
    D = int(rng.integers(2, 9))
    pairs = random_hasse_order(rng, D)
    A = build_partial_order(pairs, D)
    e = _est(rng.standard_normal(D) * 2, rng.uniform(0.5, 50.0, D))
    ce = constrained_estimate(e, A)
    np.testing.assert_allclose(ce.theta, maxmin_estimate(e, pairs), rtol=0, atol=1e-8)
    assert np.all(A.entries @ ce.theta >= -1e-8)
    # each block carries its size-weighted Hajek mean
    for block in ce.pooled_blocks:
        b = list(block)
        m = e.N_hat[b] @ e.hajek[b] / e.N_hat[b].sum()
        np.testing.assert_allclose(ce.theta[b], m, atol=1e-8)
