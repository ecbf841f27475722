import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SALARY_MATRIX, SALARY_PAIRS, random_pointed_matrix
from shapesurvey.constraints import (
    ConstraintError,
    ConstraintMatrix,
    DomainGrid,
    PolarEdgeSet,
    build_monotone,
    build_partial_order,
    build_tree_order,
    check_irreducible,
    transform_by_weights,
)


# -- matrix type ---------------------------------------------------------------

def test_matrix_rejects_zero_row_and_single_column():
    with pytest.raises(ConstraintError):
        ConstraintMatrix([[0.0, 0.0], [1.0, -1.0]])
    with pytest.raises(ConstraintError):
        ConstraintMatrix([[1.0], [2.0]])
    with pytest.raises(ConstraintError):
        ConstraintMatrix([[np.nan, 1.0]])


def test_matrix_is_read_only():
    A = ConstraintMatrix([[-1.0, 1.0]])
    with pytest.raises(ValueError):
        A.entries[0, 0] = 5.0


def test_grid_flattening_is_bijective():
    g = DomainGrid((3, 2, 4))
    idx = [g.index(lv) for lv in g.all_levels()]
    assert idx == list(range(g.D))
    assert all(g.levels(g.index(lv)) == tuple(lv) for lv in g.all_levels())
    # last factor varies fastest
    assert g.index((0, 0, 1)) == 1 and g.index((0, 1, 0)) == 4


# -- builders ------------------------------------------------------------------

def test_monotone_smallest_instance():
    A = build_monotone(DomainGrid((2,)), [0])
    np.testing.assert_array_equal(A.entries, [[-1.0, 1.0]])


def test_monotone_on_rank_gives_first_rows_of_salary_matrix():
    A = build_monotone(DomainGrid((3, 2)), [1])
    np.testing.assert_array_equal(A.entries, SALARY_MATRIX[:3])


def test_double_monotone_6x4_has_38_zero_sum_rows(double_monotone_6x4):
    A = double_monotone_6x4
    assert A.shape == (38, 24)
    assert A.rows_sum_to_zero
    assert np.all(np.sort(A.entries, axis=1)[:, [0, -1]] == [-1, 1])
    assert np.count_nonzero(A.entries) == 76


def test_monotone_decreasing_flips_sign():
    inc = build_monotone(DomainGrid((3,)), [0], ["inc"])
    dec = build_monotone(DomainGrid((3,)), [0], ["decreasing"])
    np.testing.assert_array_equal(dec.entries, -inc.entries)


def test_monotone_errors():
    with pytest.raises(ConstraintError, match="no constraints requested"):
        build_monotone(DomainGrid((3, 2)), [])
    with pytest.raises(ConstraintError):
        build_monotone(DomainGrid((3, 2)), [2])
    with pytest.raises(ConstraintError):
        build_monotone(DomainGrid((3, 1)), [1])


def test_tree_order_examples():
    np.testing.assert_array_equal(build_tree_order(3, 0).entries, [[-1, 1, 0], [-1, 0, 1]])
    np.testing.assert_array_equal(build_tree_order(2, 0).entries, [[-1, 1]])
    A = build_tree_order(4, 1, "root_largest")
    assert A.m == 3 and np.all(A.entries[:, 1] == 1)
    with pytest.raises(ConstraintError):
        build_tree_order(1, 0)
    with pytest.raises(ConstraintError):
        build_tree_order(3, 3)


def test_partial_order_reproduces_salary_matrix(salary_matrix):
    np.testing.assert_array_equal(salary_matrix.entries, SALARY_MATRIX)
    assert sorted(salary_matrix.order_pairs()) == sorted(SALARY_PAIRS)


def test_partial_order_errors():
    np.testing.assert_array_equal(build_partial_order([(0, 1)], 2).entries, [[-1, 1]])
    with pytest.raises(ConstraintError):
        build_partial_order([(0, 1), (0, 1)], 2)
    with pytest.raises(ConstraintError):
        build_partial_order([(1, 1)], 2)
    with pytest.raises(ConstraintError):
        build_partial_order([(0, 2)], 2)


# -- irreducibility ------------------------------------------------------------

def test_salary_matrix_irreducible(salary_matrix):
    assert check_irreducible(salary_matrix)


def test_double_monotone_irreducible(double_monotone_6x4):
    assert check_irreducible(double_monotone_6x4)


def test_two_way_pair_fails_at_origin():
    A = build_partial_order([(0, 1), (1, 0)], 2)
    cert = check_irreducible(A)
    assert not cert
    # 1*row1 + 1*row2 = 0
    c = cert.coefficients / cert.coefficients.max()
    np.testing.assert_allclose(c, [1.0, 1.0], atol=1e-8)


def test_repeated_row_witness():
    cert = check_irreducible([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [-1.0, 1.0, 0.0]])
    assert not cert
    assert cert.witness_row == 0
    np.testing.assert_allclose(cert.coefficients, [0.0, 0.0, 1.0], atol=1e-10)


def test_sum_of_rows_is_redundant():
    A = [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [-1.0, 0.0, 1.0]]
    cert = check_irreducible(A)
    assert not cert
    a = np.asarray(A)
    i = cert.witness_row
    np.testing.assert_allclose(cert.coefficients @ a, a[i], atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(2, 5), min_size=1, max_size=3), st.data())
def test_monotone_builders_always_irreducible(sizes, data):
    grid = DomainGrid(tuple(sizes))
    axes = data.draw(st.sets(st.integers(0, len(sizes) - 1), min_size=1))
    dirs = [data.draw(st.sampled_from(["inc", "dec"])) for _ in axes]
    A = build_monotone(grid, sorted(axes), dirs)
    assert A.rows_sum_to_zero
    assert check_irreducible(A)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.data())
def test_tree_builders_always_irreducible(D, data):
    root = data.draw(st.integers(0, D - 1))
    direction = data.draw(st.sampled_from(["root_smallest", "root_largest"]))
    A = build_tree_order(D, root, direction)
    assert A.rows_sum_to_zero
    assert check_irreducible(A)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_irreducibility_invariant_under_positive_column_scaling(seed):
    rng = np.random.default_rng(seed)
    D = int(rng.integers(3, 6))
    A = random_pointed_matrix(rng, D, int(rng.integers(2, 8)))
    # a reducible companion: append a positive combination of two rows
    extra = rng.uniform(0.5, 2.0) * A.entries[0] + rng.uniform(0.5, 2.0) * A.entries[1]
    B = ConstraintMatrix(np.vstack([A.entries, extra]))
    s = rng.uniform(0.1, 10.0, size=D)
    for M in (A, B):
        assert bool(check_irreducible(M)) == bool(check_irreducible(M.entries * s))
    assert check_irreducible(A) and not check_irreducible(B)


# -- weight transform ----------------------------------------------------------

def test_unit_weights_are_identity(salary_matrix):
    As, edges = transform_by_weights(salary_matrix, np.ones(6))
    np.testing.assert_array_equal(As.entries, salary_matrix.entries)
    np.testing.assert_array_equal(edges.edges, -salary_matrix.entries)


def test_three_domain_edges_match_hand_values():
    N = np.array([2.0, 5.0, 3.0])
    w = N / N.sum()
    _, edges = transform_by_weights(build_monotone(DomainGrid((3,)), [0]), w)
    r = np.sqrt(N.sum() / N)
    np.testing.assert_allclose(edges.edges, [[r[0], -r[1], 0.0], [0.0, r[1], -r[2]]], rtol=1e-14)


def test_common_weight_scale_rescales_edges(salary_matrix):
    rng = np.random.default_rng(3)
    w = rng.uniform(0.1, 1.0, 6)
    c = 7.0
    _, e1 = transform_by_weights(salary_matrix, w)
    _, e2 = transform_by_weights(salary_matrix, c * w)
    np.testing.assert_allclose(e1.edges, np.sqrt(c) * e2.edges, rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_transform_round_trip(seed):
    rng = np.random.default_rng(seed)
    D = int(rng.integers(2, 7))
    A = ConstraintMatrix(rng.standard_normal((int(rng.integers(1, 9)), D)))
    w = rng.uniform(1e-3, 10.0, D)
    As, _ = transform_by_weights(A, w)
    back, _ = transform_by_weights(As, 1.0 / w)
    np.testing.assert_allclose(back.entries, A.entries, rtol=0, atol=1e-12)


def test_transform_rejects_nonpositive_weights(salary_matrix):
    with pytest.raises(ConstraintError):
        transform_by_weights(salary_matrix, np.array([1, 1, 0, 1, 1, 1.0]))


def test_polar_edges_are_negated_rows(salary_matrix):
    np.testing.assert_array_equal(PolarEdgeSet.from_matrix(salary_matrix).edges, -SALARY_MATRIX)
