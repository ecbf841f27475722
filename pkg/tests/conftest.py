import numpy as np
import pytest

from shapesurvey.constraints import ConstraintMatrix, DomainGrid, build_monotone, build_partial_order

# salary example: grid (rank, department) = (3, 2), last factor fastest
SALARY_PAIRS = [(0, 1), (2, 3), (4, 5), (0, 4), (2, 4), (1, 5), (3, 5)]

SALARY_MATRIX = np.array([
    [-1, 1, 0, 0, 0, 0],
    [0, 0, -1, 1, 0, 0],
    [0, 0, 0, 0, -1, 1],
    [-1, 0, 0, 0, 1, 0],
    [0, 0, -1, 0, 1, 0],
    [0, -1, 0, 0, 0, 1],
    [0, 0, 0, -1, 0, 1],
], dtype=float)


@pytest.fixture
def salary_matrix():
    return build_partial_order(SALARY_PAIRS, 6)


@pytest.fixture
def double_monotone_6x4():
    return build_monotone(DomainGrid((4, 6)), [1, 0])


def random_pointed_matrix(rng, D, m):
    """Rows whose directions lie on a sphere inside an open half-space.

    Every row is then an extreme ray of the cone the rows generate and the
    rows cannot cancel, so the matrix is irreducible by construction.
    """
    c = rng.standard_normal(D)
    c /= np.linalg.norm(c)
    u = rng.standard_normal((m, D))
    u -= np.outer(u @ c, c)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rows = c + rng.uniform(0.3, 2.0) * u
    rows *= rng.uniform(0.2, 5.0, size=(m, 1))
    return ConstraintMatrix(rows)


def random_hasse_order(rng, D, p=None):
    """Random partial order on D domains given by its covering pairs."""
    perm = rng.permutation(D)
    p = rng.uniform(0.2, 0.8) if p is None else p
    R = np.zeros((D, D), dtype=bool)
    for a in range(D):
        for b in range(a + 1, D):
            if rng.random() < p:
                R[perm[a], perm[b]] = True
    if not R.any():
        R[perm[0], perm[1]] = True
    closure = R.copy()
    for k in range(D):
        closure |= closure[:, k:k + 1] & closure[k:k + 1, :]
    # drop pairs implied through an intermediate domain
    implied = (closure.astype(int) @ closure.astype(int)) > 0
    cover = closure & ~implied
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(cover))]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
