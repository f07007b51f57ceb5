import itertools

import numpy as np
import pytest

from otrd.exact_ot import emd, monotone_coupling
from otrd.measures import squared_error_matrix


def enumerate_basic_solutions(a, b, c):
    """Brute-force oracle: every basis of the transportation polytope."""
    n, m = c.shape
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    rhs = np.concatenate([a, b])
    best = np.inf
    for cols in itertools.combinations(range(n * m), n + m - 1):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < n + m - 1:
            continue
        x, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.max(np.abs(sub @ x - rhs)) > 1e-12 or np.any(x < -1e-12):
            continue
        best = min(best, float(c.ravel()[list(cols)] @ x))
    return best


def test_identity_cost_zero():
    mu = np.array([0.2, 0.3, 0.5])
    d = 1.0 - np.eye(3)
    assert emd(mu, mu, d).cost == 0.0


def test_point_masses():
    assert emd([1.0], [1.0], [[2.5]]).cost == 2.5


def test_two_by_two_example():
    r = emd([0.4, 0.6], [0.5, 0.5], [[0, 1], [1, 0]])
    assert r.cost == pytest.approx(0.1, abs=1e-15)
    np.testing.assert_allclose(r.coupling.entries, [[0.4, 0.0], [0.1, 0.5]], atol=1e-15)


def test_zero_atoms_dropped_and_restored():
    r = emd([0.5, 0.0, 0.5], [0.0, 1.0], [[1, 2], [3, 4], [5, 6]])
    assert r.cost == pytest.approx(4.0)
    assert r.coupling.shape == (3, 2)
    assert np.all(r.coupling.entries[1] == 0) and np.all(r.coupling.entries[:, 0] == 0)
    assert r.dual_feasibility_violation([[1, 2], [3, 4], [5, 6]]) <= 1e-12


def test_input_errors():
    with pytest.raises(ValueError):
        emd([1.0], [1.0], [[np.inf]])
    with pytest.raises(ValueError):
        emd([0.5, 0.5], [0.6, 0.5], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        emd([1.0], [1.0], np.zeros((2, 2)))


def test_against_basis_enumeration(rng):
    for _ in range(20):
        a = rng.dirichlet(np.ones(3))
        b = rng.dirichlet(np.ones(4))
        c = rng.uniform(0, 1, (3, 4))
        assert emd(a, b, c).cost == pytest.approx(enumerate_basic_solutions(a, b, c), abs=1e-9)


def test_monotone_coupling_is_optimal_in_1d(rng):
    for _ in range(20):
        x = np.sort(rng.normal(size=5))
        y = np.sort(rng.normal(size=4))
        a = rng.dirichlet(np.ones(5))
        b = rng.dirichlet(np.ones(4))
        d = squared_error_matrix(x, y).entries
        nw = monotone_coupling(a, b)
        assert emd(a, b, d).cost == pytest.approx(float(np.sum(nw * d)), abs=1e-10)


def test_certificates_and_product_bound(rng):
    for _ in range(30):
        n, m = rng.integers(1, 9, size=2)
        a = rng.dirichlet(np.ones(n))
        b = rng.dirichlet(np.ones(m))
        c = rng.uniform(0, 3, (n, m))
        r = emd(a, b, c)
        assert r.dual_feasibility_violation(c) <= 1e-9
        assert r.complementary_slackness_violation(c) <= 1e-9
        assert r.cost == pytest.approx(r.dual_objective, abs=1e-9)
        assert r.cost <= float(a @ c @ b) + 1e-10
        assert r.cost == pytest.approx(float(np.sum(r.coupling.entries * c)), abs=1e-10)


def test_permutation_invariance(rng):
    a = rng.dirichlet(np.ones(5))
    b = rng.dirichlet(np.ones(6))
    c = rng.uniform(0, 1, (5, 6))
    pr, pc = rng.permutation(5), rng.permutation(6)
    assert emd(a[pr], b[pc], c[np.ix_(pr, pc)]).cost == pytest.approx(emd(a, b, c).cost, abs=1e-12)
