import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from otrd.exact_ot import emd
from otrd.sinkhorn import _lse, sinkhorn, sinkhorn_eps_sweep

HALF = np.array([0.5, 0.5])
FLIP = np.array([[0.0, 1.0], [1.0, 0.0]])


def golden_two_by_two(eps):
    """Oracle: the 2x2 couplings of (1/2, 1/2) are [[t, 1/2-t], [1/2-t, t]]."""
    def objective(t):
        pi = np.array([[t, 0.5 - t], [0.5 - t, t]])
        return float(np.sum(pi * FLIP) + eps * np.sum(pi * np.log(pi / 0.25)))

    res = minimize_scalar(objective, bounds=(1e-12, 0.5 - 1e-12), method="bounded",
                          options={"xatol": 1e-12})
    return res.x, res.fun


def test_two_by_two_against_golden_section():
    t, obj = golden_two_by_two(1.0)
    r = sinkhorn(HALF, HALF, FLIP, 1.0)
    assert r.coupling.entries[0, 0] == pytest.approx(t, abs=1e-6)
    assert r.objective == pytest.approx(obj, abs=1e-6)
    # closed form for this instance: t = e / (2 (1 + e))
    assert r.coupling.entries[0, 0] == pytest.approx(np.e / (2 * (1 + np.e)), abs=1e-9)


def test_huge_eps_gives_product_coupling():
    a, b = np.array([0.2, 0.8]), np.array([0.3, 0.3, 0.4])
    r = sinkhorn(a, b, np.arange(6.0).reshape(2, 3), 1e6)
    np.testing.assert_allclose(r.coupling.entries, np.outer(a, b), atol=1e-6)
    assert r.kl_term <= 1e-6


def test_point_mass():
    r = sinkhorn([1.0], [1.0], [[2.0]], 0.1)
    assert r.coupling.entries[0, 0] == 1.0
    assert r.transport_cost == 2.0 and r.kl_term == 0.0


def test_zero_atoms_dropped():
    r = sinkhorn([0.5, 0.0, 0.5], [0.5, 0.5], [[0, 1], [1, 1], [1, 0]], 0.5)
    assert np.all(r.coupling.entries[1] == 0.0)
    assert np.isnan(r.f[1])
    assert r.marginal_error <= 1e-9


def test_not_converged_flag():
    rng = np.random.default_rng(1)
    c = rng.uniform(0, 1, (6, 6))
    r = sinkhorn(rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6)), c, 1e-3, max_iter=3)
    assert not r.converged
    assert r.iterations == 3


def test_masked_infinite_costs():
    d = np.array([[0.0, np.inf], [1.0, 0.0]])
    r = sinkhorn([0.5, 0.5], [0.75, 0.25], d, 0.5)
    assert r.coupling.entries[0, 1] == 0.0
    assert r.marginal_error <= 1e-9
    np.testing.assert_allclose(r.coupling.entries, [[0.5, 0.0], [0.25, 0.25]], atol=1e-9)
    # row 0 can only ship to column 0, which is too small: no feasible plan
    assert not sinkhorn([0.5, 0.5], [0.25, 0.75], d, 0.5, max_iter=2000).converged
    with pytest.raises(ValueError):
        sinkhorn([0.5, 0.5], [0.5, 0.5], [[np.inf, np.inf], [0, 0]], 0.5)


def test_lse_handles_all_minus_inf():
    z = np.array([[-np.inf, -np.inf], [0.0, np.log(3.0)]])
    np.testing.assert_allclose(_lse(z, axis=1), [-np.inf, np.log(4.0)])


def test_eps_sweep_matches_brute_force_and_is_monotone():
    res = sinkhorn_eps_sweep(HALF, HALF, FLIP, [10.0, 1.0, 0.1])
    costs = [r.transport_cost for r in res]
    assert costs == sorted(costs, reverse=True)
    for r in res:
        _, obj = golden_two_by_two(r.eps)
        assert r.objective == pytest.approx(obj, abs=1e-6)
    with pytest.raises(ValueError):
        sinkhorn_eps_sweep(HALF, HALF, FLIP, [0.1, 1.0])


def test_single_eps_sweep_equals_sinkhorn():
    (r,) = sinkhorn_eps_sweep(HALF, HALF, FLIP, [0.3])
    assert r.objective == pytest.approx(sinkhorn(HALF, HALF, FLIP, 0.3).objective, abs=1e-12)


def random_instance(seed, n=5, m=5):
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m)), rng.uniform(0, 1, (n, m))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.01, 0.1, 1.0]))
def test_invariants(seed, eps):
    a, b, c = random_instance(seed)
    r = sinkhorn(a, b, c, eps)
    assert r.converged and r.marginal_error <= 1e-9
    assert r.factorization_residual(a, b, c) <= 1e-8
    assert r.objective == pytest.approx(r.transport_cost + eps * r.kl_term, abs=1e-10)
    assert r.transport_cost >= emd(a, b, c).cost - 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_objective_monotone_in_eps(seed):
    a, b, c = random_instance(seed)
    objs = [sinkhorn(a, b, c, eps).objective for eps in (10.0, 1.0, 0.1, 0.01)]
    assert all(o2 <= o1 + 1e-9 for o1, o2 in zip(objs, objs[1:]))


def test_fixed_point_at_convergence():
    a, b, c = random_instance(7)
    eps, tol = 0.2, 1e-9
    r = sinkhorn(a, b, c, eps, tol=tol)
    g = -eps * _lse(-c / eps + (r.f / eps + np.log(a))[:, None], axis=0)
    f = -eps * _lse(-c / eps + (g / eps + np.log(b))[None, :], axis=1)
    assert np.max(np.abs(g - r.g)) <= 10 * tol
    assert np.max(np.abs(f - r.f)) <= 10 * tol


def test_transpose_symmetry():
    a, b, c = random_instance(11, 4, 6)
    r = sinkhorn(a, b, c, 0.3, tol=1e-14)
    rt = sinkhorn(b, a, c.T, 0.3, tol=1e-14)
    np.testing.assert_allclose(rt.coupling.entries, r.coupling.entries.T, atol=1e-12)


def test_small_eps_close_to_emd():
    a, b, c = random_instance(3)
    r = sinkhorn(a, b, c, 1e-3)
    assert r.converged
    assert abs(r.transport_cost - emd(a, b, c).cost) <= 0.01
