import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otrd.exact_ot import emd
from otrd.measures import DiscreteDistribution, squared_error_matrix
from otrd.quantizer import extremal_emd_quantizer, initial_codebooks, kmeans_1d_exact, lloyd_max


def brute_force_contiguous(x, w, M):
    """Oracle: try every split of the sorted atoms into M contiguous cells."""
    order = np.argsort(x)
    x, w = x[order], w[order]
    n = x.size
    best = np.inf
    for cuts in itertools.combinations(range(1, n), min(M, n) - 1):
        total = 0.0
        for a, b in zip((0,) + cuts, cuts + (n,)):
            c = w[a:b] @ x[a:b] / w[a:b].sum()
            total += w[a:b] @ (x[a:b] - c) ** 2
        best = min(best, total)
    return best


def check_quantizer(q, p, M):
    w, x = p.weights, p.atoms
    assert q.codebook.size <= M
    assert np.all((q.assignment >= 0) & (q.assignment < q.codebook.size))
    mass = np.bincount(q.assignment, weights=w, minlength=q.codebook.size)
    np.testing.assert_allclose(q.induced_q.weights, mass, atol=1e-12)
    assert q.distortion == pytest.approx(float(w @ (x - q.codebook[q.assignment]) ** 2), abs=1e-12)
    # the Kantorovich cost of the induced Q is the quantizer's distortion
    cert = emd(w, q.induced_q.weights, squared_error_matrix(x, q.codebook))
    assert cert.cost == pytest.approx(q.distortion, abs=1e-9)


def test_kmeans_examples():
    p = DiscreteDistribution(np.array([0.5, 0.5]), np.array([0.0, 1.0]))
    q = kmeans_1d_exact(p, 1)
    np.testing.assert_allclose(q.codebook, [0.5])
    assert q.distortion == pytest.approx(0.25)
    p = DiscreteDistribution(np.full(3, 1 / 3), np.array([0.0, 1.0, 4.0]))
    q = kmeans_1d_exact(p, 2)
    np.testing.assert_allclose(q.codebook, [0.5, 4.0])
    assert q.distortion == pytest.approx(1 / 6, abs=1e-15)
    assert kmeans_1d_exact(p, 3).distortion == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        kmeans_1d_exact(p, 0)


def test_kmeans_against_brute_force(rng):
    for _ in range(15):
        n = int(rng.integers(2, 8))
        x = rng.normal(size=n)
        w = rng.dirichlet(np.ones(n))
        p = DiscreteDistribution(w, x)
        for M in range(1, n + 1):
            assert kmeans_1d_exact(p, M).distortion == pytest.approx(brute_force_contiguous(x, w, M), abs=1e-12)


def test_single_level_is_mean(ten_atom):
    p = ten_atom.source
    for q in (lloyd_max(p, 1), extremal_emd_quantizer(p, 1), kmeans_1d_exact(p, 1)):
        assert q.codebook[0] == pytest.approx(p.mean(), abs=1e-12)
        assert q.distortion == pytest.approx(p.variance(), abs=1e-12)


def test_enough_levels_gives_zero(ten_atom):
    p = ten_atom.source
    for M in (10, 12):
        assert lloyd_max(p, M, restarts=3).distortion == pytest.approx(0.0, abs=1e-20)
        assert extremal_emd_quantizer(p, M, restarts=3).distortion == pytest.approx(0.0, abs=1e-20)
        assert kmeans_1d_exact(p, M).distortion == pytest.approx(0.0, abs=1e-20)


def test_symmetric_two_atoms():
    p = DiscreteDistribution(np.array([0.5, 0.5]), np.array([-1.0, 1.0]))
    q = extremal_emd_quantizer(p, 2)
    assert q.distortion == 0.0
    np.testing.assert_allclose(q.codebook, [-1.0, 1.0])


@pytest.mark.parametrize("M", [2, 3, 5])
def test_invariants_on_fixture(ten_atom, M):
    p = ten_atom.source
    for q in (lloyd_max(p, M, restarts=5), extremal_emd_quantizer(p, M, restarts=5), kmeans_1d_exact(p, M)):
        check_quantizer(q, p, M)


def test_lloyd_history_non_increasing(ten_atom):
    for init in initial_codebooks(ten_atom.source, 4, 10):
        q = lloyd_max(ten_atom.source, 4, init=init)
        assert np.all(np.diff(q.history) <= 1e-15)


def test_distortion_non_increasing_in_levels(ten_atom):
    ds = [kmeans_1d_exact(ten_atom.source, M).distortion for M in range(1, 11)]
    assert np.all(np.diff(ds) <= 0)


def test_empty_cell_reseeded():
    p = DiscreteDistribution(np.full(4, 0.25), np.array([0.0, 1.0, 10.0, 11.0]))
    # the codeword at 100 never wins a cell
    q = lloyd_max(p, 2, init=[0.5, 100.0])
    assert q.distortion == pytest.approx(0.25, abs=1e-12)
    assert q.induced_q.weights.min() > 0


def test_restarts_deterministic(ten_atom):
    a = initial_codebooks(ten_atom.source, 3, 5, seed=4)
    b = initial_codebooks(ten_atom.source, 3, 5, seed=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_custom_distortion_absolute_error():
    p = DiscreteDistribution(np.array([0.2, 0.4, 0.4]), np.array([0.0, 1.0, 5.0]))
    q = lloyd_max(p, 1, init=[2.0], distortion=lambda x, y: np.abs(x - y))
    # the weighted median minimizes absolute error
    assert q.codebook[0] == pytest.approx(1.0, abs=1e-6)


def test_requires_atoms():
    with pytest.raises(ValueError):
        lloyd_max(DiscreteDistribution(np.array([1.0])), 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_exact_never_worse_than_lloyd(seed, M):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    p = DiscreteDistribution(rng.dirichlet(np.ones(n)), rng.normal(size=n) * 3)
    assert kmeans_1d_exact(p, M).distortion <= lloyd_max(p, M, restarts=2, seed=seed).distortion + 1e-12
