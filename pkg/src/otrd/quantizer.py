"""M-level scalar quantizers: Lloyd-Max, exact 1-D k-means, extremal EMD.

All three minimize the expected distortion of mapping each source atom to a
codeword.  For squared error the optimal cells are contiguous in sorted atom
order, which is what makes the dynamic program exact.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .exact_ot import emd
from .measures import DiscreteDistribution, squared_error_matrix

log = logging.getLogger(__name__)

DEFAULT_SEED = 0


@dataclass(frozen=True)
class Quantizer:
    codebook: np.ndarray
    assignment: np.ndarray
    distortion: float
    induced_q: DiscreteDistribution
    iterations: int = 0
    history: tuple = ()

    @property
    def levels(self) -> int:
        return self.codebook.size


def _source(p_x):
    if not isinstance(p_x, DiscreteDistribution) or p_x.atoms is None:
        raise ValueError("quantizer design needs a distribution with atoms")
    return p_x.weights, p_x.atoms


def _check_levels(M):
    if int(M) != M or M < 1:
        raise ValueError(f"number of levels must be a positive integer, got {M!r}")
    return int(M)


def _sq(x, y):
    return (x - y) ** 2


def _assign(atoms, codebook, dist):
    """Nearest codeword per atom; np.argmin already takes the lowest index on ties."""
    return np.argmin(dist(atoms[:, None], codebook[None, :]), axis=1)


def _build(w, atoms, codebook, assignment, dist, iterations=0, history=()):
    mass = np.bincount(assignment, weights=w, minlength=codebook.size)
    distortion = float(w @ dist(atoms, codebook[assignment]))
    return Quantizer(
        codebook=np.asarray(codebook, float),
        assignment=np.asarray(assignment, int),
        distortion=distortion,
        induced_q=DiscreteDistribution.from_weights(mass, codebook),
        iterations=iterations,
        history=tuple(history),
    )


def _cell_center(atoms, w, dist):
    if dist is _sq:
        return float(w @ atoms / w.sum())
    # numeric 1-D minimization over the cell's range
    lo, hi = atoms.min(), atoms.max()
    if lo == hi:
        return float(lo)
    res = minimize_scalar(lambda y: float(w @ dist(atoms, y)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


def _lloyd_run(w, atoms, codebook, dist, tol, max_iter):
    codebook = codebook.astype(float).copy()
    history = []
    it = 0
    while True:
        assignment = _assign(atoms, codebook, dist)
        per_atom = w * dist(atoms, codebook[assignment])
        history.append(float(per_atom.sum()))
        if it >= max_iter:
            log.warning("lloyd_max: stopped after %d iterations", it)
            break
        it += 1
        new = codebook.copy()
        counts = np.bincount(assignment, weights=w, minlength=codebook.size)
        for k in range(codebook.size):
            cell = assignment == k
            if counts[k] > 0:
                new[k] = _cell_center(atoms[cell], w[cell], dist)
        empty = np.flatnonzero(counts <= 0)
        for k in empty:
            # reseed at the atom currently paying the most distortion
            worst = int(np.argmax(per_atom))
            new[k] = atoms[worst]
            per_atom[worst] = 0.0
        moved = float(np.max(np.abs(new - codebook)))
        codebook = new
        if moved <= tol and empty.size == 0:
            assignment = _assign(atoms, codebook, dist)
            history.append(float(w @ dist(atoms, codebook[assignment])))
            break
    return codebook, assignment, it, history


def initial_codebooks(p_x, M: int, restarts: int, seed: int = DEFAULT_SEED):
    """Codebooks drawn by weighted sampling of distinct atoms, one per restart."""
    w, atoms = _source(p_x)
    support = np.flatnonzero(w > 0)
    k = min(M, support.size)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(restarts):
        pick = rng.choice(support, size=k, replace=False, p=w[support] / w[support].sum())
        out.append(np.sort(atoms[pick]))
    return out


def lloyd_max(
    p_x,
    M: int,
    init=None,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    restarts: int = 1,
    seed: int = DEFAULT_SEED,
    distortion: Optional[Callable] = None,
) -> Quantizer:
    """Lloyd-Max alternation from ``init`` or from ``restarts`` seeded codebooks.

    ``init`` may be an explicit codebook; otherwise initial codebooks come
    from :func:`initial_codebooks`.  The best restart wins (first on ties).
    ``distortion`` replaces squared error with any elementwise d(x, y); cell
    centers are then found numerically.
    """
    M = _check_levels(M)
    w, atoms = _source(p_x)
    dist = _sq if distortion is None else distortion
    if init is not None:
        starts = [np.asarray(init, float)]
    else:
        starts = initial_codebooks(p_x, M, max(restarts, 1), seed)
    best = None
    for start in starts:
        cb, asg, it, hist = _lloyd_run(w, atoms, start, dist, tol, max_iter)
        q = _build(w, atoms, cb, asg, dist, it, hist)
        if best is None or q.distortion < best.distortion:
            best = q
    return best


def kmeans_1d_exact(p_x, M: int) -> Quantizer:
    """Globally optimal squared-error quantizer by DP over contiguous cells."""
    M = _check_levels(M)
    w_all, atoms_all = _source(p_x)
    keep = w_all > 0
    order = np.argsort(atoms_all[keep], kind="stable")
    x = atoms_all[keep][order]
    w = w_all[keep][order]
    n = x.size
    k = min(M, n)

    # prefix sums give the cost of any cell [i, j) in O(1)
    W = np.concatenate([[0.0], np.cumsum(w)])
    S = np.concatenate([[0.0], np.cumsum(w * x)])
    Q = np.concatenate([[0.0], np.cumsum(w * x * x)])

    def cost(i, j):
        m = W[j] - W[i]
        s = S[j] - S[i]
        return max(Q[j] - Q[i] - s * s / m, 0.0)

    D = np.full((k + 1, n + 1), np.inf)
    arg = np.zeros((k + 1, n + 1), dtype=int)
    D[0, 0] = 0.0
    for c in range(1, k + 1):
        for j in range(c, n + 1):
            best, at = np.inf, c - 1
            for i in range(c - 1, j):
                v = D[c - 1, i] + cost(i, j)
                if v < best:
                    best, at = v, i
            D[c, j], arg[c, j] = best, at

    bounds = [n]
    for c in range(k, 0, -1):
        bounds.append(arg[c, bounds[-1]])
    bounds = bounds[::-1]
    codebook = np.array([(S[b] - S[a]) / (W[b] - W[a]) for a, b in zip(bounds, bounds[1:])])
    # assign every atom (including zero-weight ones) to its nearest codeword
    assignment = _assign(atoms_all, codebook, _sq)
    return _build(w_all, atoms_all, codebook, assignment, _sq)


def extremal_emd_quantizer(
    p_x,
    M: int,
    restarts: int = 20,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    seed: int = DEFAULT_SEED,
) -> Quantizer:
    """min over Q with at most M atoms of W(p_x, Q), squared-error cost.

    Alternates two exact partial minimizations of W(p_x, Q) over Q's
    locations and weights.  With locations fixed the optimal weights put each
    atom's mass on its nearest codeword; the optimal plan is then solved (and
    certified) by :func:`emd` and its column sums become Q's weights.  With
    the plan fixed, moving each codeword to the barycenter of the mass it
    receives is optimal.  The final quantizer is certified by checking that
    the EMD cost of its induced Q equals its distortion within 1e-9.
    """
    M = _check_levels(M)
    w, atoms = _source(p_x)
    best = None
    for start in initial_codebooks(p_x, M, max(restarts, 1), seed):
        cb = start.copy()
        history = []
        it = 0
        while True:
            nearest = _assign(atoms, cb, _sq)
            weights = np.bincount(nearest, weights=w, minlength=cb.size)
            live = weights > 0
            cb, weights = cb[live], weights[live]
            plan = emd(w, weights / weights.sum(), squared_error_matrix(atoms, cb))
            history.append(plan.cost)
            pi = plan.coupling.entries
            new = (pi.T @ atoms) / pi.sum(axis=0)
            it += 1
            moved = float(np.max(np.abs(new - cb)))
            cb = new
            if moved <= tol or it >= max_iter:
                break
        # empty cells left nothing to move; top up with the worst-served atoms
        while cb.size < min(M, np.count_nonzero(w > 0)):
            asg = _assign(atoms, cb, _sq)
            per_atom = w * _sq(atoms, cb[asg])
            cb = np.sort(np.append(cb, atoms[int(np.argmax(per_atom))]))
            cb, asg, extra, hist = _lloyd_run(w, atoms, cb, _sq, tol, max_iter)
            it += extra
            history.extend(hist)
        asg = _assign(atoms, cb, _sq)
        q = _build(w, atoms, cb, asg, _sq, it, history)
        if best is None or q.distortion < best.distortion:
            best = q

    cert = emd(w, best.induced_q.weights, squared_error_matrix(atoms, best.codebook))
    if abs(cert.cost - best.distortion) > 1e-9:
        raise RuntimeError(
            f"EMD certificate failed: cost {cert.cost!r} vs distortion {best.distortion!r}"
        )
    return best
