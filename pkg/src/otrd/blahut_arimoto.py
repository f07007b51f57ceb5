"""Blahut-Arimoto alternating minimization for R(D) and channel capacity."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .measures import (
    ZERO_WEIGHT,
    DiscreteDistribution,
    RDCurve,
    RDPoint,
    as_matrix,
    _weights,
)

log = logging.getLogger(__name__)

WARM_FLOOR = 1e-8


@dataclass(frozen=True)
class BaRdResult:
    point: RDPoint
    q_y: DiscreteDistribution
    conditional: np.ndarray
    fixed_point_residual: float
    iterations: int
    converged: bool
    p_x: np.ndarray

    @property
    def joint(self) -> np.ndarray:
        return self.p_x[:, None] * self.conditional

    def marginal_consistency(self) -> float:
        """Sup-norm gap between q_y and the output marginal of the joint."""
        return float(np.max(np.abs(self.q_y.weights - self.p_x @ self.conditional)))


@dataclass(frozen=True)
class CapacityResult:
    capacity_nats: float
    input_dist: DiscreteDistribution
    iterations: int
    converged: bool
    upper_bound: float
    lower_bound_history: tuple = ()


def _ba_conditional(log_q, neg_ld):
    """Right side of the BA conditional update: q(y) e^{-lam d} / normalizer."""
    z = neg_ld + log_q[None, :]
    z = z - z.max(axis=1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=1, keepdims=True)


def _rate(p_x, cond, q):
    """Sum_x p(x) KL(cond[x] || q)."""
    mask = cond > ZERO_WEIGHT
    ratio = np.ones_like(cond)
    ratio[mask] = cond[mask] / np.broadcast_to(q, cond.shape)[mask]
    return float(np.sum((p_x[:, None] * cond)[mask] * np.log(ratio[mask])))


def ba_rd(
    p_x,
    d,
    lam: float,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    q_init: Optional[np.ndarray] = None,
    y_atoms=None,
) -> BaRdResult:
    """One point of R(D) at Lagrange multiplier ``lam``.

    Alternates the conditional update and the output-marginal update until
    the conditional reproduces itself within ``tol`` (sup norm).  Output
    letters whose mass drops below 1e-15 are frozen at zero.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    px_full = _weights(p_x).astype(float)
    c_full = as_matrix(d).astype(float)
    if c_full.shape[0] != px_full.size:
        raise ValueError("distortion rows must match the source alphabet")
    keep = px_full > ZERO_WEIGHT
    px = px_full[keep] / px_full[keep].sum()
    c = c_full[keep]
    m = c.shape[1]
    neg_ld = -lam * c

    q = np.full(m, 1.0 / m) if q_init is None else np.asarray(q_init, float).copy()
    q = np.where(q < ZERO_WEIGHT, 0.0, q)
    q /= q.sum()
    with np.errstate(divide="ignore"):
        log_q = np.log(q)
    cond = _ba_conditional(log_q, neg_ld)

    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        q = px @ cond
        q = np.where(q < ZERO_WEIGHT, 0.0, q)
        q /= q.sum()
        with np.errstate(divide="ignore"):
            log_q = np.log(q)
        new = _ba_conditional(log_q, neg_ld)
        live = q > 0
        residual = float(np.max(np.abs(new[:, live] - cond[:, live])))
        cond = new
        if residual <= tol:
            break
    converged = residual <= tol
    if not converged:
        log.warning("ba_rd: lambda=%g not converged (residual %.3g)", lam, residual)

    # report the q that generated the final conditional, re-projected so the
    # output-marginal relation holds to round-off
    q = px @ cond
    rate = _rate(px, cond, q)
    dist = float(np.sum(px[:, None] * cond * c))

    cond_full = np.zeros((px_full.size, m))
    cond_full[keep] = cond
    # dropped source letters get the same Gibbs form (they carry no mass)
    if not np.all(keep):
        with np.errstate(divide="ignore"):
            cond_full[~keep] = _ba_conditional(np.log(np.maximum(q, 0)), -lam * c_full[~keep])
    atoms = y_atoms
    if atoms is None and isinstance(p_x, DiscreteDistribution) and p_x.atoms is not None and p_x.atoms.size == m:
        atoms = p_x.atoms
    res = BaRdResult(
        point=RDPoint(lam, rate, dist, converged),
        q_y=DiscreteDistribution.from_weights(q, atoms),
        conditional=cond_full,
        fixed_point_residual=residual,
        iterations=it,
        converged=converged,
        p_x=px_full,
    )
    return res


def rd_sweep_ba(
    p_x,
    d,
    lambdas: Sequence[float],
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    warm_start: bool = True,
    y_atoms=None,
) -> RDCurve:
    """R(D) curve over a grid of multipliers, warm-starting q_y along the grid."""
    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("lambdas must be non-empty")
    pts = []
    q = None
    # descending lambda: the optimal output support tends to shrink along the way
    for lam in sorted(lambdas, reverse=True):
        res = ba_rd(p_x, d, lam, tol, max_iter, q_init=q, y_atoms=y_atoms)
        if warm_start:
            # floor so a letter frozen at zero can come back if it has to
            q = np.maximum(res.q_y.weights, WARM_FLOOR)
        pts.append(res.point)
    return RDCurve(tuple(pts))


def ba_capacity(channel, tol: float = 1e-12, max_iter: int = 100_000) -> CapacityResult:
    """Arimoto iterations for C = max_r I(X;Y), in nats.

    Stops when the gap between the standard upper bound max_x KL(p(.|x)||q)
    and the lower bound log sum_x r(x) exp(KL(p(.|x)||q)) is at most ``tol``.
    """
    w = as_matrix(channel).astype(float)
    if w.ndim != 2 or np.any(w < 0):
        raise ValueError("channel must be a nonnegative matrix")
    if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-10:
        raise ValueError("channel rows must sum to 1")
    n = w.shape[0]
    r = np.full(n, 1.0 / n)
    pos = w > 0
    lows = []
    upper = np.inf
    it = 0
    gap = np.inf
    while it < max_iter:
        it += 1
        q = r @ w
        ratio = np.ones_like(w)
        ratio[pos] = w[pos] / np.broadcast_to(q, w.shape)[pos]
        kl = np.sum(np.where(pos, w * np.log(ratio), 0.0), axis=1)
        kmax = kl.max()
        lower = kmax + np.log(np.sum(r * np.exp(kl - kmax)))
        upper = kmax
        lows.append(float(lower))
        gap = upper - lower
        if gap <= tol:
            break
        r = r * np.exp(kl - kmax)
        r /= r.sum()
    converged = gap <= tol
    cap = lows[-1]
    return CapacityResult(
        capacity_nats=max(float(cap), 0.0),
        input_dist=DiscreteDistribution.from_weights(r),
        iterations=it,
        converged=converged,
        upper_bound=float(upper),
        lower_bound_history=tuple(lows),
    )
