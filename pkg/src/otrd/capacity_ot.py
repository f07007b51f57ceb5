"""Experimental: channel capacity as a maximized entropic OT value.

The hypothesis under test is

    C = 2 * max_r S_{1/2}(r(x), r(y)),   d(x, y) = -log(p(y|x) / r(y)),

with r(y) the output distribution induced by r(x).  Costs are negative
where p(y|x) > r(y) and infinite where p(y|x) = 0; infinite entries are
masked out of the Sinkhorn log-sum-exps.

Note that the joint r(x) p(y|x) is itself a feasible coupling, with
E[d] = -I(X;Y) and KL = I(X;Y), so 2 * S_{1/2} <= -I(X;Y) <= 0 for every r.
The value computed here is therefore never positive, and the maximization
over r cannot reach a positive capacity.  The module reports that outcome
rather than hiding it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .blahut_arimoto import ba_capacity
from .measures import DiscreteDistribution, DistortionMatrix, as_matrix, _weights
from .sinkhorn import sinkhorn

log = logging.getLogger(__name__)

EPS = 0.5
FD_STEP = 1e-6
EXPERIMENTAL = True


@dataclass(frozen=True)
class CapacityOtResult:
    value_nats: float
    input_dist: DiscreteDistribution
    output_dist: DiscreteDistribution
    ba_reference: float
    discrepancy: float
    iterations: int = 0
    converged: bool = False
    experimental: bool = EXPERIMENTAL


def _channel(channel) -> np.ndarray:
    w = as_matrix(channel).astype(float)
    if w.ndim != 2 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("channel must be a finite nonnegative matrix")
    if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-10:
        raise ValueError("channel rows must sum to 1")
    return w


def output_distribution(channel, r) -> np.ndarray:
    return _weights(r) @ _channel(channel)


def capacity_cost_matrix(channel, r) -> DistortionMatrix:
    """d(x, y) = -ln(p(y|x) / r(y)); +inf where p(y|x) = 0.

    Output letters with r(y) = 0 cannot carry mass and are dropped (logged).
    """
    w = _channel(channel)
    rx = _weights(r).astype(float)
    if rx.size != w.shape[0]:
        raise ValueError("input distribution length must match channel rows")
    ry = rx @ w
    keep = ry > 0
    if not np.all(keep):
        log.info("capacity_cost_matrix: dropping output letters %s with r(y) = 0", np.flatnonzero(~keep))
    w, ry = w[:, keep], ry[keep]
    with np.errstate(divide="ignore"):
        d = -np.log(w / ry[None, :])
    return DistortionMatrix(d, allow_negative=True)


def _value(w, rx, inner_tol, inner_max_iter):
    ry = rx @ w
    keep = ry > 0
    with np.errstate(divide="ignore"):
        d = -np.log(w[:, keep] / ry[keep][None, :])
    res = sinkhorn(rx, ry[keep], d, EPS, inner_tol, inner_max_iter)
    return 2.0 * res.objective, res


def capacity_sinkhorn_value(channel, r, inner_tol: float = 1e-12, inner_max_iter: int = 100_000) -> float:
    """2 * S_{1/2}(r(x), r(y)) under the capacity cost, in nats."""
    w = _channel(channel)
    rx = _weights(r).astype(float)
    value, res = _value(w, rx, inner_tol, inner_max_iter)
    if not res.converged:
        log.warning("capacity_sinkhorn_value: inner Sinkhorn did not converge")
    return value


def _project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u * k > css - 1.0)[-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def capacity_via_ot(
    channel,
    outer_tol: float = 1e-8,
    outer_max_iter: int = 500,
    inner_tol: float = 1e-12,
    inner_max_iter: int = 100_000,
    r_floor: float = 1e-9,
) -> CapacityOtResult:
    """Maximize r -> capacity_sinkhorn_value by projected gradient ascent.

    The gradient comes from central differences (step 1e-6) along the simplex
    tangent directions e_i - 1/n.  Steps are backtracked until the value
    increases; iterates stay at least ``r_floor`` away from the boundary so
    the cost matrix stays defined.  Stops when the projected step moves r by
    at most ``outer_tol`` (sup norm).
    """
    w = _channel(channel)
    n = w.shape[0]
    r = np.full(n, 1.0 / n)

    def val(r):
        return _value(w, r, inner_tol, inner_max_iter)[0]

    def project(v):
        p = _project_simplex(v)
        p = np.maximum(p, r_floor)
        return p / p.sum()

    F = val(r)
    step = 1.0
    converged = False
    it = 0
    while it < outer_max_iter:
        it += 1
        grad = np.zeros(n)
        for i in range(n):
            e = -np.full(n, 1.0 / n)
            e[i] += 1.0
            grad[i] = (val(r + FD_STEP * e) - val(r - FD_STEP * e)) / (2 * FD_STEP)
        grad -= grad.mean()
        moved = False
        t = step
        while t > 1e-12:
            r_new = project(r + t * grad)
            F_new = val(r_new)
            if F_new > F:
                moved = True
                break
            t *= 0.5
        if not moved:
            converged = True
            break
        change = float(np.max(np.abs(r_new - r)))
        r, F = r_new, F_new
        step = min(2.0 * t, 1e3)
        if change <= outer_tol:
            converged = True
            break
    if not converged:
        log.warning("capacity_via_ot: not converged after %d iterations", it)

    ref = ba_capacity(w).capacity_nats
    return CapacityOtResult(
        value_nats=float(F),
        input_dist=DiscreteDistribution.from_weights(r),
        output_dist=DiscreteDistribution.from_weights(r @ w),
        ba_reference=float(ref),
        discrepancy=float(F - ref),
        iterations=it,
        converged=converged,
    )
