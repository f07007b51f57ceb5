"""Rate-distortion through extremal entropic optimal transport.

For a fixed multiplier ``lam`` the Sinkhorn-distortion objective is

    F(q) = lam * S_{1/lam}(p_x, q) = lam * E_pi[d] + KL(pi || p_x x q),

minimized over output distributions ``q`` on a fixed reproduction grid, with
``pi`` the optimal entropic plan between ``p_x`` and ``q``.  F is convex in
``q`` and its gradient is ``lam * g`` where ``g`` is the column potential
returned by Sinkhorn.  The outer loop is exponentiated gradient (mirror
descent on the simplex) with Armijo backtracking, accelerated by projected
Newton steps whose Hessian comes from differentiating the Sinkhorn fixed
point.  For large ``lam`` the objective is close to piecewise linear around
its minimizer, so there the relative-change stop is what usually fires.
"""
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
from .sinkhorn import SinkhornResult, _lse, sinkhorn

log = logging.getLogger(__name__)

CLAMP = 1e-12
PRUNE = 1e-10
DYING = 1e-7
ARMIJO_C = 1e-4
REL_STOP = 1e-12
# objective noise from inner solves at inner_tol, relative; see the line search
STALL_RTOL = 1e-10
SUPPORT_MASS = 1e-6


@dataclass(frozen=True)
class SinkhornRdResult:
    point: RDPoint
    q_y: DiscreteDistribution
    inner: SinkhornResult
    outer_iterations: int
    outer_gradient_norm: float
    converged: bool
    objective_history: tuple = ()


@dataclass(frozen=True)
class CouplingConditionReport:
    residuals: np.ndarray
    support: np.ndarray
    max_abs_residual: float


class _Evaluator:
    """Objective, gradient and Hessian of q -> lam * S_{1/lam}(p_x, q)."""

    def __init__(self, p_x, c, lam, tol, max_iter):
        self.px, self.c, self.lam = p_x, c, lam
        self.tol, self.max_iter = tol, max_iter

    def __call__(self, q, warm):
        res = sinkhorn(self.px, q, self.c, 1.0 / self.lam, self.tol, self.max_iter,
                       f_init=warm[0], g_init=warm[1])
        # the dual value is accurate to second order in the marginal error,
        # which keeps the line-search comparisons out of the noise
        return self.lam * res.dual_value, res

    def gradient(self, q, res):
        """lam * g, centered by its q-weighted mean (g is defined up to a constant)."""
        g = self.lam * res.g
        return g - q @ g

    def hessian(self, q, res):
        """lam * dg/dq by implicit differentiation of the Sinkhorn fixed point.

        With K = pi / (p_x q^T), P = pi / p_x (row-stochastic) and Q = pi / q
        (column-stochastic), a tangent perturbation dq moves the potentials by
        (I - P Q^T) df = -eps K dq and dg = -Q^T df.  The system is singular
        along constants; adding 1 p_x^T fixes that gauge.
        """
        eps = 1.0 / self.lam
        pi = res.coupling.entries
        rows = self.px > ZERO_WEIGHT
        pi = pi[rows]
        px = self.px[rows] / self.px[rows].sum()
        P = pi / px[:, None]
        Q = pi / q[None, :]
        K = P / q[None, :]
        A = np.eye(px.size) - P @ Q.T + np.outer(np.ones(px.size), px)
        H = Q.T @ np.linalg.solve(A, eps * K)
        return self.lam * 0.5 * (H + H.T)


def _kkt_residual(q, grad, free):
    """Sup-norm of the projected gradient: |grad| on free letters, the
    descent-pointing part on letters held at the lower bound."""
    out = np.abs(grad[free]).max(initial=0.0)
    held = ~free
    if np.any(held):
        out = max(out, float(np.max(-grad[held], initial=0.0)))
    return float(out)


def _newton_direction(q, grad, H, free):
    """Equality-constrained Newton step on the free letters (sum of change 0)."""
    idx = np.flatnonzero(free)
    k = idx.size
    if k < 2:
        return None
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = H[np.ix_(idx, idx)]
    kkt[:k, k] = kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[:k] = -grad[idx]
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    step = np.zeros_like(q)
    step[idx] = sol[:k]
    if not np.all(np.isfinite(step)) or grad @ step >= 0:
        return None
    return step


def sinkhorn_rd_point(
    p_x,
    d,
    lam: float,
    outer_tol: float = 1e-7,
    outer_max_iter: int = 2_000,
    inner_tol: float = 1e-12,
    inner_max_iter: int = 100_000,
    q_init: Optional[np.ndarray] = None,
    potentials: Optional[tuple] = None,
    y_atoms=None,
) -> SinkhornRdResult:
    """Minimize q -> S_{1/lam}(p_x, q) over the simplex on the columns of ``d``.

    Each outer step tries an exponentiated-gradient step and a projected
    Newton step on the currently free letters, each with Armijo
    backtracking, and keeps whichever lowers the objective more.  Letters
    with mass below ``DYING`` and a positive centered gradient are pushed to
    the clamp.  Stops when the projected gradient is at most ``outer_tol``
    or the objective changes by at most 1e-12 relative.  A line search that
    fails with every trial within ``STALL_RTOL`` of the current objective
    also counts as converged: the inner solves cannot resolve more.
    ``outer_gradient_norm`` is the sup-norm of the projected gradient of the
    nats-scaled objective.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    c = as_matrix(d).astype(float)
    px = _weights(p_x).astype(float)
    m = c.shape[1]
    ev = _Evaluator(px, c, lam, inner_tol, inner_max_iter)

    q = np.full(m, 1.0 / m) if q_init is None else np.asarray(q_init, float).copy()
    q = np.maximum(q, CLAMP)
    q /= q.sum()
    warm = potentials if potentials is not None else (None, None)

    F, res = ev(q, warm)
    history = [F]
    inner_ok = res.converged
    eg_step = 1.0
    it = 0
    kkt = np.inf
    converged = False
    while True:
        grad = ev.gradient(q, res)
        at_bound = q <= DYING
        free = ~(at_bound & (grad > 0))
        kkt = _kkt_residual(q, grad, free)
        if kkt <= outer_tol:
            converged = True
            break
        if it >= outer_max_iter:
            break
        it += 1

        candidates = []
        H = ev.hessian(q, res)
        nd = _newton_direction(q, grad, H, free)
        if nd is not None:
            neg = nd < 0
            t_max = np.min((q[neg] - CLAMP) / -nd[neg]) if np.any(neg) else np.inf
            candidates.append(("newton", nd, min(1.0, 0.995 * t_max)))
        candidates.append(("eg", None, eg_step))

        # every candidate gets its own backtracking search; the lowest
        # objective wins.  A Newton step truncated at the boundary can be
        # tiny while EG still makes progress, and vice versa
        accepted = None
        closest = np.inf
        for kind, direction, t in candidates:
            while t > 1e-14:
                if kind == "newton":
                    q_try = q + t * direction
                else:
                    z = np.log(q) - t * grad
                    q_try = np.exp(z - _lse(z, axis=0))
                q_try = np.where(~free, CLAMP, q_try)
                q_try = np.maximum(q_try, CLAMP)
                q_try /= q_try.sum()
                F_try, res_try = ev(q_try, (res.f, res.g))
                closest = min(closest, abs(F_try - F) / max(abs(F), 1e-300))
                if F_try <= F + ARMIJO_C * float(grad @ (q_try - q)):
                    if accepted is None or F_try < F_new:
                        accepted = (kind, t)
                        q_new, F_new, res_new = q_try, F_try, res_try
                    break
                t *= 0.5
        if accepted is None:
            # every trial landed within the inner solver's noise of F, so
            # this is the relative-change stop at the achievable precision
            converged = closest <= STALL_RTOL
            log.info("sinkhorn_rd: line search stalled at lambda=%g, kkt %.3g", lam, kkt)
            break
        if accepted[0] == "eg":
            eg_step = accepted[1] * 2.0
        rel = abs(F - F_new) / max(abs(F), 1e-300)
        q, F, res = q_new, F_new, res_new
        inner_ok = inner_ok and res.converged
        history.append(F)
        if rel <= REL_STOP:
            grad = ev.gradient(q, res)
            free = ~((q <= DYING) & (grad > 0))
            kkt = _kkt_residual(q, grad, free)
            converged = True
            break

    if not converged:
        log.warning("sinkhorn_rd: lambda=%g stopped with kkt %.3g after %d steps", lam, kkt, it)

    # drop letters the minimization has driven out, then re-solve on the rest
    q = np.where(q < PRUNE, 0.0, q)
    q /= q.sum()
    final = sinkhorn(px, q, c, 1.0 / lam, inner_tol, inner_max_iter, f_init=res.f, g_init=res.g)
    inner_ok = inner_ok and final.converged

    atoms = y_atoms
    if atoms is None and isinstance(p_x, DiscreteDistribution) and p_x.atoms is not None and p_x.atoms.size == m:
        atoms = p_x.atoms
    ok = converged and inner_ok
    return SinkhornRdResult(
        point=RDPoint(lam, final.kl_term, final.transport_cost, ok),
        q_y=DiscreteDistribution.from_weights(q, atoms),
        inner=final,
        outer_iterations=it,
        outer_gradient_norm=kkt,
        converged=ok,
        objective_history=tuple(history),
    )


def rd_sweep_sinkhorn(
    p_x,
    d,
    lambdas: Sequence[float],
    outer_tol: float = 1e-7,
    outer_max_iter: int = 2_000,
    inner_tol: float = 1e-12,
    inner_max_iter: int = 100_000,
    warm_start: bool = True,
    y_atoms=None,
) -> RDCurve:
    """Trace S(D) over a multiplier grid, warm-starting q and the potentials."""
    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("lambdas must be non-empty")
    pts = []
    q = pots = None
    for lam in sorted(lambdas, reverse=True):
        r = sinkhorn_rd_point(
            p_x, d, lam, outer_tol, outer_max_iter, inner_tol, inner_max_iter,
            q_init=q, potentials=pots, y_atoms=y_atoms,
        )
        if warm_start:
            q = np.maximum(r.q_y.weights, 1e-8)
            pots = (r.inner.f, r.inner.g)
        pts.append(r.point)
    return RDCurve(tuple(pts))


def coupling_condition_check(p_x, q_y, d, lam: float) -> CouplingConditionReport:
    """Residuals of  sum_x p(x) e^{-lam d(x,y)} / sum_y' q(y') e^{-lam d(x,y')} = 1.

    One residual (left side minus one) per reproduction letter.  The
    condition holds with equality on letters that carry mass exactly when
    the single-letter optimal channel for ``q_y`` has ``q_y`` as its output
    marginal; at an optimal ``q_y`` the left side is at most 1 on the other
    letters.  ``max_abs_residual`` measures exactly that: |residual| on
    letters with mass at least ``SUPPORT_MASS``, the positive part elsewhere
    (letters an iterative solver is still driving to zero sit in between).
    """
    px = _weights(p_x).astype(float)
    q = _weights(q_y).astype(float)
    c = as_matrix(d).astype(float)
    live = q > ZERO_WEIGHT
    rows = px > ZERO_WEIGHT
    lk = -lam * c[rows]
    log_norm = _lse(lk[:, live] + np.log(q[live])[None, :], axis=1)
    log_lhs = _lse(lk - log_norm[:, None] + np.log(px[rows])[:, None], axis=0)
    resid = np.expm1(log_lhs)
    support = np.flatnonzero(q >= SUPPORT_MASS)
    off = np.setdiff1d(np.arange(q.size), support)
    worst = max(np.max(np.abs(resid[support]), initial=0.0), np.max(resid[off], initial=0.0))
    return CouplingConditionReport(resid, support, float(worst))
