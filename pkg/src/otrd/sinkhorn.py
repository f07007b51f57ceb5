"""Entropy-regularized optimal transport by log-domain Sinkhorn iterations.

The regularizer is KL(pi || mu x nu), so the optimal plan has the form

    pi_ij = mu_i nu_j exp((f_i + g_j - d_ij) / eps)

with row/column log-potentials ``f``, ``g`` (distortion units).  Entries with
``d_ij = +inf`` are masked out of every log-sum-exp, which is how channel
costs with forbidden transitions are handled.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .measures import ZERO_WEIGHT, Coupling, as_matrix, _weights

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
NEWTON_MAX_STEPS = 500
NEWTON_PATIENCE = 25
EIG_FLOOR = 1e-13
SLOW_CHECK = 20
SLOW_RATIO = 0.9


@dataclass(frozen=True)
class SinkhornResult:
    coupling: Coupling
    f: np.ndarray
    g: np.ndarray
    transport_cost: float
    kl_term: float
    objective: float
    eps: float
    iterations: int
    marginal_error: float
    converged: bool
    # <f, mu> + <g, nu> - eps (mass - 1); error is second order in the marginal gap
    dual_value: float = float("nan")

    def factorization_residual(self, mu, nu, d) -> float:
        """Max relative error of the Gibbs form on entries above 1e-14."""
        a, b, c = _weights(mu), _weights(nu), as_matrix(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            model = np.outer(a, b) * np.exp((self.f[:, None] + self.g[None, :] - c) / self.eps)
        p = self.coupling.entries
        big = p > 1e-14
        if not np.any(big):
            return 0.0
        return float(np.max(np.abs(model[big] - p[big]) / p[big]))


def _lse(z, axis):
    """log-sum-exp along ``axis`` with max subtraction; all -inf gives -inf."""
    zmax = np.max(z, axis=axis, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(z - zmax), axis=axis, keepdims=True)) + zmax
    return np.squeeze(out, axis=axis)


def _log_kernel(c, eps):
    """-d/eps with infinite costs mapped to -inf."""
    with np.errstate(invalid="ignore"):
        return np.where(np.isinf(c), -np.inf, -c / eps)


def _semidual_newton(f, lk, log_a, log_b, eps, tol, max_iter, it):
    """Maximize <f, a> + <g(f), b>, g(f) the column best response, by Newton.

    The gradient is a - rowsum(pi); the negated Hessian times eps is
    diag(rowsum(pi)) - pi diag(1/b) pi^T, singular along constants.
    """
    a, b = np.exp(log_a), np.exp(log_b)
    n = a.size

    def state(f):
        g = -eps * _lse(lk + (f / eps + log_a)[:, None], axis=0)
        pi = np.exp(lk + (f / eps + log_a)[:, None] + (g / eps + log_b)[None, :])
        return g, pi, float(a @ f + b @ g)

    g, pi, val = state(f)
    r = pi.sum(axis=1)
    err = float(np.sum(np.abs(r - a)))
    steps = 0
    best = err
    while err > tol and it < max_iter and steps < NEWTON_MAX_STEPS:
        it += 1
        steps += 1
        grad = a - r
        # columns of pi are exact, so the Hessian is the Laplacian of the row
        # graph with weights (pi diag(1/b) pi^T)_ik; building it that way
        # avoids cancellation.  Near-disconnected blocks give eigenvalues far
        # below round-off; those are floored so noise in grad is not amplified
        W = (pi / b[None, :]) @ pi.T
        np.fill_diagonal(W, 0.0)
        lev, vec = np.linalg.eigh(np.diag(W.sum(axis=1)) - W + np.full((n, n), 1.0 / n))
        lev = np.maximum(lev, EIG_FLOOR * lev.max())
        step = eps * (vec @ ((vec.T @ grad) / lev))
        slope = float(grad @ step)
        if not slope > 0:
            step, slope = eps * grad, eps * float(grad @ grad)
        t = 1.0
        while t > 1e-12:
            f_new = f + t * step
            g_new, pi_new, val_new = state(f_new)
            err_new = float(np.sum(np.abs(pi_new.sum(axis=1) - a)))
            # near the optimum the dual increase drops below round-off, so a
            # smaller marginal error also counts as progress
            if val_new >= val + 1e-4 * t * slope or err_new < (1.0 - 1e-4 * t) * err:
                break
            t *= 0.5
        else:
            break
        f, g, pi, val = f_new, g_new, pi_new, val_new
        r = pi.sum(axis=1)
        err = float(np.sum(np.abs(r - a)))
        if steps % NEWTON_PATIENCE == 0:
            # no halving of the error over a window: leave it to continuation
            if err > 0.5 * best:
                break
            best = err
    return f, g, err, it


def _solve(lk, log_a, log_b, eps, tol, max_iter, f, g, newton_after):
    """Scaling sweeps, then semi-dual Newton if they have not converged."""
    # f_i = -eps log sum_j b_j exp((g_j - d_ij)/eps), and symmetrically for g
    f = -eps * _lse(lk + (g / eps + log_b)[None, :], axis=1)
    err = np.inf
    it = 0
    while it < min(max_iter, newton_after):
        it += 1
        g = -eps * _lse(lk + (f / eps + log_a)[:, None], axis=0)
        f_next = -eps * _lse(lk + (g / eps + log_b)[None, :], axis=1)
        # row sums of the current plan are a_i exp((f_i - f_next_i)/eps)
        prev, err = err, float(np.sum(np.exp(log_a) * np.abs(np.expm1((f - f_next) / eps))))
        if err <= tol:
            return f, g, err, it
        f = f_next
        # slow linear contraction: hand over to Newton early
        if it >= SLOW_CHECK and err > SLOW_RATIO * prev:
            break
    if it < max_iter:
        f, g, err, it = _semidual_newton(f, lk, log_a, log_b, eps, tol, max_iter, it)
    return f, g, err, it


def sinkhorn(
    mu,
    nu,
    d,
    eps: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    f_init: Optional[np.ndarray] = None,
    g_init: Optional[np.ndarray] = None,
    newton_after: int = 500,
) -> SinkhornResult:
    """Solve min_pi <pi, d> + eps * KL(pi || mu x nu) over couplings of mu, nu.

    Each sweep updates ``f`` (rows exact) then ``g`` (columns exact) and stops
    once the L1 violation of the row marginal is at most ``tol``; the returned
    plan therefore satisfies the columns to round-off and the rows to ``tol``.
    Hitting ``max_iter`` returns the partial result with ``converged=False``.

    ``f_init``/``g_init`` warm-start the potentials (full-length arrays).

    Scaling sweeps contract at a rate 1 - O(exp(-spread(d)/eps)), which
    stalls for small ``eps``.  After ``newton_after`` sweeps the solver
    switches to damped Newton on the semi-dual in ``f``; it converges to the
    same fixed point.  If that fails too, the problem is re-solved by
    eps-continuation from the cost spread down to ``eps``.  Every sweep or
    Newton step counts as one iteration.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    a_full = _weights(mu).astype(float)
    b_full = _weights(nu).astype(float)
    c_full = as_matrix(d).astype(float)
    if c_full.shape != (a_full.size, b_full.size):
        raise ValueError(f"cost shape {c_full.shape} does not match marginals")

    rows = a_full > ZERO_WEIGHT
    cols = b_full > ZERO_WEIGHT
    a, b = a_full[rows], b_full[cols]
    a, b = a / a.sum(), b / b.sum()
    c = c_full[np.ix_(rows, cols)]
    if np.any(np.all(np.isinf(c), axis=1)) or np.any(np.all(np.isinf(c), axis=0)):
        raise ValueError("a retained atom has infinite cost to every partner")
    log_a, log_b = np.log(a), np.log(b)

    f = np.zeros(a.size) if f_init is None else np.asarray(f_init, float)[rows].copy()
    g = np.zeros(b.size) if g_init is None else np.asarray(g_init, float)[cols].copy()
    f = np.where(np.isfinite(f), f, 0.0)
    g = np.where(np.isfinite(g), g, 0.0)

    lk = _log_kernel(c, eps)
    if g_init is None and f_init is not None:
        g = -eps * _lse(lk + (f / eps + log_a)[:, None], axis=0)
    f, g, err, it = _solve(lk, log_a, log_b, eps, tol, max_iter, f, g, newton_after)

    finite = c[np.isfinite(c)]
    spread = float(finite.max() - finite.min()) if finite.size else 0.0
    if err > tol and it < max_iter and spread > eps:
        log.debug("sinkhorn: eps=%g falling back to eps-continuation", eps)
        fc = np.zeros(a.size)
        gc = np.zeros(b.size)
        stage = spread
        while True:
            stage = max(stage * 0.5, eps)
            last = stage == eps
            fc, gc, err, used = _solve(
                _log_kernel(c, stage), log_a, log_b, stage,
                tol if last else max(tol, 1e-6), max_iter - it, fc, gc, 200,
            )
            it += used
            if last or it >= max_iter:
                break
        f, g = fc, gc

    converged = err <= tol
    if not converged:
        log.warning("sinkhorn: eps=%g not converged after %d iterations (err %.3g)", eps, it, err)

    logp = lk + (f / eps + log_a)[:, None] + (g / eps + log_b)[None, :]
    p = np.exp(logp)
    err = max(err, float(np.sum(np.abs(p.sum(axis=0) - b))))
    dual = float(a @ f + b @ g - eps * (p.sum() - 1.0))

    plan = np.zeros(c_full.shape)
    plan[np.ix_(rows, cols)] = p
    plan /= plan.sum()

    pos = p > 0
    transport = float(np.sum(p[pos] * c[pos]))
    # log(pi / (a x b)) = (f + g - d) / eps on the support
    kl = float(np.sum(p[pos] * (logp[pos] - (log_a[:, None] + log_b[None, :])[pos])))
    kl = max(kl, 0.0)

    f_full = np.full(a_full.size, np.nan)
    g_full = np.full(b_full.size, np.nan)
    f_full[rows] = f
    g_full[cols] = g
    return SinkhornResult(
        coupling=Coupling(plan),
        f=f_full,
        g=g_full,
        transport_cost=transport,
        kl_term=kl,
        objective=transport + eps * kl,
        eps=float(eps),
        iterations=it,
        marginal_error=err,
        converged=converged,
        dual_value=dual,
    )


def sinkhorn_eps_sweep(
    mu, nu, d, eps_list: Sequence[float], tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> list:
    """Solve for each eps in descending order, warm-starting the potentials."""
    eps_list = list(eps_list)
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("eps_list must be non-empty and positive")
    if any(e2 > e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be descending")
    out = []
    f = g = None
    for eps in eps_list:
        res = sinkhorn(mu, nu, d, eps, tol, max_iter, f_init=f, g_init=g)
        f, g = res.f, res.g
        out.append(res)
    return out
