"""Earth Mover's Distance between discrete measures.

The transportation problem is solved as a min-cost flow on the bipartite
graph rows -> columns by successive shortest paths.  Dijkstra runs on reduced
costs, so the node potentials it maintains are an optimal dual solution at
termination and double as an optimality certificate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import Coupling, as_matrix, _weights

PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class EmdResult:
    coupling: Coupling
    cost: float
    dual_row: np.ndarray
    dual_col: np.ndarray

    def dual_feasibility_violation(self, d) -> float:
        """max(dual_row[i] + dual_col[j] - d[i, j], 0) over all cells."""
        c = as_matrix(d)
        slack = self.dual_row[:, None] + self.dual_col[None, :] - c
        return float(max(np.max(slack), 0.0))

    def complementary_slackness_violation(self, d, threshold=1e-12) -> float:
        c = as_matrix(d)
        active = self.coupling.entries > threshold
        if not np.any(active):
            return 0.0
        gap = self.dual_row[:, None] + self.dual_col[None, :] - c
        return float(np.max(np.abs(gap[active])))

    @property
    def dual_objective(self) -> float:
        mu = self.coupling.row_marginal
        nu = self.coupling.col_marginal
        return float(self.dual_row @ mu + self.dual_col @ nu)


def _shortest_paths(cost, flow, pot_r, pot_c, active_src):
    """Dijkstra from a virtual source attached to ``active_src`` rows.

    Nodes 0..n-1 are rows, n..n+m-1 are columns.  Forward arcs i->j always
    exist; backward arcs j->i exist where flow[i, j] > PIVOT_TOL.  Ties are
    broken by lowest node index.
    """
    n, m = cost.shape
    dist = np.full(n + m, np.inf)
    prev = np.full(n + m, -1, dtype=int)
    done = np.zeros(n + m, dtype=bool)
    dist[:n][active_src] = 0.0
    # reduced costs: forward d_ij + pot_r[i] - pot_c[j], backward the negation
    red = cost + pot_r[:, None] - pot_c[None, :]
    for _ in range(n + m):
        cand = np.where(done, np.inf, dist)
        u = int(np.argmin(cand))
        if not np.isfinite(cand[u]):
            break
        done[u] = True
        if u < n:
            nd = dist[u] + np.maximum(red[u], 0.0)
            better = (~done[n:]) & (nd < dist[n:])
            dist[n:][better] = nd[better]
            prev[n:][better] = u
        else:
            j = u - n
            back = flow[:, j] > PIVOT_TOL
            nd = dist[u] + np.maximum(-red[:, j], 0.0)
            better = back & (~done[:n]) & (nd < dist[:n])
            dist[:n][better] = nd[better]
            prev[:n][better] = u
    return dist, prev


def emd(mu, nu, d) -> EmdResult:
    """Exact optimal transport plan between ``mu`` and ``nu`` under cost ``d``.

    Zero-weight atoms are removed before solving and come back as zero rows
    or columns of the coupling (their duals are set to the tightest feasible
    value).
    """
    a = _weights(mu).astype(float)
    b = _weights(nu).astype(float)
    c_full = as_matrix(d).astype(float)
    if c_full.shape != (a.size, b.size):
        raise ValueError(f"cost shape {c_full.shape} does not match marginals ({a.size}, {b.size})")
    if not np.all(np.isfinite(c_full)):
        raise ValueError("emd requires finite cost entries")
    if abs(a.sum() - b.sum()) > 1e-10:
        raise ValueError(f"marginal masses differ: {a.sum()!r} vs {b.sum()!r}")

    rows = np.flatnonzero(a > PIVOT_TOL)
    cols = np.flatnonzero(b > PIVOT_TOL)
    c = c_full[np.ix_(rows, cols)]
    supply = a[rows].copy()
    demand = b[cols].copy()
    n, m = c.shape

    flow = np.zeros((n, m))
    pot_r = np.zeros(n)
    # column potentials start at the cheapest incoming arc so reduced costs are >= 0
    pot_c = c.min(axis=0)

    while supply.sum() > PIVOT_TOL and demand.sum() > PIVOT_TOL:
        active = supply > PIVOT_TOL
        dist, prev = _shortest_paths(c, flow, pot_r, pot_c, active)
        sinks = np.flatnonzero(demand > PIVOT_TOL)
        reach = dist[n + sinks]
        if not np.any(np.isfinite(reach)):
            break
        t = int(sinks[np.argmin(reach)])
        dt = dist[n + t]
        # truncated potential update keeps every residual reduced cost >= 0
        upd = np.minimum(dist, dt)
        pot_r += upd[:n]
        pot_c += upd[n:]

        # walk the path back, find the bottleneck
        path = []
        v = n + t
        while prev[v] != -1:
            path.append((prev[v], v))
            v = prev[v]
        src = v
        delta = min(supply[src], demand[t])
        for u, w in path:
            if u >= n:  # backward arc column u -> row w
                delta = min(delta, flow[w, u - n])
        for u, w in path:
            if u < n:
                flow[u, w - n] += delta
            else:
                flow[w, u - n] -= delta
        supply[src] -= delta
        demand[t] -= delta
        flow[np.abs(flow) <= PIVOT_TOL * 1e-3] = 0.0

    # dual: row potential -pot_r, column potential pot_c (see reduced costs)
    u_dual = np.full(a.size, np.nan)
    v_dual = np.full(b.size, np.nan)
    u_dual[rows] = -pot_r
    v_dual[cols] = pot_c
    # dropped atoms: any value keeping dual feasibility is fine
    for i in np.setdiff1d(np.arange(a.size), rows):
        u_dual[i] = np.min(c_full[i, cols] - v_dual[cols])
    for j in np.setdiff1d(np.arange(b.size), cols):
        v_dual[j] = np.min(c_full[:, j] - u_dual)

    plan = np.zeros_like(c_full)
    plan[np.ix_(rows, cols)] = np.maximum(flow, 0.0)
    total = plan.sum()
    if total > 0:
        plan /= total
    cost = float(np.sum(plan * c_full))
    return EmdResult(Coupling(plan), cost, u_dual, v_dual)


def monotone_coupling(mu, nu) -> np.ndarray:
    """North-west-corner plan between two 1-D measures given in sorted order.

    For convex costs of x - y this is the optimal (quantile-matching) plan.
    """
    a = _weights(mu).astype(float).copy()
    b = _weights(nu).astype(float).copy()
    plan = np.zeros((a.size, b.size))
    i = j = 0
    while i < a.size and j < b.size:
        t = min(a[i], b[j])
        plan[i, j] += t
        a[i] -= t
        b[j] -= t
        if a[i] <= PIVOT_TOL:
            i += 1
        else:
            j += 1
    return plan
