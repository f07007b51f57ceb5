"""Discrete distributions, distortion matrices, couplings and the
information-theoretic primitives shared by every solver.

All rates and divergences are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

# weights below this are exact zeros for KL / support purposes
ZERO_WEIGHT = 1e-15


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability weights over finitely many atoms.

    ``atoms`` may be ``None`` for purely categorical use.
    """

    weights: np.ndarray
    atoms: Optional[np.ndarray] = None

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)
        if self.atoms is not None:
            a = _frozen(self.atoms)
            if a.shape != w.shape:
                raise ValueError("atoms and weights must have the same length")
            object.__setattr__(self, "atoms", a)

    @classmethod
    def from_weights(cls, weights, atoms=None) -> "DiscreteDistribution":
        """Build after renormalizing ``weights`` to sum to one."""
        w = np.asarray(weights, dtype=float)
        w = np.where(w < ZERO_WEIGHT, 0.0, w)
        return cls(w / w.sum(), atoms)

    @classmethod
    def uniform(cls, n: int, atoms=None) -> "DiscreteDistribution":
        return cls(np.full(n, 1.0 / n), atoms)

    def __len__(self):
        return self.weights.size

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of atoms carrying positive mass."""
        return self.weights > ZERO_WEIGHT

    def mean(self) -> float:
        return float(self.weights @ self.atoms)

    def variance(self) -> float:
        mu = self.mean()
        return float(self.weights @ (self.atoms - mu) ** 2)

    def entropy(self) -> float:
        return entropy(self.weights)


@dataclass(frozen=True)
class DistortionMatrix:
    """Dense n x m distortion d(x_i, y_j).

    Entries must be nonnegative unless ``allow_negative`` is set, which only
    the channel-capacity cost construction uses (it also carries +inf).
    """

    entries: np.ndarray
    allow_negative: bool = field(default=False, compare=False)

    def __post_init__(self):
        d = _frozen(self.entries)
        if d.ndim != 2 or d.size == 0:
            raise ValueError("distortion matrix must be a non-empty 2-D array")
        if np.any(np.isnan(d)):
            raise ValueError("distortion matrix contains NaN")
        if not self.allow_negative:
            if np.any(d < 0):
                raise ValueError("distortion entries must be nonnegative")
            if np.any(np.isinf(d)):
                raise ValueError("infinite distortion entries are not allowed here")
        object.__setattr__(self, "entries", d)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def T(self) -> "DistortionMatrix":
        return DistortionMatrix(self.entries.T, self.allow_negative)


@dataclass(frozen=True)
class Coupling:
    """Joint probability matrix, optionally checked against its marginals."""

    entries: np.ndarray

    def __post_init__(self):
        p = _frozen(self.entries)
        if p.ndim != 2:
            raise ValueError("coupling must be 2-D")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("coupling entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"coupling mass is {p.sum()!r}, expected 1")
        object.__setattr__(self, "entries", p)

    @classmethod
    def with_marginals(cls, entries, mu=None, nu=None, atol=1e-8) -> "Coupling":
        pi = cls(entries)
        if mu is not None:
            err = np.max(np.abs(pi.row_marginal - _weights(mu)))
            if err > atol:
                raise ValueError(f"row marginal off by {err:.3g}")
        if nu is not None:
            err = np.max(np.abs(pi.col_marginal - _weights(nu)))
            if err > atol:
                raise ValueError(f"column marginal off by {err:.3g}")
        return pi

    @property
    def shape(self):
        return self.entries.shape

    @property
    def row_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=0)


@dataclass(frozen=True)
class RDPoint:
    lam: float
    rate_nats: float
    distortion: float
    converged: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        # clip round-off below zero
        object.__setattr__(self, "rate_nats", max(float(self.rate_nats), 0.0))
        object.__setattr__(self, "distortion", max(float(self.distortion), 0.0))

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / np.log(2)


@dataclass(frozen=True)
class RDCurve:
    """Rate-distortion points sorted by ascending distortion."""

    points: tuple

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: (p.distortion, -p.rate_nats)))
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate_nats for p in self.points])

    @property
    def distortions(self) -> np.ndarray:
        return np.array([p.distortion for p in self.points])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.points)

    def is_monotone(self, slack: float = 1e-6) -> bool:
        """Rate non-increasing in distortion, up to ``slack``."""
        return bool(np.all(np.diff(self.rates) <= slack))


DistLike = Union[DiscreteDistribution, Sequence[float], np.ndarray]
MatrixLike = Union[DistortionMatrix, Sequence[Sequence[float]], np.ndarray]


def _weights(p: DistLike) -> np.ndarray:
    if isinstance(p, DiscreteDistribution):
        return p.weights
    return np.asarray(p, dtype=float)


def as_distribution(p: DistLike) -> DiscreteDistribution:
    if isinstance(p, DiscreteDistribution):
        return p
    return DiscreteDistribution(np.asarray(p, dtype=float))


def as_matrix(d: MatrixLike) -> np.ndarray:
    if isinstance(d, DistortionMatrix):
        return d.entries
    if isinstance(d, Coupling):
        return d.entries
    return np.asarray(d, dtype=float)


def squared_error_matrix(x_atoms, y_atoms) -> DistortionMatrix:
    x = np.asarray(x_atoms, dtype=float).ravel()
    y = np.asarray(y_atoms, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("atom lists must be non-empty")
    return DistortionMatrix((x[:, None] - y[None, :]) ** 2)


def hamming_matrix(n: int, m: int) -> DistortionMatrix:
    if n < 1 or m < 1:
        raise ValueError("alphabet sizes must be positive")
    return DistortionMatrix(1.0 - np.eye(n, m))


def entropy(p) -> float:
    w = _weights(p)
    w = w[w > ZERO_WEIGHT]
    return float(-np.sum(w * np.log(w)))


def kl_divergence(p: DistLike, q: DistLike) -> float:
    """KL(p || q) in nats; +inf when p is not absolutely continuous w.r.t. q."""
    pw, qw = _weights(p), _weights(q)
    if pw.shape != qw.shape:
        raise ValueError(f"length mismatch: {pw.shape} vs {qw.shape}")
    mask = pw > ZERO_WEIGHT
    if np.any(qw[mask] <= ZERO_WEIGHT):
        return float("inf")
    return max(float(np.sum(pw[mask] * np.log(pw[mask] / qw[mask]))), 0.0)


def mutual_information(pi: Union[Coupling, np.ndarray]) -> float:
    """KL of a joint against the product of its own marginals."""
    p = as_matrix(pi)
    prod = np.outer(p.sum(axis=1), p.sum(axis=0))
    return kl_divergence(p.ravel(), prod.ravel())


def expected_distortion(pi: Union[Coupling, np.ndarray], d: MatrixLike) -> float:
    p, c = as_matrix(pi), as_matrix(d)
    if p.shape != c.shape:
        raise ValueError(f"shape mismatch: coupling {p.shape} vs distortion {c.shape}")
    mask = p > 0
    return float(np.sum(p[mask] * c[mask]))
