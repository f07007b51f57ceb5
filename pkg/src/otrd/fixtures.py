"""Built-in problem instances, so the reference experiments need no input files.

The 5-atom and 10-atom sources are fixed choices made for this package;
they are literal constants rather than RNG draws so they never drift.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .measures import DiscreteDistribution, DistortionMatrix, hamming_matrix, squared_error_matrix

BSC_CROSSOVER = 0.11


@dataclass(frozen=True)
class SourceProblem:
    source: DiscreteDistribution
    distortion: DistortionMatrix
    reproduction_atoms: Optional[np.ndarray] = None
    distortion_name: str = "squared"


def _squared(atoms, weights):
    src = DiscreteDistribution(np.array(weights), np.array(atoms))
    return SourceProblem(src, squared_error_matrix(src.atoms, src.atoms), src.atoms)


def five_atom_source() -> SourceProblem:
    """Skewed 5-atom source on an uneven grid, squared error."""
    return _squared([0.0, 0.7, 1.5, 2.6, 4.0], [0.1, 0.2, 0.35, 0.25, 0.1])


def ten_atom_source() -> SourceProblem:
    """Standard normal discretized onto 10 equispaced atoms in [-3, 3], squared error."""
    x = np.linspace(-3.0, 3.0, 10)
    w = np.exp(-0.5 * x * x)
    return _squared(x, w / w.sum())


def binary_hamming() -> SourceProblem:
    src = DiscreteDistribution(np.array([0.5, 0.5]), np.array([0.0, 1.0]))
    return SourceProblem(src, hamming_matrix(2, 2), src.atoms, "hamming")


def bsc(crossover: float = BSC_CROSSOVER) -> np.ndarray:
    e = float(crossover)
    return np.array([[1.0 - e, e], [e, 1.0 - e]])


def binary_entropy(p) -> np.ndarray:
    """H_b(p) in nats, with H_b(0) = H_b(1) = 0."""
    p = np.asarray(p, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log(p) - (1 - p) * np.log1p(-p)
    return np.where((p <= 0) | (p >= 1), 0.0, h)


def binary_hamming_rd(D) -> np.ndarray:
    """R(D) = ln 2 - H_b(D) for 0 <= D <= 1/2, zero beyond."""
    D = np.asarray(D, float)
    return np.where(D >= 0.5, 0.0, np.log(2) - binary_entropy(np.minimum(D, 0.5)))


def bsc_capacity(crossover: float = BSC_CROSSOVER) -> float:
    return float(np.log(2) - binary_entropy(crossover))


SOURCES = {
    "fig-sd-rd-5atom": five_atom_source,
    "fig-sq-emd-10atom": ten_atom_source,
    "binary-hamming": binary_hamming,
}
CHANNELS = {
    "bsc-0.11": bsc,
}
