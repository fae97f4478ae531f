"""Smoothness summaries, smoothness-proportional weights and client cloning.

Heterogeneous smoothness constants L_1..L_n enter the convergence theory
through their quadratic mean (classic analysis) or their arithmetic mean
(weighted analysis).  Cloning client i into N_i rescaled copies reshapes
the quadratic mean; the ceil(L_i / L_AM) rule below is within sqrt(2) of
the best integer choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .objectives import SparsityPattern


def _positive_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} must be a nonempty vector")
    if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} entries must be positive and finite")
    return arr


@dataclass(frozen=True)
class SmoothnessSummary:
    """Arithmetic mean, quadratic mean and their variance gap."""

    L_list: np.ndarray
    L_AM: float
    L_QM: float
    L_var: float


def summarize(l_list) -> SmoothnessSummary:
    """Summary statistics of per-client smoothness constants."""
    arr = _positive_array(l_list, "L_list")
    am = float(np.mean(arr))
    qm = float(np.sqrt(np.mean(arr**2)))
    return SmoothnessSummary(L_list=arr, L_AM=am, L_QM=qm, L_var=qm * qm - am * am)


@dataclass(frozen=True)
class WeightVector:
    """Positive weights summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if np.any(w <= 0.0):
            raise DomainError("weights must be positive")
        if abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1, got {float(np.sum(w))!r}")
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.size


def uniform_weights(n: int) -> WeightVector:
    return WeightVector(np.full(n, 1.0 / n))


def smoothness_weights(l_list) -> WeightVector:
    """w_i = L_i / sum_j L_j."""
    arr = _positive_array(l_list, "L_list")
    return WeightVector(arr / arr.sum())


@dataclass(frozen=True)
class CloneCounts:
    """How many copies of each client to run; total is their sum."""

    counts: np.ndarray
    total: int


def clone_objective(l_list, n_list) -> float:
    """Quadratic mean of the rescaled constants after cloning.

    Equals (1/n) * sqrt(sum_i L_i^2 * N / N_i) with N = sum N_i; reduces
    to the plain quadratic mean when every N_i is 1.
    """
    arr = _positive_array(l_list, "L_list")
    counts = np.asarray(n_list)
    if counts.shape != arr.shape:
        raise DomainError("L_list and N_list must have the same length")
    if np.any(counts < 1) or not np.issubdtype(counts.dtype, np.integer):
        raise DomainError("clone counts must be positive integers")
    total = int(counts.sum())
    return float(np.sqrt(np.sum(arr**2 * (total / counts)))) / arr.size


def clone_counts(l_list) -> CloneCounts:
    """The ceil(L_i / L_AM) cloning rule.

    The resulting total N satisfies n <= N <= 2n and the cloned quadratic
    mean lands within [L_AM, sqrt(2) * L_AM].
    """
    arr = _positive_array(l_list, "L_list")
    am = float(np.mean(arr))
    counts = np.ceil(arr / am).astype(int)
    total = int(counts.sum())
    n = arr.size
    if not n <= total <= 2 * n:
        raise DomainError(f"clone total {total} escaped [{n}, {2 * n}]")
    return CloneCounts(counts=counts, total=total)


def optimal_weights(a_list) -> tuple[WeightVector, float]:
    """Minimizer and minimum of sum_i a_i^2 / w_i over the simplex.

    The optimum is w*_i = a_i / sum a_j with value (sum a_i)^2.
    """
    arr = _positive_array(a_list, "a_list")
    total = float(arr.sum())
    return WeightVector(arr / total), total * total


def rare_feature_c(pattern: SparsityPattern, weights: WeightVector) -> float:
    """Weighted sparsity parameter c = n * max_j sum_{i active on j} w_i.

    Lies in (0, n]; with uniform weights it reduces to the maximum number
    of clients sharing a coordinate.
    """
    if pattern.n != weights.n:
        raise DomainError(f"pattern covers {pattern.n} clients, weights {weights.n}")
    active = pattern.mask.any(axis=0)
    if not active.any():
        raise DomainError("no active coordinate in the sparsity pattern")
    col_sums = pattern.mask[:, active].T @ weights.w
    return pattern.n * float(col_sums.max())


def exact_min_clone_objective(l_list, max_count: int | None = None) -> float:
    """Exact minimum of :func:`clone_objective` over counts in {1..max_count}^n.

    Marginal allocation: for each fixed total N the allocation minimizing
    sum L_i^2 / N_i is built by repeatedly granting one unit to the client
    with the largest marginal decrease, which is exact for separable
    convex objectives; the outer minimum scans every reachable total.
    Intended as a test oracle at small n.
    """
    arr = _positive_array(l_list, "L_list")
    n = arr.size
    cap = 2 * n if max_count is None else int(max_count)
    if cap < 1:
        raise DomainError("max_count must be >= 1")
    counts = np.ones(n, dtype=int)
    best = clone_objective(arr, counts)
    sq = arr**2
    for _ in range(n, n * cap):
        marginal = np.where(counts < cap, sq * (1.0 / counts - 1.0 / (counts + 1)), -np.inf)
        i = int(np.argmax(marginal))
        if not np.isfinite(marginal[i]):
            break
        counts[i] += 1
        best = min(best, clone_objective(arr, counts))
    return best
