"""The error-feedback run loops as pure state transitions.

All variants share one skeleton per round: the server moves the model
along the aggregated estimator, every (participating) client compresses
the gap between its local target and its estimator, and the server
re-aggregates.  The variants differ only in the target each client
chases and in how the server averages:

    ef21      target grad f_i,             aggregate (1/n) sum g_i
    ef21-w    target grad f_i / (n w_i),    aggregate sum w_i g_i
    ...-sgd   stochastic target
    ...-pp    only a sampled subset updates; the server keeps stale g_i

Vanilla ef21 is ef21-w with uniform weights, so a single weighted core
implements every variant; the distinct entry points keep the calling
conventions explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import compressors, objectives
from .compressors import CompressorSpec
from .errors import ConfigError, DomainError
from .objectives import ClientProblem, GlobalProblem, StochasticEstimatorSpec, make_global_problem
from .weighting import CloneCounts, WeightVector, uniform_weights


@dataclass(frozen=True)
class RunState:
    """Iterate, per-client estimators and their aggregate after ``round`` steps.

    ``grads`` caches the exact client gradients at ``x`` when the step
    that produced the state computed them (stochastic steps leave it
    None); metric helpers use the cache to avoid re-evaluation.
    """

    x: np.ndarray  # (d,)
    g: np.ndarray  # (n, d) client estimators
    g_agg: np.ndarray  # (d,) server aggregate
    round: int
    grads: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def d(self) -> int:
        return self.x.size


def _check_shapes(state: RunState, problem: GlobalProblem) -> None:
    if state.x.shape != (problem.d,) or state.g.shape != (problem.n, problem.d):
        raise DomainError(
            f"state shapes {state.x.shape}/{state.g.shape} do not match "
            f"problem (n={problem.n}, d={problem.d})"
        )


def init_state(problem: GlobalProblem, x0: np.ndarray, weights: WeightVector | None = None) -> RunState:
    """Start from g_i = grad f_i(x0), scaled so the distortion starts at zero.

    With ``weights`` given (the weighted variants) the estimators start at
    grad f_i(x0) / (n w_i); without, at grad f_i(x0).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.d,):
        raise DomainError(f"x0 must have shape ({problem.d},), got {x0.shape}")
    grads = problem.batch_gradients(x0)
    if weights is None:
        g = grads.copy()
        g_agg = g.mean(axis=0)
    else:
        g = grads / (problem.n * weights.w)[:, None]
        g_agg = (weights.w[:, None] * g).sum(axis=0)
    return RunState(x=x0, g=g, g_agg=g_agg, round=0, grads=grads)


def _per_client_rngs(rng, n: int):
    """Normalize the rng argument: None, shared Generator, or index -> Generator."""
    if rng is None or isinstance(rng, np.random.Generator):
        return rng
    if callable(rng):
        return rng
    raise DomainError(f"rng must be None, a Generator, or a callable, got {type(rng)!r}")


def _weighted_core(
    state: RunState,
    x_new: np.ndarray,
    weights: WeightVector,
    targets: np.ndarray,
    compressor: CompressorSpec,
    rng,
    grads: np.ndarray | None,
    mask: np.ndarray | None = None,
) -> RunState:
    """Shared transition: compress target gaps, update estimators, aggregate."""
    updates = compressors.apply_rows(compressor, targets - state.g, rng)
    if mask is None:
        g_new = state.g + updates
    else:
        g_new = np.where(mask[:, None], state.g + updates, state.g)
    g_agg = (weights.w[:, None] * g_new).sum(axis=0)
    return RunState(x=x_new, g=g_new, g_agg=g_agg, round=state.round + 1, grads=grads)


def step_ef21(
    state: RunState,
    problem: GlobalProblem,
    compressor: CompressorSpec,
    gamma: float,
    rng=None,
) -> RunState:
    """One round of plain error feedback with uniform averaging."""
    _check_shapes(state, problem)
    x_new = state.x - gamma * state.g_agg
    grads = problem.batch_gradients(x_new)
    updates = compressors.apply_rows(compressor, grads - state.g, _per_client_rngs(rng, state.n))
    g_new = state.g + updates
    return RunState(x=x_new, g=g_new, g_agg=g_new.mean(axis=0), round=state.round + 1, grads=grads)


def step_ef21_w(
    state: RunState,
    problem: GlobalProblem,
    weights: WeightVector,
    compressor: CompressorSpec,
    gamma: float,
    rng=None,
) -> RunState:
    """One round of smoothness-weighted error feedback."""
    _check_shapes(state, problem)
    x_new = state.x - gamma * state.g_agg
    grads = problem.batch_gradients(x_new)
    targets = grads / (problem.n * weights.w)[:, None]
    return _weighted_core(
        state, x_new, weights, targets, compressor, _per_client_rngs(rng, state.n), grads
    )


def step_ef21_w_sgd(
    state: RunState,
    problem: GlobalProblem,
    weights: WeightVector,
    compressor: CompressorSpec,
    estimator: StochasticEstimatorSpec,
    gamma: float,
    rng=None,
) -> RunState:
    """Weighted error feedback driven by minibatch gradient estimates.

    In ``estimator.full_pass`` mode this reproduces :func:`step_ef21_w`
    exactly, byte for byte.
    """
    _check_shapes(state, problem)
    x_new = state.x - gamma * state.g_agg
    if estimator.full_pass:
        ghat = problem.batch_gradients(x_new)
        grads = ghat
        rngs = _per_client_rngs(rng, state.n)
    else:
        rngs = _per_client_rngs(rng, state.n)
        if rngs is None:
            raise DomainError("stochastic gradients need a random stream")
        # Materialize one generator per client so that drawing the minibatch
        # and (for randomized compressors) compressing share a single stream.
        gens = [rngs(i) if callable(rngs) else rngs for i in range(problem.n)]
        ghat = np.empty((problem.n, problem.d))
        for i, client in enumerate(problem.clients):
            ghat[i] = objectives.stochastic_gradient(client, x_new, estimator, gens[i])
        grads = None
        rngs = lambda i: gens[i]  # noqa: E731
    targets = ghat / (problem.n * weights.w)[:, None]
    return _weighted_core(state, x_new, weights, targets, compressor, rngs, grads)


def step_ef21_pp(
    state: RunState,
    problem: GlobalProblem,
    weights: WeightVector | None,
    compressor: CompressorSpec,
    gamma: float,
    p_list,
    rng: np.random.Generator,
    client_rng=None,
) -> tuple[RunState, np.ndarray]:
    """One partial-participation round; returns (state, participant indices).

    The participating set is drawn by independent Bernoulli trials with
    per-client probabilities ``p_list`` using ``rng`` (the server's
    stream).  Absent clients keep their estimators, and the server still
    aggregates over all clients, stale values included.
    """
    _check_shapes(state, problem)
    if weights is None:
        weights = uniform_weights(problem.n)
    p = np.broadcast_to(np.asarray(p_list, dtype=float), (problem.n,))
    if np.any(p <= 0.0) or np.any(p > 1.0):
        raise DomainError("participation probabilities must lie in (0, 1]")
    mask = rng.random(problem.n) < p
    x_new = state.x - gamma * state.g_agg
    grads = problem.batch_gradients(x_new)
    targets = grads / (problem.n * weights.w)[:, None]
    new_state = _weighted_core(
        state, x_new, weights, targets, compressor, _per_client_rngs(client_rng, state.n),
        grads, mask=mask,
    )
    return new_state, np.flatnonzero(mask)


def build_cloned_problem(problem: GlobalProblem, counts: CloneCounts) -> GlobalProblem:
    """Replace client i by counts[i] copies rescaled by N / (n N_i).

    The average loss is unchanged; the copies share the original data
    arrays.  Clone (i, j) has smoothness (N / (n N_i)) L_i.
    """
    if counts.counts.shape != (problem.n,):
        raise DomainError(f"counts must have length {problem.n}, got {counts.counts.shape}")
    if np.any(counts.counts < 1):
        raise DomainError("clone counts must be positive")
    n, total = problem.n, counts.total
    clones: list[ClientProblem] = []
    for client, n_i in zip(problem.clients, counts.counts):
        factor = total / (n * int(n_i))
        clones.extend(
            replace(client, scale=client.scale * factor) for _ in range(int(n_i))
        )
    return make_global_problem(clones)


@dataclass(frozen=True)
class DistortionReport:
    """Both gradient-distortion functionals at the current state.

    ``unweighted`` tracks (1/n) sum (1/(n w_i)) ||g_i - grad f_i||^2 (the
    functional of the improved plain-EF21 analysis); ``weighted`` tracks
    sum w_i ||g_i - grad f_i/(n w_i)||^2 (the weighted algorithm's own).
    """

    unweighted: float
    weighted: float


def distortion(state: RunState, problem: GlobalProblem, weights: WeightVector) -> DistortionReport:
    """Evaluate both distortions at (state.x, state.g)."""
    _check_shapes(state, problem)
    grads = state.grads if state.grads is not None else problem.batch_gradients(state.x)
    n = problem.n
    w = weights.w
    diff_plain = state.g - grads
    unweighted = float(np.sum(diff_plain**2, axis=1) @ (1.0 / w)) / n**2
    diff_scaled = state.g - grads / (n * w)[:, None]
    weighted = float(np.sum(diff_scaled**2, axis=1) @ w)
    return DistortionReport(unweighted=unweighted, weighted=weighted)


@dataclass(frozen=True)
class OutputLaw:
    """How to pick the reported iterate from a trajectory."""

    kind: str  # "uniform" | "geometric"
    ratio: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric"):
            raise DomainError(f"unknown output law {self.kind!r}")
        if self.kind == "geometric" and not 0.0 < self.ratio <= 1.0:
            raise DomainError(f"geometric ratio must lie in (0, 1], got {self.ratio}")


def geometric_output_law(gamma: float, a_tilde: float, theta_hat: float, beta2_hat: float) -> OutputLaw:
    """Law with weights (1 - gamma A_tilde beta2_hat / (2 theta_hat))^t.

    With zero noise aggregate the ratio is 1 and the law degenerates to
    uniform sampling.  A nonpositive ratio means the step size is too
    large for the stochastic guarantee.
    """
    ratio = 1.0 - gamma * a_tilde * beta2_hat / (2.0 * theta_hat)
    if ratio <= 0.0:
        raise ConfigError(
            f"geometric output law undefined: ratio {ratio:g} <= 0 "
            "(step size too large for the stochastic guarantee)"
        )
    return OutputLaw(kind="geometric", ratio=ratio)


def select_output(trajectory, law: OutputLaw, rng: np.random.Generator) -> np.ndarray:
    """Sample the reported iterate from ``trajectory`` according to ``law``."""
    xs = np.asarray(trajectory, dtype=float)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise DomainError(f"trajectory must be a nonempty (T, d) array, got shape {xs.shape}")
    t_total = xs.shape[0]
    if law.kind == "uniform" or law.ratio == 1.0:
        idx = int(rng.integers(t_total))
    else:
        v = law.ratio ** np.arange(t_total)
        idx = int(rng.choice(t_total, p=v / v.sum()))
    return xs[idx]
