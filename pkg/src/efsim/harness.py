"""Experiment orchestration: seeding, the round loop, metrics and outputs.

A run is fully described by a :class:`RunConfig` (JSON-serializable,
lower_snake_case keys).  ``execute`` builds the problem, derives every
constant, resolves the step-size rule, runs T rounds, and logs one
:class:`MetricsRow` per round.  Runs are bit-reproducible: all random
streams derive from (master seed, purpose, round, client), so results
never depend on evaluation order or parallelism.

Runs with exact gradients and a deterministic compressor also verify the
per-round descent and distortion-contraction inequalities inline and
raise :class:`~efsim.errors.TheoryCheckError` on any violation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from . import algorithms, stepsizes
from .algorithms import RunState
from .compressors import CompressorSpec, contraction_functions
from .datagen import (
    SynthConfig,
    contiguous_assignment,
    generate_synthetic,
    parse_libsvm,
    shuffle_heuristic,
    split_dataset,
)
from .errors import ConfigError, DomainError, TheoryCheckError
from .objectives import (
    ClientProblem,
    GlobalProblem,
    StochasticEstimatorSpec,
    make_global_problem,
    sparsity_pattern,
)
from .weighting import (
    WeightVector,
    clone_counts,
    rare_feature_c,
    smoothness_weights,
    summarize,
    uniform_weights,
)

ALGORITHMS = (
    "ef21",
    "ef21w",
    "ef21_cloned",
    "ef21_sgd",
    "ef21w_sgd",
    "ef21_pp",
    "ef21w_pp",
    "ef21_rare",
)
RULES = ("ef21", "ef21w", "clone", "pl", "sgd", "pp", "rare")

_WEIGHTED = {"ef21w", "ef21w_sgd", "ef21w_pp"}
_SGD = {"ef21_sgd", "ef21w_sgd"}
_PP = {"ef21_pp", "ef21w_pp"}

CSV_HEADER = "round,f_value,grad_norm_sq,G_weighted,G_unweighted,lyapunov,bits_uplink_total,participants"

# Stream purposes for seed derivation.
_INIT, _SERVER, _CLIENT, _OUTPUT = 0, 1, 2, 3


def init_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _INIT]))


def server_rng(seed: int, round_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _SERVER, round_index]))


def client_rng_factory(seed: int, round_index: int):
    """Independent per-client streams for one round."""

    def factory(client_index: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([seed, _CLIENT, round_index, client_index])
        )

    return factory


def output_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _OUTPUT]))


@dataclass(frozen=True)
class LibsvmSource:
    """A text dataset split over n clients, optionally variance-shuffled."""

    path: str
    n: int
    loss: str = "logreg_ncvx"
    lam: float = 0.0
    shuffle: bool = True
    dimension: int | None = None


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``problem`` is usually a :class:`SynthConfig` or :class:`LibsvmSource`;
    a prebuilt :class:`~efsim.objectives.GlobalProblem` is also accepted
    for in-process experimentation.
    """

    problem: SynthConfig | LibsvmSource | GlobalProblem
    algorithm: str
    compressor: dict
    rule: str
    multiplier: float = 1.0
    rounds: int = 100
    seed: int = 0
    participation: float | list[float] | None = None
    tau: int = 1
    full_pass: bool = False
    abc: dict | None = None
    output_law: str = "uniform"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.rule not in RULES:
            raise ConfigError(f"unknown step-size rule {self.rule!r}; expected one of {RULES}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if self.multiplier <= 0.0:
            raise ConfigError(f"multiplier must be positive, got {self.multiplier}")
        if self.output_law not in ("uniform", "geometric"):
            raise ConfigError(f"unknown output law {self.output_law!r}")
        if self.rule == "pp" and self.algorithm not in _PP:
            raise ConfigError("rule 'pp' requires a partial-participation algorithm")
        if self.rule == "sgd" and self.algorithm not in _SGD:
            raise ConfigError("rule 'sgd' requires a stochastic-gradient algorithm")
        if self.algorithm in _PP and self.participation is None:
            raise ConfigError(f"algorithm {self.algorithm!r} needs a participation probability")
        if self.algorithm not in _PP and self.participation is not None:
            raise ConfigError(f"algorithm {self.algorithm!r} takes no participation probability")
        if self.output_law == "geometric" and self.algorithm not in _SGD:
            raise ConfigError("the geometric output law applies to stochastic-gradient algorithms")

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        cfg = dict(cfg)
        problem_cfg = dict(cfg.pop("problem", {}))
        source = problem_cfg.pop("source", "synthetic")
        problem: SynthConfig | LibsvmSource
        try:
            if source == "synthetic":
                problem = SynthConfig(**problem_cfg)
            elif source == "libsvm":
                problem = LibsvmSource(**problem_cfg)
            else:
                raise ConfigError(f"unknown problem source {source!r}")
        except TypeError as exc:
            raise ConfigError(f"bad problem config: {exc}") from None
        stepsize_cfg = dict(cfg.pop("stepsize", {}))
        rule = stepsize_cfg.pop("rule", "ef21w")
        multiplier = stepsize_cfg.pop("multiplier", 1.0)
        if stepsize_cfg:
            raise ConfigError(f"unknown stepsize config keys: {sorted(stepsize_cfg)}")
        try:
            return cls(problem=problem, rule=rule, multiplier=multiplier, **cfg)
        except TypeError as exc:
            raise ConfigError(f"bad run config: {exc}") from None

    def to_dict(self) -> dict:
        if isinstance(self.problem, GlobalProblem):
            raise ConfigError("in-process problems are not serializable")
        problem = asdict(self.problem)
        problem["source"] = "synthetic" if isinstance(self.problem, SynthConfig) else "libsvm"
        out = {
            "problem": problem,
            "algorithm": self.algorithm,
            "compressor": dict(self.compressor),
            "stepsize": {"rule": self.rule, "multiplier": self.multiplier},
            "rounds": self.rounds,
            "seed": self.seed,
            "output_law": self.output_law,
        }
        if self.participation is not None:
            out["participation"] = self.participation
        if self.algorithm in _SGD:
            out["tau"] = self.tau
            out["full_pass"] = self.full_pass
            if self.abc is not None:
                out["abc"] = self.abc
        return out


@dataclass(frozen=True)
class MetricsRow:
    """Per-round log: iterate metrics plus that round's uplink accounting."""

    round: int
    f_value: float
    grad_norm_sq: float
    G_weighted: float
    G_unweighted: float
    lyapunov: float | None
    bits_uplink_total: int
    participants: int


@dataclass(frozen=True)
class RunSummary:
    """Aggregates of a completed run and the constants that shaped it."""

    min_grad_norm_sq: float
    mean_grad_norm_sq: float
    final_f: float
    gamma: float
    constants: dict[str, float]


def build_problem(problem_cfg: SynthConfig | LibsvmSource | GlobalProblem) -> GlobalProblem:
    """Materialize the global problem described by a config."""
    if isinstance(problem_cfg, GlobalProblem):
        return problem_cfg
    if isinstance(problem_cfg, SynthConfig):
        return generate_synthetic(problem_cfg)
    with open(problem_cfg.path, "r", encoding="utf-8") as handle:
        dataset = parse_libsvm(handle.read(), dimension=problem_cfg.dimension)
    if problem_cfg.shuffle:
        assignment = shuffle_heuristic(dataset, problem_cfg.n, problem_cfg.loss, problem_cfg.lam)
    else:
        assignment = contiguous_assignment(dataset.m, problem_cfg.n)
    clients = [
        ClientProblem(kind=problem_cfg.loss, data=part, lam=problem_cfg.lam)
        for part in split_dataset(dataset, assignment)
    ]
    return make_global_problem(clients)


def bits_per_round(spec: CompressorSpec, d: int, participants: int) -> int:
    """Uplink bits one round costs: TopK sends value+index, natural 9 bits/scalar."""
    if participants < 0:
        raise DomainError(f"participants must be nonnegative, got {participants}")
    if spec.kind == "topk":
        index_bits = math.ceil(math.log2(d)) if d > 1 else 0
        return participants * spec.k * (64 + index_bits)
    if spec.kind == "natural":
        return participants * d * 9
    return participants * d * 64


@dataclass
class _Resolved:
    """Everything derived from a config before the loop starts."""

    problem: GlobalProblem
    compressor: CompressorSpec
    weights: WeightVector  # aggregation weights of the algorithm
    metric_weights: WeightVector  # smoothness weights, used by the logged distortions
    gamma: float
    alpha: float
    theta: float
    constants: dict[str, float]
    estimator: StochasticEstimatorSpec | None
    p_list: np.ndarray | None
    check_theory: bool


def _resolve(config: RunConfig, check_theory: bool | None) -> _Resolved:
    problem = build_problem(config.problem)
    if config.algorithm == "ef21_cloned":
        counts = clone_counts(problem.smoothness_list())
        problem = algorithms.build_cloned_problem(problem, counts)
    n, d = problem.n, problem.d
    compressor = CompressorSpec.from_config(config.compressor, dimension=d)
    l_list = problem.smoothness_list()
    summary = summarize(l_list)
    weighted = config.algorithm in _WEIGHTED
    metric_weights = smoothness_weights(l_list)
    weights = metric_weights if weighted else uniform_weights(n)

    alpha = compressor.alpha
    constants: dict[str, float] = {
        "L": problem.L,
        "L_AM": summary.L_AM,
        "L_QM": summary.L_QM,
        "L_var": summary.L_var,
        "alpha": alpha,
    }

    p_list = None
    if config.algorithm in _PP:
        p_list = np.broadcast_to(np.asarray(config.participation, dtype=float), (n,)).copy()
        if np.any(p_list <= 0.0) or np.any(p_list > 1.0):
            raise ConfigError("participation probabilities must lie in (0, 1]")

    estimator = None
    if config.algorithm in _SGD:
        abc = config.abc or {}
        estimator = StochasticEstimatorSpec(
            tau=config.tau,
            a=np.asarray(abc["a"], dtype=float) if "a" in abc else None,
            b=np.asarray(abc["b"], dtype=float) if "b" in abc else None,
            c=np.asarray(abc["c"], dtype=float) if "c" in abc else None,
            full_pass=config.full_pass,
        )

    rule = config.rule
    if rule == "ef21":
        gamma = stepsizes.gamma_ef21_classic(problem.L, summary.L_QM, alpha)
    elif rule == "ef21w":
        gamma = stepsizes.gamma_ef21_w(problem.L, summary.L_AM, alpha)
    elif rule == "clone":
        gamma = stepsizes.gamma_clone(problem.L, summary.L_AM, alpha)
    elif rule == "pl":
        if problem.pl_mu is None:
            raise ConfigError("rule 'pl' needs a problem with a strong-convexity constant")
        constants["mu"] = problem.pl_mu
        gamma = stepsizes.gamma_pl(problem.L, summary.L_AM, alpha, problem.pl_mu)
    elif rule == "sgd":
        params = stepsizes.tune_sgd_params(alpha, variant="minibatch")
        constants["theta_hat"] = params.theta_hat
        constants["beta1_hat"] = params.beta1_hat
        gamma = stepsizes.gamma_sgd(problem.L, summary.L_AM, params)
    elif rule == "pp":
        params = stepsizes.tune_pp_params(alpha, float(p_list.min()), float(p_list.max()), summary.L_AM)
        constants["theta_p"] = params.theta_p
        constants["B_tilde"] = params.B_tilde
        gamma = stepsizes.gamma_pp(problem.L, params)
    else:  # rare
        if compressor.kind != "topk":
            raise ConfigError("rule 'rare' requires a topk compressor")
        pattern = sparsity_pattern(problem)
        sizes = pattern.support_sizes()
        if np.any(sizes == 0):
            raise ConfigError("rule 'rare' requires every client to touch some coordinate")
        alpha = float(min(1.0, np.min(compressor.k / sizes)))
        constants["alpha"] = alpha
        c = rare_feature_c(pattern, smoothness_weights(l_list))
        constants["c"] = c
        gamma = stepsizes.gamma_rare(problem.L, summary.L_AM, alpha, c, n)

    constants["xi"] = contraction_functions(alpha).xi
    theta = contraction_functions(alpha).theta
    constants["theta"] = theta
    gamma *= config.multiplier
    constants["gamma"] = gamma

    if check_theory is None:
        check_theory = (
            compressor.deterministic
            and config.multiplier <= 1.0
            and config.algorithm in ("ef21", "ef21w", "ef21_cloned", "ef21_rare")
        )
    return _Resolved(
        problem=problem,
        compressor=compressor,
        weights=weights,
        metric_weights=metric_weights,
        gamma=gamma,
        alpha=alpha,
        theta=theta,
        constants=constants,
        estimator=estimator,
        p_list=p_list,
        check_theory=check_theory,
    )


def _measure(state: RunState, resolved: _Resolved) -> dict[str, float]:
    problem = resolved.problem
    grads = state.grads if state.grads is not None else problem.batch_gradients(state.x)
    state = RunState(
        x=state.x, g=state.g, g_agg=state.g_agg, round=state.round, grads=grads
    )
    grad_f = grads.mean(axis=0)
    report = algorithms.distortion(state, problem, resolved.metric_weights)
    f_value = problem.value(state.x)
    out = {
        "f": f_value,
        "grad_norm_sq": float(grad_f @ grad_f),
        "G_weighted": report.weighted,
        "G_unweighted": report.unweighted,
        "g_dist_sq": float(np.sum((state.g_agg - grad_f) ** 2)),
    }
    if problem.pl_mu is not None:
        out["lyapunov"] = (
            f_value - problem.f_lower + (resolved.gamma / resolved.theta) * report.weighted
        )
    return out


def _check_round(
    prev: dict[str, float],
    cur: dict[str, float],
    dx_sq: float,
    resolved: _Resolved,
    weighted: bool,
    round_index: int,
) -> None:
    """Per-round descent and distortion-contraction inequalities."""
    gamma = resolved.gamma
    big_l = resolved.problem.L
    rhs_descent = (
        prev["f"]
        - 0.5 * gamma * prev["grad_norm_sq"]
        - (0.5 / gamma - 0.5 * big_l) * dx_sq
        + 0.5 * gamma * prev["g_dist_sq"]
    )
    slack = 1e-9 * max(1.0, abs(prev["f"]), abs(rhs_descent))
    if cur["f"] > rhs_descent + slack:
        raise TheoryCheckError(
            f"descent inequality violated at round {round_index}: "
            f"f={cur['f']!r} > bound={rhs_descent!r}"
        )
    params = contraction_functions(resolved.alpha)
    l_am = resolved.constants["L_AM"]
    key = "G_weighted" if weighted else "G_unweighted"
    rhs_contract = (1.0 - params.theta) * prev[key] + params.beta * l_am**2 * dx_sq
    slack = 1e-9 * max(1.0, prev[key], rhs_contract)
    if cur[key] > rhs_contract + slack:
        raise TheoryCheckError(
            f"distortion contraction violated at round {round_index}: "
            f"G={cur[key]!r} > bound={rhs_contract!r}"
        )


def execute(config: RunConfig, check_theory: bool | None = None) -> tuple[list[MetricsRow], RunSummary]:
    """Run one configuration for its full round budget.

    Returns the per-round metric rows and a summary.  ``check_theory``
    overrides the automatic choice of whether to assert the per-round
    inequalities (on by default for deterministic exact-gradient runs at
    multiplier <= 1).
    """
    resolved = _resolve(config, check_theory)
    problem = resolved.problem
    n, d = problem.n, problem.d
    weighted = config.algorithm in _WEIGHTED

    rng0 = init_rng(config.seed)
    x0 = rng0.standard_normal(d) / math.sqrt(d)
    state = algorithms.init_state(problem, x0, resolved.weights if weighted else None)

    # Validate the geometric output law up front: it only exists when the
    # stochastic noise aggregate leaves the ratio inside (0, 1].
    if config.output_law == "geometric":
        est = resolved.estimator
        a_arr, b_arr, c_arr = est.abc_arrays(n)
        params = stepsizes.tune_sgd_params(resolved.alpha, variant="minibatch")
        aggregates = stepsizes.abc_aggregates(
            a_arr, b_arr, c_arr, problem.smoothness_list(), resolved.weights,
            np.full(n, est.tau), variant="minibatch",
        )
        algorithms.geometric_output_law(
            resolved.gamma, aggregates.A_tilde, params.theta_hat, params.beta2_hat
        )

    rows: list[MetricsRow] = []
    bits_total = 0
    prev_metrics: dict[str, float] | None = None
    prev_x = state.x
    for t in range(config.rounds):
        metrics = _measure(state, resolved)
        if resolved.check_theory and prev_metrics is not None:
            dx_sq = float(np.sum((state.x - prev_x) ** 2))
            _check_round(prev_metrics, metrics, dx_sq, resolved, weighted, t)
        prev_metrics, prev_x = metrics, state.x

        client_rngs = client_rng_factory(config.seed, t)
        if config.algorithm in _PP:
            state, participants_idx = algorithms.step_ef21_pp(
                state, problem, resolved.weights if weighted else None,
                resolved.compressor, resolved.gamma, resolved.p_list,
                server_rng(config.seed, t), client_rngs,
            )
            participants = int(participants_idx.size)
        elif config.algorithm in _SGD:
            state = algorithms.step_ef21_w_sgd(
                state, problem, resolved.weights, resolved.compressor,
                resolved.estimator, resolved.gamma, client_rngs,
            )
            participants = n
        elif weighted:
            state = algorithms.step_ef21_w(
                state, problem, resolved.weights, resolved.compressor,
                resolved.gamma, client_rngs,
            )
            participants = n
        else:
            state = algorithms.step_ef21(
                state, problem, resolved.compressor, resolved.gamma, client_rngs
            )
            participants = n

        bits_total += bits_per_round(resolved.compressor, d, participants)
        rows.append(
            MetricsRow(
                round=t,
                f_value=metrics["f"],
                grad_norm_sq=metrics["grad_norm_sq"],
                G_weighted=metrics["G_weighted"],
                G_unweighted=metrics["G_unweighted"],
                lyapunov=metrics.get("lyapunov"),
                bits_uplink_total=bits_total,
                participants=participants,
            )
        )
    if resolved.check_theory and prev_metrics is not None:
        final_metrics = _measure(state, resolved)
        dx_sq = float(np.sum((state.x - prev_x) ** 2))
        _check_round(prev_metrics, final_metrics, dx_sq, resolved, weighted, config.rounds)

    grad_sq = np.array([row.grad_norm_sq for row in rows])
    summary = RunSummary(
        min_grad_norm_sq=float(grad_sq.min()),
        mean_grad_norm_sq=float(grad_sq.mean()),
        final_f=rows[-1].f_value,
        gamma=resolved.gamma,
        constants=dict(resolved.constants),
    )
    return rows, summary


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".17g")


def emit_csv(rows: list[MetricsRow]) -> str:
    """Render rows as CSV with a fixed header and 17-significant-digit floats."""
    if not rows:
        raise DomainError("no rows to emit")
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                (
                    str(row.round),
                    _fmt(row.f_value),
                    _fmt(row.grad_norm_sq),
                    _fmt(row.G_weighted),
                    _fmt(row.G_unweighted),
                    _fmt(row.lyapunov),
                    str(row.bits_uplink_total),
                    str(row.participants),
                )
            )
        )
    return "\n".join(lines) + "\n"


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_polyline(xs, ys, color: str) -> str:
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'


def emit_svg(series, metric: str = "grad_norm_sq") -> str:
    """Render one or more runs as a log-scale polyline chart.

    ``series`` is a list of (label, rows) pairs, or a bare list of rows
    for a single unlabeled run; ``metric`` selects the column.
    Deterministic output: same input, same bytes.
    """
    if series and isinstance(series[0], MetricsRow):
        series = [(metric, list(series))]
    if not series or any(not rows for _, rows in series):
        raise DomainError("no rows to plot")
    width, height = 640.0, 420.0
    left, right, top, bottom = 60.0, 20.0, 30.0, 50.0
    plot_w, plot_h = width - left - right, height - top - bottom

    floor = 1e-300
    all_vals = []
    for _, rows in series:
        all_vals.extend(max(getattr(r, metric), floor) for r in rows)
    y_lo = math.floor(math.log10(min(all_vals)))
    y_hi = math.ceil(math.log10(max(all_vals)))
    if y_hi == y_lo:
        y_hi = y_lo + 1
    t_max = max(len(rows) - 1 for _, rows in series)
    t_max = max(t_max, 1)

    def sx(t: float) -> float:
        return left + plot_w * t / t_max

    def sy(v: float) -> float:
        return top + plot_h * (y_hi - math.log10(max(v, floor))) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for exp in range(y_lo, y_hi + 1):
        y = sy(10.0**exp)
        parts.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">1e{exp}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        t = frac * t_max
        x = sx(t)
        parts.append(
            f'<line x1="{x:.2f}" y1="{top + plot_h}" x2="{x:.2f}" y2="{top + plot_h + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 18:.2f}" font-size="11" text-anchor="middle">{t:.0f}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 12:.2f}" font-size="12" '
        f'text-anchor="middle">round</text>'
    )
    parts.append(
        f'<text x="16" y="{top + plot_h / 2:.2f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + plot_h / 2:.2f})">{metric}</text>'
    )
    for k, (label, rows) in enumerate(series):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        xs = [sx(r.round) for r in rows]
        ys = [sy(max(getattr(r, metric), floor)) for r in rows]
        parts.append(_svg_polyline(xs, ys, color))
        ly = top + 14 + 16 * k
        parts.append(
            f'<line x1="{left + plot_w - 130:.2f}" y1="{ly - 4:.2f}" '
            f'x2="{left + plot_w - 110:.2f}" y2="{ly - 4:.2f}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{left + plot_w - 104:.2f}" y="{ly:.2f}" font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@dataclass(frozen=True)
class ComparisonReport:
    """Joint result of running several configs on the same problem."""

    labels: list[str]
    rows: list[list[MetricsRow]]
    summaries: list[RunSummary]
    gamma_ratios: list[float]  # gamma relative to the first run
    rounds_to_threshold: dict[float, list[int | None]]

    def joint_csv(self) -> str:
        lines = ["label," + CSV_HEADER]
        for label, run_rows in zip(self.labels, self.rows):
            body = emit_csv(run_rows).splitlines()[1:]
            lines.extend(f"{label},{line}" for line in body)
        return "\n".join(lines) + "\n"

    def joint_svg(self, metric: str = "grad_norm_sq") -> str:
        return emit_svg(list(zip(self.labels, self.rows)), metric=metric)

    def threshold_table(self) -> str:
        lines = ["threshold," + ",".join(self.labels)]
        for threshold, hits in sorted(self.rounds_to_threshold.items(), reverse=True):
            cells = ["not reached" if hit is None else str(hit) for hit in hits]
            lines.append(format(threshold, ".17g") + "," + ",".join(cells))
        return "\n".join(lines) + "\n"


def compare(
    configs: list[RunConfig],
    labels: list[str] | None = None,
    thresholds: tuple[float, ...] = (1e-2, 1e-4, 1e-6),
) -> ComparisonReport:
    """Run several configs that share a problem and a round budget."""
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")

    def same_problem(a, b) -> bool:
        if a is b:
            return True
        if isinstance(a, GlobalProblem) or isinstance(b, GlobalProblem):
            return False
        return a == b

    first = configs[0]
    for other in configs[1:]:
        if not same_problem(other.problem, first.problem) or other.rounds != first.rounds:
            raise ConfigError("compared configs must share the problem and the round budget")
    if labels is None:
        labels = [c.algorithm for c in configs]
        if len(set(labels)) != len(labels):
            labels = [f"{c.algorithm}#{i}" for i, c in enumerate(configs)]
    all_rows: list[list[MetricsRow]] = []
    summaries: list[RunSummary] = []
    for config in configs:
        rows, summary = execute(config)
        all_rows.append(rows)
        summaries.append(summary)
    base_gamma = summaries[0].gamma
    ratios = [s.gamma / base_gamma for s in summaries]
    table: dict[float, list[int | None]] = {}
    for threshold in thresholds:
        hits: list[int | None] = []
        for rows in all_rows:
            hit = next((r.round for r in rows if r.grad_norm_sq <= threshold), None)
            hits.append(hit)
        table[threshold] = hits
    return ComparisonReport(
        labels=list(labels),
        rows=all_rows,
        summaries=summaries,
        gamma_ratios=ratios,
        rounds_to_threshold=table,
    )


def summary_to_json(summary: RunSummary) -> str:
    """Deterministic JSON rendering of a run summary."""
    payload: dict[str, Any] = {
        "min_grad_norm_sq": summary.min_grad_norm_sq,
        "mean_grad_norm_sq": summary.mean_grad_norm_sq,
        "final_f": summary.final_f,
        "gamma": summary.gamma,
        "constants": summary.constants,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
