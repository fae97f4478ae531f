"""Runnable property suites behind the ``selfcheck`` CLI subcommand.

Each suite re-derives one of the identities or inequalities the library
relies on, using an independent oracle (brute force, projected descent,
Monte Carlo) rather than the code path it checks.  The test suite calls
the same functions at full sample counts; the CLI runs them at reduced
counts for a quick smoke check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compressors import (
    contraction_functions,
    generalized_young,
    natural_compress,
    optimal_young_s,
    top_k,
)
from .datagen import SynthConfig
from .harness import RunConfig, execute
from .weighting import clone_counts, clone_objective, exact_min_clone_objective, summarize


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    v = np.atleast_2d(v)
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ranks = np.arange(1, v.shape[1] + 1)
    cond = u > css / ranks
    rho = v.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    shift = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - shift[:, None], 0.0)


def minimize_weighted_inverse(a: np.ndarray, starts: int = 10, iters: int = 400) -> float:
    """Projected-gradient (with backtracking) minimum of sum a_i^2 / w_i
    over the simplex, run from several random starts."""
    rng = np.random.default_rng(12345)
    sq = a**2

    def objective(rows: np.ndarray) -> np.ndarray:
        return np.sum(sq / rows, axis=1)

    def clean(rows: np.ndarray) -> np.ndarray:
        rows = np.maximum(project_to_simplex(rows), 1e-15)
        return rows / rows.sum(axis=1, keepdims=True)

    w = clean(rng.random((starts, a.size)))
    f_cur = objective(w)
    step = np.full(starts, 1.0 / np.max(sq))
    for _ in range(iters):
        grad = -sq / w**2
        improved = np.zeros(starts, dtype=bool)
        trial = step.copy()
        for _ in range(30):
            cand = clean(w - trial[:, None] * grad)
            f_cand = objective(cand)
            newly = (f_cand < f_cur) & ~improved
            w[newly] = cand[newly]
            f_cur[newly] = f_cand[newly]
            improved |= newly
            if improved.all():
                break
            trial = np.where(improved, trial, trial * 0.5)
        step = np.where(improved, trial * 1.3, trial)
        if not improved.any():
            break
    return float(f_cur.min())


def check_contraction_parameters(samples: int = 200) -> CheckResult:
    """theta/beta/xi identities, the xi window, and the alpha = 1 limit."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for alpha in rng.uniform(1e-4, 1.0, size=samples):
        p = contraction_functions(alpha)
        worst = max(worst, abs(p.theta - (1.0 - math.sqrt(1.0 - alpha))))
        worst = max(worst, abs(p.beta * p.theta - (1.0 - alpha)) / (1.0 - alpha))
        worst = max(worst, abs(p.xi**2 - p.beta / p.theta) / (p.beta / p.theta))
        if not 0.0 <= p.xi < 2.0 / alpha - 1.0:
            return CheckResult("contraction-parameters", False, f"xi window broken at alpha={alpha}")
    exact = contraction_functions(1.0)
    ok = exact.theta == 1.0 and exact.beta == 0.0 and exact.xi == 0.0 and worst < 1e-12
    return CheckResult("contraction-parameters", ok, f"max identity residual {worst:.2e}")


def check_young_optimum(samples: int = 200) -> CheckResult:
    """At s* the relaxed (theta, beta) meet the closed forms."""
    rng = np.random.default_rng(1)
    worst = 0.0
    for alpha in rng.uniform(1e-4, 1.0 - 1e-9, size=samples):
        p = contraction_functions(alpha)
        y = generalized_young(alpha, optimal_young_s(alpha))
        worst = max(worst, abs(y.theta_s - p.theta) / p.theta, abs(y.beta_s - p.beta) / max(p.beta, 1e-300))
    return CheckResult("young-optimal-point", worst < 1e-12, f"max relative residual {worst:.2e}")


def check_topk_properties(samples: int = 500) -> CheckResult:
    """Exact contraction and positive homogeneity of the TopK operator."""
    rng = np.random.default_rng(2)
    for _ in range(samples):
        d = int(rng.integers(1, 16))
        k = int(rng.integers(1, d + 1))
        v = rng.standard_normal(d)
        cv = top_k(v, k)
        if np.sum((cv - v) ** 2) > (1.0 - k / d) * np.sum(v**2) + 1e-12:
            return CheckResult("topk-properties", False, "contraction violated")
        t = float(rng.uniform(0.1, 10.0))
        if not np.array_equal(top_k(t * v, k), t * top_k(v, k)):
            return CheckResult("topk-properties", False, "positive homogeneity violated")
    return CheckResult("topk-properties", True, f"{samples} random vectors")


def check_natural_unbiasedness(draws: int = 10_000) -> CheckResult:
    """Per-coordinate empirical mean within 4 standard errors of the input."""
    rng = np.random.default_rng(3)
    x = np.array([3.0, -1.7, 0.25, 5.5, -0.003, 1024.0, 0.0])
    reps = np.tile(x, (draws, 1))
    compressed = natural_compress(reps, rng)
    mean = compressed.mean(axis=0)
    se = compressed.std(axis=0, ddof=1) / math.sqrt(draws)
    worst = float(np.max(np.abs(mean - x) - 4.0 * se))
    return CheckResult("natural-unbiasedness", worst <= 0.0, f"max |mean-x| - 4se = {worst:.2e}")


def check_optimal_weights(instances: int = 20) -> CheckResult:
    """Projected descent over the simplex cannot beat (sum a_i)^2."""
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, 6))
        a = rng.uniform(0.2, 5.0, size=n)
        target = float(a.sum()) ** 2
        found = minimize_weighted_inverse(a)
        worst = max(worst, abs(found - target) / target)
    return CheckResult("optimal-weights-lemma", worst < 1e-6, f"max relative gap {worst:.2e}")


def check_clone_sandwich(instances: int = 100) -> CheckResult:
    """L_AM <= exact integer min <= M(N*) <= sqrt(2) L_AM, N* total in [n, 2n]."""
    rng = np.random.default_rng(5)
    for _ in range(instances):
        n = int(rng.integers(2, 9))
        l_list = rng.uniform(1.0, 100.0, size=n)
        s = summarize(l_list)
        counts = clone_counts(l_list)
        m_star = clone_objective(l_list, counts.counts)
        m_min = exact_min_clone_objective(l_list)
        tol = 1e-9 * s.L_AM
        ok = (
            s.L_AM - tol <= m_min <= m_star + tol
            and m_star <= math.sqrt(2.0) * s.L_AM + tol
            and n <= counts.total <= 2 * n
        )
        if not ok:
            return CheckResult(
                "clone-sandwich", False,
                f"violated at n={n}: L_AM={s.L_AM}, min={m_min}, M*={m_star}",
            )
    return CheckResult("clone-sandwich", True, f"{instances} random instances")


def check_stepsize_bound(samples: int = 10_000) -> CheckResult:
    """gamma = 1/(sqrt(a) + b) gives a gamma^2 + b gamma <= 1."""
    rng = np.random.default_rng(6)
    a = rng.uniform(1e-6, 1e6, size=samples)
    b = rng.uniform(1e-6, 1e6, size=samples)
    gamma = 1.0 / (np.sqrt(a) + b)
    worst = float(np.max(a * gamma**2 + b * gamma))
    return CheckResult("stepsize-quadratic-bound", worst <= 1.0 + 1e-12, f"max value {worst:.12f}")


def check_improvement_ratio(samples: int = 1000) -> CheckResult:
    """L_QM - L_AM equals L_var / (L_QM + L_AM)."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(2, 12))
        s = summarize(rng.uniform(0.1, 50.0, size=n))
        lhs = s.L_QM - s.L_AM
        rhs = s.L_var / (s.L_QM + s.L_AM)
        worst = max(worst, abs(lhs - rhs) / max(rhs, 1e-15))
    return CheckResult("improvement-ratio-identity", worst < 1e-9, f"max relative residual {worst:.2e}")


def check_run_inequalities(rounds: int = 120) -> CheckResult:
    """A weighted run with inline descent/contraction checks completes."""
    config = RunConfig(
        problem=SynthConfig(
            n=8, d=6, n_per_client=6, l_target=20.0, mu=0.5, q=1.0, z=4.0,
            seed=11, regularizer="nonconvex", lam=0.3,
        ),
        algorithm="ef21w",
        compressor={"kind": "topk", "k": 1},
        rule="ef21w",
        rounds=rounds,
        seed=11,
    )
    rows, _ = execute(config, check_theory=True)
    return CheckResult("descent-and-contraction-run", True, f"{len(rows)} rounds, zero violations")


def check_pl_rate(rounds: int = 300) -> CheckResult:
    """Lyapunov decreases at least geometrically on a ridge problem."""
    config = RunConfig(
        problem=SynthConfig(
            n=6, d=5, n_per_client=5, l_target=10.0, mu=1.0, q=0.5, z=2.0,
            seed=21, regularizer="l2", lam=0.1,
        ),
        algorithm="ef21w",
        compressor={"kind": "topk", "k": 1},
        rule="pl",
        rounds=rounds,
        seed=21,
    )
    rows, summary = execute(config, check_theory=True)
    gamma = summary.gamma
    mu = summary.constants["mu"]
    factor = 1.0 - gamma * mu
    psi0 = rows[0].lyapunov
    worst = 0.0
    for row in rows:
        bound = psi0 * factor**row.round
        worst = max(worst, row.lyapunov - bound * (1.0 + 1e-9))
    return CheckResult("pl-linear-rate", worst <= 0.0, f"max excess {worst:.2e}")


def run_all(fast: bool = True) -> list[CheckResult]:
    """Run every suite; ``fast`` shrinks sample counts for CLI use."""
    if fast:
        return [
            check_contraction_parameters(100),
            check_young_optimum(100),
            check_topk_properties(200),
            check_natural_unbiasedness(5_000),
            check_optimal_weights(10),
            check_clone_sandwich(50),
            check_stepsize_bound(5_000),
            check_improvement_ratio(300),
            check_run_inequalities(60),
            check_pl_rate(150),
        ]
    return [
        check_contraction_parameters(),
        check_young_optimum(),
        check_topk_properties(),
        check_natural_unbiasedness(100_000),
        check_optimal_weights(100),
        check_clone_sandwich(1000),
        check_stepsize_bound(10_000),
        check_improvement_ratio(),
        check_run_inequalities(),
        check_pl_rate(1000),
    ]
