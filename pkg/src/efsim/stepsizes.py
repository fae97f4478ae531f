"""Maximal theoretical step sizes for every algorithm variant.

Each rule returns the largest step size gamma admitted by the
corresponding convergence guarantee.  All rules share the shape
gamma = 1 / (L + penalty) where the penalty couples a mean of the
per-client smoothness constants with the compression factor xi(alpha)
or a relaxed variant of it.  Variants with free analysis parameters
(s, nu, rho) come with deterministic grid+refinement tuners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compressors import contraction_functions, generalized_young
from .errors import DomainError

SGD_VARIANTS = ("minibatch", "abc")
_GRID = 200  # fixed tuning resolution
_REFINE_ITERS = 60


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not value > 0.0 or not math.isfinite(value):
            raise DomainError(f"{name} must be positive and finite, got {value}")


def gamma_ef21_classic(L: float, L_QM: float, alpha: float) -> float:
    """Classic rate: 1 / (L + L_QM * xi(alpha))."""
    _check_positive(L=L, L_QM=L_QM)
    return 1.0 / (L + L_QM * contraction_functions(alpha).xi)


def gamma_ef21_w(L: float, L_AM: float, alpha: float) -> float:
    """Weighted rate: 1 / (L + L_AM * xi(alpha))."""
    _check_positive(L=L, L_AM=L_AM)
    return 1.0 / (L + L_AM * contraction_functions(alpha).xi)


def gamma_clone(L: float, L_AM: float, alpha: float) -> float:
    """Cloned-clients rate: 1 / (L + sqrt(2) * L_AM * xi(alpha))."""
    _check_positive(L=L, L_AM=L_AM)
    return 1.0 / (L + math.sqrt(2.0) * L_AM * contraction_functions(alpha).xi)


def gamma_pl(L: float, L_AM: float, alpha: float, mu: float) -> float:
    """PL-condition rate: min{1/(L + sqrt(2) L_AM xi), theta / (2 mu)}."""
    _check_positive(L=L, L_AM=L_AM, mu=mu)
    params = contraction_functions(alpha)
    return min(gamma_clone(L, L_AM, alpha), params.theta / (2.0 * mu))


def gamma_pl_cloned(L: float, L_AM: float, alpha: float, mu: float) -> float:
    """PL rate of the cloning reformulation, with its literal constant.

    Uses sqrt(2) * L_AM * sqrt(2 beta / theta) = 2 * L_AM * xi(alpha) in
    the denominator, which is more conservative than :func:`gamma_pl`;
    both are exposed because the two guarantees state different
    constants.
    """
    _check_positive(L=L, L_AM=L_AM, mu=mu)
    params = contraction_functions(alpha)
    if params.alpha == 1.0:
        penalty = 0.0
    else:
        penalty = math.sqrt(2.0) * L_AM * math.sqrt(2.0 * params.beta / params.theta)
    return min(1.0 / (L + penalty), params.theta / (2.0 * mu))


def gamma_rare(L: float, L_AM: float, alpha: float, c: float, n: int) -> float:
    """Rare-features rate: 1 / (L + (c/n) * L_AM * xi(alpha))."""
    _check_positive(L=L, L_AM=L_AM)
    if not 0.0 < c <= n:
        raise DomainError(f"sparsity parameter c must lie in (0, {n}], got {c}")
    return 1.0 / (L + (c / n) * L_AM * contraction_functions(alpha).xi)


@dataclass(frozen=True)
class SgdParams:
    """Relaxation parameters for the stochastic-gradient analysis."""

    s: float
    nu: float
    theta_hat: float
    beta1_hat: float
    beta2_hat: float
    variant: str


def sgd_params(alpha: float, s: float, nu: float, variant: str = "minibatch") -> SgdParams:
    """Evaluate the stochastic-analysis constants at given (s, nu).

    Requires (1+s)(1+nu) < 1/(1-alpha) so that theta_hat stays positive.
    The two variants differ in their beta coefficients; the minibatch one
    carries an extra factor of 2 from an additional variance split.
    """
    if variant not in SGD_VARIANTS:
        raise DomainError(f"unknown sgd variant {variant!r}; expected one of {SGD_VARIANTS}")
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if s <= 0.0 or nu <= 0.0:
        raise DomainError(f"s and nu must be positive, got s={s}, nu={nu}")
    residual = 1.0 - alpha
    theta_hat = 1.0 - residual * (1.0 + s) * (1.0 + nu)
    if theta_hat <= 0.0:
        raise DomainError(
            f"(1+s)(1+nu) = {(1 + s) * (1 + nu):g} must stay below "
            f"1/(1-alpha) = {1.0 / residual if residual else math.inf:g}"
        )
    if variant == "minibatch":
        beta1 = 2.0 * residual * (1.0 + s) * (s + 1.0 / nu)
        beta2 = 2.0 * residual * (1.0 + s) * (1.0 + 1.0 / nu) + (1.0 + 1.0 / s)
    else:
        beta1 = residual * (1.0 + s) * (s + 1.0 / nu)
        beta2 = residual * (1.0 + s) + (1.0 + 1.0 / s)
    return SgdParams(s=s, nu=nu, theta_hat=theta_hat, beta1_hat=beta1, beta2_hat=beta2, variant=variant)


def _refine_1d(objective, lo: float, hi: float) -> float:
    """Golden-section pass for a locally unimodal objective."""
    if not hi > lo > 0.0:
        return lo if objective(lo) <= objective(hi) else hi
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(_REFINE_ITERS):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = objective(d)
    return c if fc <= fd else d


def tune_sgd_params(alpha: float, variant: str = "minibatch") -> SgdParams:
    """Pick (s, nu) minimizing beta1_hat / theta_hat.

    Deterministic: a 200x200 logarithmic grid over the admissible region
    followed by one golden-section refinement pass per coordinate.
    """
    if variant not in SGD_VARIANTS:
        raise DomainError(f"unknown sgd variant {variant!r}; expected one of {SGD_VARIANTS}")
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return sgd_params(1.0, 1.0, 1.0, variant)
    budget = 1.0 / (1.0 - alpha)  # (1+s)(1+nu) must stay below this

    def ratio(s: float, nu: float) -> float:
        if s <= 0.0 or nu <= 0.0 or (1.0 + s) * (1.0 + nu) >= budget:
            return math.inf
        p = sgd_params(alpha, s, nu, variant)
        return p.beta1_hat / p.theta_hat

    s_hi = budget - 1.0
    s_grid = np.geomspace(s_hi * 1e-6, s_hi * (1.0 - 1e-9), _GRID)
    best = (math.inf, s_grid[0], s_grid[0])
    for s in s_grid:
        nu_hi = budget / (1.0 + s) - 1.0
        if nu_hi <= 0.0:
            continue
        nu_grid = np.geomspace(nu_hi * 1e-6, nu_hi * (1.0 - 1e-9), _GRID)
        values = [ratio(s, nu) for nu in nu_grid]
        j = int(np.argmin(values))
        if values[j] < best[0]:
            best = (values[j], float(s), float(nu_grid[j]))
    if not math.isfinite(best[0]):
        raise DomainError(f"no admissible (s, nu) found for alpha={alpha}")
    _, s0, nu0 = best
    s1 = _refine_1d(lambda s: ratio(s, nu0), s0 / 2.0, min(2.0 * s0, s_hi * (1.0 - 1e-9)))
    nu_hi = budget / (1.0 + s1) - 1.0
    nu1 = _refine_1d(lambda nu: ratio(s1, nu), nu0 / 2.0, min(2.0 * nu0, nu_hi * (1.0 - 1e-9)))
    if ratio(s1, nu1) <= best[0]:
        return sgd_params(alpha, s1, nu1, variant)
    return sgd_params(alpha, s0, nu0, variant)


def gamma_sgd(L: float, L_AM: float, params: SgdParams) -> float:
    """Stochastic-gradient rate: 1 / (L + L_AM * sqrt(beta1_hat/theta_hat))."""
    _check_positive(L=L, L_AM=L_AM)
    return 1.0 / (L + L_AM * math.sqrt(params.beta1_hat / params.theta_hat))


@dataclass(frozen=True)
class PpParams:
    """Relaxation parameters for the partial-participation analysis."""

    s: float
    rho: float
    p_min: float
    p_max: float
    theta_p: float
    B_tilde: float


def pp_params(alpha: float, s: float, rho: float, p_min: float, p_max: float, L_AM: float) -> PpParams:
    """Evaluate theta_p and B_tilde at given relaxation parameters (s, rho).

    theta_p = p_min rho + theta(alpha, s) p_max - rho - (p_max - p_min)
    must land in (0, 1], which translates into a two-sided admissibility
    window on theta(alpha, s); violations name the failing inequality.
    """
    if not 0.0 < p_min <= p_max <= 1.0:
        raise DomainError(f"need 0 < p_min <= p_max <= 1, got p_min={p_min}, p_max={p_max}")
    if rho <= 0.0:
        raise DomainError(f"rho must be positive, got {rho}")
    _check_positive(L_AM=L_AM)
    young = generalized_young(alpha, s)
    theta_s = young.theta_s
    lower = (rho * (1.0 - p_min) + (p_max - p_min)) / p_max
    upper = (1.0 + rho * (1.0 - p_min) + (p_max - p_min)) / p_max
    if not theta_s > lower:
        raise DomainError(
            f"admissibility violated: theta(alpha, s) = {theta_s:g} must exceed "
            f"(rho (1-p_min) + (p_max-p_min))/p_max = {lower:g}"
        )
    if not theta_s <= upper:
        raise DomainError(
            f"admissibility violated: theta(alpha, s) = {theta_s:g} must not exceed "
            f"(1 + rho (1-p_min) + (p_max-p_min))/p_max = {upper:g}"
        )
    theta_p = p_min * rho + theta_s * p_max - rho - (p_max - p_min)
    b_tilde = (young.beta_s * p_max + (1.0 - p_min) * (1.0 + 1.0 / rho)) * L_AM**2
    return PpParams(s=s, rho=rho, p_min=p_min, p_max=p_max, theta_p=theta_p, B_tilde=b_tilde)


def tune_pp_params(alpha: float, p_min: float, p_max: float, L_AM: float) -> PpParams:
    """Pick (s, rho) maximizing the partial-participation step size.

    Maximizing 1/(L + sqrt(B_tilde/theta_p)) is the same as minimizing
    B_tilde / theta_p, so the tuner is independent of L.  Deterministic
    200x200 logarithmic grid plus one golden-section pass per coordinate.
    """
    if not 0.0 < p_min <= p_max <= 1.0:
        raise DomainError(f"need 0 < p_min <= p_max <= 1, got p_min={p_min}, p_max={p_max}")
    _check_positive(L_AM=L_AM)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if p_min == 1.0:
        # Full participation: theta_p = theta(alpha, s) and rho is inert.
        s = 1.0 if alpha == 1.0 else float(np.sqrt(1.0 / (1.0 - alpha)) - 1.0)
        return pp_params(alpha, s, 1.0, p_min, p_max, L_AM)
    theta_floor = (p_max - p_min) / p_max
    if alpha <= theta_floor:
        raise DomainError(
            f"empty feasible region: theta(alpha, s) < alpha = {alpha:g} can never exceed "
            f"(rho (1-p_min) + (p_max-p_min))/p_max > {theta_floor:g}"
        )

    def objective(s: float, rho: float) -> float:
        try:
            p = pp_params(alpha, s, rho, p_min, p_max, L_AM)
        except DomainError:
            return math.inf
        return p.B_tilde / p.theta_p

    if alpha == 1.0:
        s_grid = np.array([1.0])
    else:
        s_hi = alpha / (1.0 - alpha)  # keep theta(alpha, s) > 0
        s_grid = np.geomspace(s_hi * 1e-8, s_hi * (1.0 - 1e-9), _GRID)
    best = (math.inf, 0.0, 0.0)
    for s in s_grid:
        theta_s = generalized_young(alpha, float(s)).theta_s
        rho_hi = (theta_s * p_max - (p_max - p_min)) / (1.0 - p_min)
        if rho_hi <= 0.0:
            continue
        rho_grid = np.geomspace(rho_hi * 1e-8, rho_hi * (1.0 - 1e-9), _GRID)
        values = [objective(float(s), float(rho)) for rho in rho_grid]
        j = int(np.argmin(values))
        if values[j] < best[0]:
            best = (values[j], float(s), float(rho_grid[j]))
    if not math.isfinite(best[0]):
        raise DomainError(
            "empty feasible region: no (s, rho) satisfies "
            "theta(alpha, s) > (rho (1-p_min) + (p_max-p_min))/p_max"
        )
    _, s0, rho0 = best
    s1 = _refine_1d(lambda s: objective(s, rho0), s0 / 2.0, min(2.0 * s0, float(s_grid[-1])))
    theta_s1 = generalized_young(alpha, s1).theta_s
    rho_hi = (theta_s1 * p_max - (p_max - p_min)) / (1.0 - p_min)
    rho1 = _refine_1d(lambda rho: objective(s1, rho), rho0 / 2.0, min(2.0 * rho0, rho_hi * (1.0 - 1e-9)))
    if objective(s1, rho1) <= best[0]:
        return pp_params(alpha, s1, rho1, p_min, p_max, L_AM)
    return pp_params(alpha, s0, rho0, p_min, p_max, L_AM)


def gamma_pp(L: float, params: PpParams) -> float:
    """Partial-participation rate: 1 / (L + sqrt(B_tilde / theta_p))."""
    _check_positive(L=L)
    return 1.0 / (L + math.sqrt(params.B_tilde / params.theta_p))


@dataclass(frozen=True)
class AbcAggregates:
    """Worst-case noise aggregates entering the stochastic guarantees."""

    A_tilde: float
    C_tilde: float


def abc_aggregates(a, b, c, l_list, weights, tau_list, variant: str = "minibatch") -> AbcAggregates:
    """A_tilde = max_i 2(A_i + L_i (B_i - 1)) / (tau_i n w_i), same for C.

    The abc variant drops the minibatch size from the denominators.
    """
    if variant not in SGD_VARIANTS:
        raise DomainError(f"unknown sgd variant {variant!r}; expected one of {SGD_VARIANTS}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    l_arr = np.asarray(l_list, dtype=float)
    w = np.asarray(weights.w if hasattr(weights, "w") else weights, dtype=float)
    tau = np.asarray(tau_list, dtype=float)
    n = l_arr.size
    for name, arr in (("a", a), ("b", b), ("c", c), ("weights", w), ("tau_list", tau)):
        if arr.shape != (n,):
            raise DomainError(f"{name} must have length {n}, got shape {arr.shape}")
    if np.any(b < 1.0):
        raise DomainError("B coefficients must be >= 1")
    denom = n * w if variant == "abc" else tau * n * w
    return AbcAggregates(
        A_tilde=float(np.max(2.0 * (a + l_arr * (b - 1.0)) / denom)),
        C_tilde=float(np.max(c / denom)),
    )
