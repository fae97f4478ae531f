"""Client losses, gradient oracles, smoothness constants and sparsity patterns.

Three loss kinds are supported, all of the form data term + regularizer:

    linreg_l2    (1/m) ||A x - b||^2          + (lam/2) ||x||^2
    linreg_ncvx  (1/m) ||A x - b||^2          + lam * sum_j x_j^2/(x_j^2+1)
    logreg_ncvx  (1/m) sum_j log(1+e^{-y a'x}) + lam * sum_j x_j^2/(x_j^2+1)

The nonconvex regularizer has Hessian spectrum inside [-1/2, 2] per
coordinate, hence it contributes at most 2*lam to any Lipschitz bound.
Smoothness constants are spectral upper bounds, computed by power
iteration, matching the convention of the step-size rules.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PowerIterationError

KINDS = ("linreg_l2", "linreg_ncvx", "logreg_ncvx")

_POWER_TOL = 1e-10
_POWER_MAX_ITER = 10_000


def _expit(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic sigmoid."""
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class Dataset:
    """Feature rows and labels/targets shared by the oracle functions."""

    features: np.ndarray  # (m, d)
    labels: np.ndarray  # (m,); in {-1, +1} for logistic, real targets otherwise

    def __post_init__(self):
        a = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1:
            raise DomainError(f"features must be a nonempty (m, d) matrix, got shape {a.shape}")
        if y.shape != (a.shape[0],):
            raise DomainError(f"labels must have shape ({a.shape[0]},), got {y.shape}")
        object.__setattr__(self, "features", a)
        object.__setattr__(self, "labels", y)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class ClientProblem:
    """One client's loss: ``scale * (data term + regularizer)``.

    ``scale`` defaults to 1 and is used by the cloning reformulation,
    which replaces a client by rescaled copies of itself.
    """

    kind: str
    data: Dataset
    lam: float = 0.0
    scale: float = 1.0
    _smoothness: float | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")
        if self.lam < 0.0:
            raise DomainError(f"lam must be nonnegative, got {self.lam}")
        if self.scale <= 0.0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        if self.kind == "logreg_ncvx" and not np.all(np.isin(self.data.labels, (-1.0, 1.0))):
            raise DomainError("logistic labels must be -1 or +1")

    @property
    def d(self) -> int:
        return self.data.d

    @property
    def smoothness(self) -> float:
        """Lipschitz bound for this client's gradient (cached)."""
        if self._smoothness is None:
            self._smoothness = self.scale * smoothness_constant(self.kind, self.data, self.lam)
        return self._smoothness


def _check_dim(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DomainError(f"expected a vector of length {d}, got shape {x.shape}")
    return x


def _reg_value(kind: str, x: np.ndarray, lam: float) -> float:
    if lam == 0.0:
        return 0.0
    if kind == "linreg_l2":
        return 0.5 * lam * float(x @ x)
    return lam * float(np.sum(x * x / (x * x + 1.0)))


def _reg_gradient(kind: str, x: np.ndarray, lam: float) -> np.ndarray:
    if lam == 0.0:
        return np.zeros_like(x)
    if kind == "linreg_l2":
        return lam * x
    return lam * 2.0 * x / (x * x + 1.0) ** 2


def value(client: ClientProblem, x: np.ndarray) -> float:
    """Loss of ``client`` at ``x``, regularizer included."""
    x = _check_dim(x, client.d)
    a, y = client.data.features, client.data.labels
    if client.kind == "logreg_ncvx":
        data = float(np.mean(np.logaddexp(0.0, -y * (a @ x))))
    else:
        r = a @ x - y
        data = float(r @ r) / client.data.m
    return client.scale * (data + _reg_value(client.kind, x, client.lam))


def gradient(client: ClientProblem, x: np.ndarray) -> np.ndarray:
    """Exact gradient of ``client`` at ``x``."""
    x = _check_dim(x, client.d)
    a, y = client.data.features, client.data.labels
    if client.kind == "logreg_ncvx":
        coeff = -y * _expit(-y * (a @ x))
        data = (a.T @ coeff) / client.data.m
    else:
        data = (2.0 / client.data.m) * (a.T @ (a @ x - y))
    return client.scale * (data + _reg_gradient(client.kind, x, client.lam))


def power_iteration(matvec, dim: int, tol: float = _POWER_TOL, max_iter: int = _POWER_MAX_ITER) -> float:
    """Largest eigenvalue of a symmetric PSD operator given by ``matvec``."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ matvec(v))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise PowerIterationError("power iteration did not converge", max_iter)


def _data_term_lambda_max(data: Dataset) -> float:
    a = data.features
    if not np.any(a):
        warnings.warn("degenerate client: all-zero features", stacklevel=3)
        return 0.0
    return power_iteration(lambda v: a.T @ (a @ v), data.d)


def smoothness_constant(kind: str, data: Dataset, lam: float) -> float:
    """Spectral Lipschitz bound for the gradient of one client's loss."""
    if kind not in KINDS:
        raise DomainError(f"unknown problem kind {kind!r}")
    lam_max = _data_term_lambda_max(data)
    if kind == "linreg_l2":
        return (2.0 / data.m) * lam_max + lam
    if kind == "linreg_ncvx":
        return (2.0 / data.m) * lam_max + 2.0 * lam
    return lam_max / (4.0 * data.m) + 2.0 * lam


def _reg_smoothness_bound(kind: str, lam: float) -> float:
    return lam if kind == "linreg_l2" else 2.0 * lam


@dataclass
class GlobalProblem:
    """The average loss f = (1/n) sum_i f_i with its derived constants.

    ``L`` is a Lipschitz constant of the gradient of f, ``f_lower`` a
    valid lower bound on f, and ``pl_mu`` (when present) a strong
    convexity / PL constant.  Construct via :func:`make_global_problem`.
    """

    clients: list[ClientProblem]
    L: float
    f_lower: float
    pl_mu: float | None = None
    _stack: tuple | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.clients)

    @property
    def d(self) -> int:
        return self.clients[0].d

    def smoothness_list(self) -> np.ndarray:
        return np.array([c.smoothness for c in self.clients])

    def _stacked(self):
        """Stacked per-client arrays when every client has the same shape."""
        if self._stack is None:
            c0 = self.clients[0]
            homogeneous = all(
                c.kind == c0.kind
                and c.lam == c0.lam
                and c.data.features.shape == c0.data.features.shape
                for c in self.clients
            )
            if homogeneous:
                a = np.stack([c.data.features for c in self.clients])  # (n, m, d)
                y = np.stack([c.data.labels for c in self.clients])  # (n, m)
                s = np.array([c.scale for c in self.clients])  # (n,)
                self._stack = (c0.kind, c0.lam, a, y, s)
            else:
                self._stack = ()
        return self._stack

    def batch_values(self, x: np.ndarray) -> np.ndarray:
        """All client losses at ``x`` as an (n,) vector."""
        stack = self._stacked()
        if not stack:
            return np.array([value(c, x) for c in self.clients])
        kind, lam, a, y, s = stack
        z = np.einsum("nmd,d->nm", a, x)
        if kind == "logreg_ncvx":
            data = np.mean(np.logaddexp(0.0, -y * z), axis=1)
        else:
            r = z - y
            data = np.sum(r * r, axis=1) / a.shape[1]
        return s * (data + _reg_value(kind, np.asarray(x, dtype=float), lam))

    def batch_gradients(self, x: np.ndarray) -> np.ndarray:
        """All client gradients at ``x`` as an (n, d) matrix."""
        stack = self._stacked()
        if not stack:
            return np.stack([gradient(c, x) for c in self.clients])
        kind, lam, a, y, s = stack
        x = np.asarray(x, dtype=float)
        z = np.einsum("nmd,d->nm", a, x)
        if kind == "logreg_ncvx":
            coeff = -y * _expit(-y * z) / a.shape[1]
        else:
            coeff = (2.0 / a.shape[1]) * (z - y)
        data = np.einsum("nmd,nm->nd", a, coeff)
        return s[:, None] * (data + _reg_gradient(kind, x, lam)[None, :])

    def value(self, x: np.ndarray) -> float:
        return float(np.mean(self.batch_values(x)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.mean(self.batch_gradients(x), axis=0)


def _quadratic_hessian(clients: list[ClientProblem]) -> np.ndarray:
    """Dense global Hessian of the data terms of linear-regression clients."""
    d = clients[0].d
    h = np.zeros((d, d))
    for c in clients:
        a = c.data.features
        h += c.scale * (2.0 / c.data.m) * (a.T @ a)
    return h / len(clients)


def global_smoothness(clients: list[ClientProblem]) -> float:
    """Lipschitz constant of the gradient of the average loss.

    Exact (spectral) for pure linear-regression problems; for problems
    involving logistic clients, falls back to the mean of the per-client
    bounds, which is always valid and equals L_AM.
    """
    if not clients:
        raise DomainError("need at least one client")
    d0 = clients[0].d
    if any(c.d != d0 for c in clients):
        raise DomainError("clients disagree on dimension")
    reg = float(np.mean([c.scale * _reg_smoothness_bound(c.kind, c.lam) for c in clients]))
    if all(c.kind in ("linreg_l2", "linreg_ncvx") for c in clients):
        h = _quadratic_hessian(clients)
        if not np.any(h):
            warnings.warn("degenerate problem: zero data Hessian", stacklevel=2)
            return reg
        return power_iteration(lambda v: h @ v, d0) + reg
    return float(np.mean([c.smoothness for c in clients]))


def _inverse_power_iteration(h: np.ndarray, tol: float = _POWER_TOL, max_iter: int = _POWER_MAX_ITER) -> float:
    """Smallest eigenvalue of a symmetric positive-definite matrix."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(h.shape[0])
    v /= np.linalg.norm(v)
    try:
        chol = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        return 0.0
    from numpy.linalg import solve

    def inv_apply(u):
        w = solve(chol, u)
        return solve(chol.T, w)

    nu = 0.0
    for _ in range(max_iter):
        w = inv_apply(v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        nu_new = float(v @ inv_apply(v))
        if abs(nu_new - nu) <= tol * max(abs(nu_new), 1e-300):
            return 1.0 / nu_new
        nu = nu_new
    raise PowerIterationError("inverse power iteration did not converge", max_iter)


def make_global_problem(clients: list[ClientProblem]) -> GlobalProblem:
    """Assemble a :class:`GlobalProblem`, deriving L, f_lower and pl_mu.

    f_lower is 0 for any mix involving nonnegative losses (all three
    kinds are nonnegative) except that for pure ridge regression the
    exact minimum is used instead, so that optimality-gap bounds are
    tight.  pl_mu is populated only for pure ridge regression.
    """
    big_l = global_smoothness(clients)
    problem = GlobalProblem(clients=clients, L=big_l, f_lower=0.0)
    if all(c.kind == "linreg_l2" for c in clients):
        n = len(clients)
        d = clients[0].d
        h = _quadratic_hessian(clients) + np.mean([c.scale * c.lam for c in clients]) * np.eye(d)
        rhs = np.zeros(d)
        for c in clients:
            a, b = c.data.features, c.data.labels
            rhs += c.scale * (2.0 / c.data.m) * (a.T @ b)
        rhs /= n
        try:
            x_star = np.linalg.solve(h, rhs)
        except np.linalg.LinAlgError:
            x_star, *_ = np.linalg.lstsq(h, rhs, rcond=None)
        problem.f_lower = problem.value(x_star)
        mu = _inverse_power_iteration(h)
        problem.pl_mu = mu if mu > 0.0 else None
    return problem


@dataclass(frozen=True)
class StochasticEstimatorSpec:
    """Minibatch estimator: tau samples uniform with replacement per round.

    ``full_pass`` switches to a diagnostic mode that returns the exact
    gradient (useful to validate the stochastic loop against the exact
    one).  The (A, B, C) arrays describe the second-moment bound
    E||grad sample||^2 <= 2A(f_i - f_inf) + B ||grad f_i||^2 + C used by
    the stochastic step-size aggregates; they default to the noise-free
    values A=0, B=1, C=0.
    """

    tau: int = 1
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    c: np.ndarray | None = None
    f_inf: np.ndarray | None = None
    full_pass: bool = False

    def __post_init__(self):
        if self.tau < 1:
            raise DomainError(f"tau must be >= 1, got {self.tau}")
        if self.b is not None and np.any(np.asarray(self.b) < 1.0):
            raise DomainError("B coefficients must be >= 1")
        if self.a is not None and np.any(np.asarray(self.a) < 0.0):
            raise DomainError("A coefficients must be >= 0")
        if self.c is not None and np.any(np.asarray(self.c) < 0.0):
            raise DomainError("C coefficients must be >= 0")

    def abc_arrays(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = np.zeros(n) if self.a is None else np.broadcast_to(np.asarray(self.a, float), (n,))
        b = np.ones(n) if self.b is None else np.broadcast_to(np.asarray(self.b, float), (n,))
        c = np.zeros(n) if self.c is None else np.broadcast_to(np.asarray(self.c, float), (n,))
        return a, b, c


def stochastic_gradient(
    client: ClientProblem,
    x: np.ndarray,
    spec: StochasticEstimatorSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Average of ``spec.tau`` per-sample gradients, drawn with replacement.

    The regularizer gradient is always added in full, so the estimator is
    unbiased for the client gradient.  In ``full_pass`` mode the exact
    gradient is returned and the rng is untouched.
    """
    if spec.full_pass:
        return gradient(client, x)
    x = _check_dim(x, client.d)
    a, y = client.data.features, client.data.labels
    idx = rng.integers(0, client.data.m, size=spec.tau)
    rows, targets = a[idx], y[idx]
    if client.kind == "logreg_ncvx":
        coeff = -targets * _expit(-targets * (rows @ x))
        data = (rows.T @ coeff) / spec.tau
    else:
        data = (2.0 / spec.tau) * (rows.T @ (rows @ x - targets))
    return client.scale * (data + _reg_gradient(client.kind, x, client.lam))


@dataclass(frozen=True)
class SparsityPattern:
    """Which coordinates each client's gradient can touch.

    ``mask[i, j]`` is True when coordinate j is active for client i.
    """

    mask: np.ndarray  # (n, d) bool

    @property
    def n(self) -> int:
        return self.mask.shape[0]

    @property
    def d(self) -> int:
        return self.mask.shape[1]

    def support(self, i: int) -> np.ndarray:
        """Active coordinate indices of client i."""
        return np.flatnonzero(self.mask[i])

    def clients_for(self, j: int) -> np.ndarray:
        """Clients whose gradients can touch coordinate j."""
        return np.flatnonzero(self.mask[:, j])

    def support_sizes(self) -> np.ndarray:
        return self.mask.sum(axis=1)


def sparsity_pattern(problem: GlobalProblem) -> SparsityPattern:
    """Gradient support of each client, from the feature column supports.

    Requires lam = 0 on every client: any regularizer makes every
    coordinate active, which defeats the rare-features analysis.
    """
    if any(c.lam != 0.0 for c in problem.clients):
        raise DomainError(
            "sparsity_pattern requires lam = 0 on every client: a regularizer "
            "makes all coordinates active, so gradients no longer live in the "
            "per-client feature subspaces assumed by the rare-features regime"
        )
    mask = np.stack([np.any(c.data.features != 0.0, axis=0) for c in problem.clients])
    return SparsityPattern(mask=mask)
