"""Synthetic problem generation, LIBSVM parsing, and heterogeneity shuffling.

The synthetic generator builds least-squares clients whose data-term
Hessians have prescribed uniformly spaced spectra, so the per-client
smoothness constants follow a controllable profile: a ramp between mu
and L, sharpened toward the extremes by q >= 0 (or flattened toward the
midpoint by q < 0), with the first/last client additionally scaled by
1/z and z.  A final global rescaling pins the smoothness of the average
data term exactly at the requested L.

The shuffling heuristic redistributes a dataset across clients so that
the variance of the per-client smoothness constants is (approximately)
maximized, which is the regime where the weighted methods shine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LibsvmParseError
from .objectives import ClientProblem, Dataset, GlobalProblem, make_global_problem, power_iteration

REGULARIZERS = ("l2", "nonconvex")


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic generator.

    ``q`` in [-1, 1] shapes the spread of the per-client constants and
    ``z > 0`` stretches the first and last client by 1/z and z.  ``lam``
    and ``regularizer`` choose the regularizer of the emitted clients;
    ``l_target > mu > 0`` pin the global smoothness and the strong
    convexity floor of the data terms.
    """

    n: int
    d: int
    n_per_client: int
    l_target: float
    mu: float
    q: float
    z: float
    seed: int
    regularizer: str = "l2"
    lam: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")
        if self.n_per_client < self.d:
            raise DomainError(
                f"n_per_client must be >= d (a d-point spectrum needs d rows), "
                f"got n_per_client={self.n_per_client}, d={self.d}"
            )
        if not self.l_target > self.mu > 0.0:
            raise DomainError(f"need l_target > mu > 0, got l_target={self.l_target}, mu={self.mu}")
        if not -1.0 <= self.q <= 1.0:
            raise DomainError(f"q must lie in [-1, 1], got {self.q}")
        if not self.z > 0.0:
            raise DomainError(f"z must be positive, got {self.z}")
        if self.seed < 0:
            raise DomainError(f"seed must be nonnegative, got {self.seed}")
        if self.regularizer not in REGULARIZERS:
            raise DomainError(f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}")
        if self.lam < 0.0:
            raise DomainError(f"lam must be nonnegative, got {self.lam}")


def _lerp(a: float, b: float, t: float) -> float:
    return a * (1.0 - t) + b * t


def smoothness_targets(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-client (mu_i, L_i) spectrum endpoints before the global rescale."""
    n, big_l, mu = cfg.n, cfg.l_target, cfg.mu
    ramp = np.array([(i / n) * (big_l - mu) + mu for i in range(1, n + 1)])
    tops = np.empty(n)
    if cfg.q >= 0.0:
        half = n // 2
        for i in range(n):
            anchor = mu if i < half else big_l
            tops[i] = _lerp(ramp[i], anchor, cfg.q)
    else:
        for i in range(n):
            tops[i] = _lerp(ramp[i], 0.5 * (big_l + mu), -cfg.q)
    bottoms = np.full(n, mu)
    # Both spectrum endpoints of the first/last client are stretched,
    # so each client keeps a well-ordered interval.
    bottoms[0] /= cfg.z
    tops[0] /= cfg.z
    bottoms[-1] *= cfg.z
    tops[-1] *= cfg.z
    return bottoms, tops


def _random_orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Orthonormal columns with deterministic signs (QR of a Gaussian)."""
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def generate_synthetic(cfg: SynthConfig) -> GlobalProblem:
    """Deterministically generate the global problem described by ``cfg``.

    Each client's data-term Hessian gets d eigenvalues equally spaced on
    its target interval, conjugated by a seeded random rotation; the
    feature matrix is recovered through a seeded orthonormal row frame.
    After assembling all clients, every feature matrix is rescaled by a
    common factor so the average data term is exactly l_target-smooth,
    and targets are set to b_i = A_i x_solution for a seeded solution.
    """
    rng = np.random.default_rng(cfg.seed)
    x_solution = rng.standard_normal(cfg.d)
    lo, hi = smoothness_targets(cfg)
    mats = []
    for i in range(cfg.n):
        eigs = np.linspace(lo[i], hi[i], cfg.d)
        rotation = _random_orthogonal(rng, cfg.d, cfg.d)
        frame = _random_orthogonal(rng, cfg.n_per_client, cfg.d)
        # A = frame diag(sqrt(m eigs / 2)) rotation^T, so that
        # (2/m) A^T A = rotation diag(eigs) rotation^T.
        a = frame @ (np.sqrt(cfg.n_per_client * eigs / 2.0)[:, None] * rotation.T)
        mats.append(a)
    hessian = np.zeros((cfg.d, cfg.d))
    for a in mats:
        hessian += (2.0 / cfg.n_per_client) * (a.T @ a)
    hessian /= cfg.n
    measured = power_iteration(lambda v: hessian @ v, cfg.d)
    factor = np.sqrt(cfg.l_target / measured)
    kind = "linreg_l2" if cfg.regularizer == "l2" else "linreg_ncvx"
    clients = []
    for a in mats:
        a_scaled = factor * a
        clients.append(
            ClientProblem(kind=kind, data=Dataset(a_scaled, a_scaled @ x_solution), lam=cfg.lam)
        )
    return make_global_problem(clients)


def parse_libsvm(text: str, dimension: int | None = None) -> Dataset:
    """Parse sparse "label index:value" lines into a dense dataset.

    Indices are 1-based and must be strictly increasing within a line;
    missing indices are zeros.  The dimension is the largest index seen
    unless overridden.  Labels are mapped to {-1, +1}, with 0 mapping to
    -1 so that both {0, 1} and {-1, +1} labelings work.
    """
    rows: list[tuple[float, list[tuple[int, float]]]] = []
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmParseError(f"label {tokens[0]!r} is not a number", lineno) from None
        pairs: list[tuple[int, float]] = []
        previous = 0
        for token in tokens[1:]:
            head, sep, tail = token.partition(":")
            if not sep or not head or not tail:
                raise LibsvmParseError(f"malformed feature token {token!r}", lineno)
            try:
                index = int(head)
                featval = float(tail)
            except ValueError:
                raise LibsvmParseError(f"malformed feature token {token!r}", lineno) from None
            if index <= previous:
                raise LibsvmParseError(
                    f"indices must be strictly increasing and >= 1, got {index} after {previous}",
                    lineno,
                )
            previous = index
            pairs.append((index, featval))
        max_index = max(max_index, previous)
        rows.append((label, pairs))
    if not rows:
        raise LibsvmParseError("no data lines found", 0)
    d = max_index if dimension is None else dimension
    if d < max_index:
        raise LibsvmParseError(f"dimension override {d} is below the largest index {max_index}", 0)
    if d < 1:
        raise LibsvmParseError("dataset has no features", 0)
    features = np.zeros((len(rows), d))
    labels = np.empty(len(rows))
    for i, (label, pairs) in enumerate(rows):
        labels[i] = 1.0 if label > 0.0 else -1.0
        for index, featval in pairs:
            features[i, index - 1] = featval
    return Dataset(features=features, labels=labels)


@dataclass(frozen=True)
class ShuffleAssignment:
    """A partition of dataset rows into per-client index lists."""

    clients: list[np.ndarray]

    def sizes(self) -> np.ndarray:
        return np.array([idx.size for idx in self.clients])


def _row_smoothness(features: np.ndarray, loss_kind: str, lam: float) -> np.ndarray:
    """Single-row smoothness bounds, matching the client-level conventions."""
    sq = np.sum(features**2, axis=1)
    if loss_kind == "logreg_ncvx":
        return sq / 4.0 + 2.0 * lam
    if loss_kind == "linreg_l2":
        return 2.0 * sq + lam
    if loss_kind == "linreg_ncvx":
        return 2.0 * sq + 2.0 * lam
    raise DomainError(f"unknown loss kind {loss_kind!r}")


def shuffle_heuristic(dataset: Dataset, n: int, loss_kind: str, lam: float) -> ShuffleAssignment:
    """Split rows over n clients, greedily pushing smoothness variance up.

    Rows are sorted by their single-row smoothness constant; each client
    is seeded with one spread-out row of the sorted order, and every
    remaining row goes to the assignable client whose updated mean row
    constant maximizes the variance across clients.  Clients close at
    ceil(m/n) rows, and the final sizes differ by at most one.  Greedy
    ties break toward the lowest client index.
    """
    m = dataset.m
    if m < n:
        raise DomainError(f"need at least one row per client, got m={m} < n={n}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    row_l = _row_smoothness(dataset.features, loss_kind, lam)
    order = np.argsort(row_l, kind="stable")
    base, remainder = divmod(m, n)

    seed_positions = [((2 * i - 1) * m) // (2 * n) for i in range(1, n + 1)]
    assigned = [[int(order[pos])] for pos in seed_positions]
    sums = np.array([row_l[order[pos]] for pos in seed_positions])
    counts = np.ones(n, dtype=int)

    taken = set(seed_positions)
    big_clients = int(np.sum(counts == base + 1))
    for pos in range(m):
        if pos in taken:
            continue
        row = int(order[pos])
        value = row_l[row]
        # A client may take the row if it stays below ceil(m/n) rows and,
        # once enough clients have reached that size, below floor(m/n).
        assignable = counts <= base - 1
        if big_clients < remainder:
            assignable |= counts == base
        candidate_means = (sums + value) / (counts + 1)
        means = sums / counts
        total = means.sum()
        total_sq = (means**2).sum()
        best_var = -np.inf
        best_client = -1
        for i in range(n):
            if not assignable[i]:
                continue
            s1 = total - means[i] + candidate_means[i]
            s2 = total_sq - means[i] ** 2 + candidate_means[i] ** 2
            var = s2 / n - (s1 / n) ** 2
            if var > best_var:
                best_var = var
                best_client = i
        assigned[best_client].append(row)
        sums[best_client] += value
        counts[best_client] += 1
        if counts[best_client] == base + 1:
            big_clients += 1
    return ShuffleAssignment(clients=[np.array(idx, dtype=int) for idx in assigned])


def split_dataset(dataset: Dataset, assignment: ShuffleAssignment) -> list[Dataset]:
    """Materialize one dataset per client from an assignment."""
    return [
        Dataset(features=dataset.features[idx], labels=dataset.labels[idx])
        for idx in assignment.clients
    ]


def contiguous_assignment(m: int, n: int) -> ShuffleAssignment:
    """Balanced contiguous split (sizes differ by at most one)."""
    if m < n:
        raise DomainError(f"need at least one row per client, got m={m} < n={n}")
    bounds = np.linspace(0, m, n + 1).astype(int)
    return ShuffleAssignment(
        clients=[np.arange(bounds[i], bounds[i + 1]) for i in range(n)]
    )
