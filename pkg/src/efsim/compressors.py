"""Compression operators and the algebra of contraction parameters.

A contractive compressor C with parameter alpha in (0, 1] satisfies
E ||C(x) - x||^2 <= (1 - alpha) ||x||^2.  Every step-size rule in this
package is phrased in terms of three derived functions of alpha:

    theta(alpha) = 1 - sqrt(1 - alpha)
    beta(alpha)  = (1 - alpha) / (1 - sqrt(1 - alpha))
    xi(alpha)    = sqrt(beta / theta)

Three operator kinds are provided: deterministic TopK sparsification
(alpha = K/d), the identity (alpha = 1), and scaled natural compression,
an unbiased power-of-two rounding with variance factor omega = 1/8 that
becomes contractive with alpha = 1/9 after division by omega + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

NATURAL_OMEGA = 1.0 / 8.0
NATURAL_ALPHA = 1.0 - 1.0 / (NATURAL_OMEGA + 1.0)  # = 1/9

KINDS = ("topk", "natural", "identity")


@dataclass(frozen=True)
class ContractionParams:
    """theta, beta and xi evaluated at a contraction parameter alpha."""

    alpha: float
    theta: float
    beta: float
    xi: float


def contraction_functions(alpha: float) -> ContractionParams:
    """Evaluate theta, beta and xi at ``alpha``.

    For alpha = 1 (exact compressor) beta and xi are defined as their
    limit value 0 instead of evaluating 0/0.
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return ContractionParams(alpha=1.0, theta=1.0, beta=0.0, xi=0.0)
    theta = 1.0 - float(np.sqrt(1.0 - alpha))
    beta = (1.0 - alpha) / theta
    return ContractionParams(alpha=alpha, theta=theta, beta=beta, xi=float(np.sqrt(beta / theta)))


@dataclass(frozen=True)
class GeneralizedYoung:
    """theta and beta relaxed with a free Young-inequality coefficient s."""

    s: float
    theta_s: float
    beta_s: float


def generalized_young(alpha: float, s: float) -> GeneralizedYoung:
    """theta(alpha, s) = 1 - (1-alpha)(1+s), beta(alpha, s) = (1-alpha)(1+1/s)."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if s <= 0.0:
        raise DomainError(f"s must be positive, got {s}")
    return GeneralizedYoung(
        s=float(s),
        theta_s=1.0 - (1.0 - alpha) * (1.0 + s),
        beta_s=(1.0 - alpha) * (1.0 + 1.0 / s),
    )


def optimal_young_s(alpha: float) -> float:
    """The s minimizing beta(alpha, s)/theta(alpha, s): s* = 1/sqrt(1-alpha) - 1.

    At s* the relaxed pair coincides with (theta(alpha), beta(alpha)).
    Only defined for alpha < 1; with alpha = 1 every s > 0 is equivalent.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1) for the optimal s, got {alpha}")
    return 1.0 / np.sqrt(1.0 - alpha) - 1.0


@dataclass(frozen=True)
class CompressorSpec:
    """Which operator to apply and to vectors of which dimension.

    In run-config files this is spelled {"kind": "topk"|"natural"|"identity",
    "k": <int>}; the dimension comes from the problem.
    """

    kind: str
    dimension: int
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown compressor kind {self.kind!r}; expected one of {KINDS}")
        if self.dimension < 1:
            raise DomainError(f"dimension must be positive, got {self.dimension}")
        if self.kind == "topk":
            if self.k is None or not 1 <= self.k <= self.dimension:
                raise DomainError(
                    f"topk requires 1 <= k <= dimension={self.dimension}, got k={self.k}"
                )
        elif self.k is not None:
            raise DomainError(f"compressor kind {self.kind!r} takes no k parameter")

    @property
    def alpha(self) -> float:
        """Contraction parameter of this operator."""
        if self.kind == "topk":
            return self.k / self.dimension
        if self.kind == "identity":
            return 1.0
        return NATURAL_ALPHA

    @property
    def deterministic(self) -> bool:
        return self.kind in ("topk", "identity")

    @classmethod
    def from_config(cls, cfg: dict, dimension: int) -> "CompressorSpec":
        known = {"kind", "k"}
        extra = set(cfg) - known
        if extra:
            raise DomainError(f"unknown compressor config keys: {sorted(extra)}")
        return cls(kind=cfg.get("kind", "topk"), dimension=dimension, k=cfg.get("k"))


def top_k(v: np.ndarray, k: int) -> np.ndarray:
    """Keep the k entries of largest magnitude, zeroing the rest.

    Ties are broken toward the smallest index, which makes the operator
    deterministic and positively homogeneous.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DomainError(f"top_k expects a vector, got shape {v.shape}")
    if not 1 <= k <= v.size:
        raise DomainError(f"k must lie in [1, {v.size}], got {k}")
    order = np.argsort(-np.abs(v), kind="stable")
    out = np.zeros_like(v)
    keep = order[:k]
    out[keep] = v[keep]
    return out


def top_k_rows(rows: np.ndarray, k: int) -> np.ndarray:
    """Apply :func:`top_k` to every row of a matrix (same tie-break)."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise DomainError(f"top_k_rows expects a matrix, got shape {rows.shape}")
    if not 1 <= k <= rows.shape[1]:
        raise DomainError(f"k must lie in [1, {rows.shape[1]}], got {k}")
    order = np.argsort(-np.abs(rows), axis=1, kind="stable")
    out = np.zeros_like(rows)
    keep = order[:, :k]
    np.put_along_axis(out, keep, np.take_along_axis(rows, keep, axis=1), axis=1)
    return out


def natural_compress(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unbiased randomized rounding to one of the two nearest powers of two.

    Each nonzero coordinate t maps to sign(t) * 2^floor(log2 |t|) or
    sign(t) * 2^ceil(log2 |t|); the round-up probability makes the output
    unbiased.  Zeros and exact powers of two pass through unchanged.
    Operates on real values via exponent arithmetic; the 9-bit payload of
    the wire format only enters the bits accounting.  Inputs above the
    largest representable power of two saturate downward (the exponent
    field cannot round up past its maximum).
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("natural_compress requires finite input")
    if rng is None:
        raise DomainError("natural_compress requires a random generator")
    mantissa, exponent = np.frexp(v)  # |mantissa| in [0.5, 1)
    low = np.ldexp(0.5, exponent)  # 2^floor(log2 |v|) for |mantissa| >= 0.5
    absv = np.abs(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_up = np.where(absv > 0.0, (absv - low) / low, 0.0)
    up = rng.random(size=v.shape) < p_up
    max_power = np.ldexp(0.5, np.finfo(float).maxexp)  # 2^1023
    out_abs = np.where(up & (low < max_power), 2.0 * np.minimum(low, max_power / 2), low)
    return np.where(v == 0.0, 0.0, np.sign(v) * out_abs)


def apply(spec: CompressorSpec, v: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply the operator described by ``spec`` to one vector."""
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.dimension,):
        raise DomainError(f"expected a vector of length {spec.dimension}, got shape {v.shape}")
    if spec.kind == "identity":
        return v.copy()
    if spec.kind == "topk":
        return top_k(v, spec.k)
    return natural_compress(v, rng) / (NATURAL_OMEGA + 1.0)


def apply_rows(
    spec: CompressorSpec,
    rows: np.ndarray,
    rngs=None,
) -> np.ndarray:
    """Compress each row independently; row i uses its own random stream.

    ``rngs`` may be None (deterministic kinds only), a single Generator
    shared by all rows, or a callable mapping the row index to a Generator.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != spec.dimension:
        raise DomainError(f"expected rows of length {spec.dimension}, got shape {rows.shape}")
    if spec.kind == "identity":
        return rows.copy()
    if spec.kind == "topk":
        return top_k_rows(rows, spec.k)
    if rngs is None:
        raise DomainError("randomized compressor needs a random stream")
    out = np.empty_like(rows)
    for i in range(rows.shape[0]):
        gen = rngs(i) if callable(rngs) else rngs
        out[i] = natural_compress(rows[i], gen)
    return out / (NATURAL_OMEGA + 1.0)
