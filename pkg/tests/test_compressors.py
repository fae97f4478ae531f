import numpy as np
import pytest

from efsim import (
    CompressorSpec,
    DomainError,
    contraction_functions,
    generalized_young,
    natural_compress,
    optimal_young_s,
    top_k,
)
from efsim.compressors import NATURAL_ALPHA, NATURAL_OMEGA, apply, apply_rows, top_k_rows


class TestContractionFunctions:
    def test_exact_compressor_limit(self):
        p = contraction_functions(1.0)
        assert (p.theta, p.beta, p.xi) == (1.0, 0.0, 0.0)

    def test_xi_at_one_tenth(self):
        # Top1 in dimension 10.
        assert contraction_functions(0.1).xi == pytest.approx(18.486, rel=2e-3)

    def test_xi_at_one_over_302(self):
        assert contraction_functions(1.0 / 302.0).xi == pytest.approx(602.49, rel=2e-3)

    def test_identities_and_window(self, rng):
        for alpha in rng.uniform(1e-4, 1.0, size=300):
            p = contraction_functions(alpha)
            assert p.theta == pytest.approx(1.0 - np.sqrt(1.0 - alpha), abs=1e-15)
            assert p.beta * p.theta == pytest.approx(1.0 - alpha, abs=1e-12)
            assert p.xi**2 == pytest.approx(p.beta / p.theta, rel=1e-12)
            assert 0.0 <= p.xi < 2.0 / alpha - 1.0

    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.5, float("nan")])
    def test_domain(self, alpha):
        with pytest.raises(DomainError):
            contraction_functions(alpha)


class TestGeneralizedYoung:
    def test_optimal_point_matches_closed_forms(self, rng):
        for alpha in rng.uniform(1e-4, 1.0 - 1e-9, size=300):
            p = contraction_functions(alpha)
            y = generalized_young(alpha, optimal_young_s(alpha))
            assert y.theta_s == pytest.approx(p.theta, rel=1e-12)
            assert y.beta_s == pytest.approx(p.beta, rel=1e-12)

    def test_formulas(self):
        y = generalized_young(0.5, 0.25)
        assert y.theta_s == pytest.approx(1.0 - 0.5 * 1.25)
        assert y.beta_s == pytest.approx(0.5 * 5.0)

    def test_rejects_bad_s(self):
        with pytest.raises(DomainError):
            generalized_young(0.5, 0.0)
        with pytest.raises(DomainError):
            optimal_young_s(1.0)


class TestTopK:
    def test_unique_argmax(self):
        assert np.array_equal(top_k(np.array([1.0, -3.0, 2.0]), 1), [0.0, -3.0, 0.0])

    def test_tie_break_smallest_index(self):
        assert np.array_equal(top_k(np.array([2.0, -2.0, 1.0]), 1), [2.0, 0.0, 0.0])

    def test_k_equals_d_identity(self, rng):
        v = rng.standard_normal(6)
        assert np.array_equal(top_k(v, 6), v)

    def test_positive_homogeneity_exact(self, rng):
        for _ in range(200):
            d = int(rng.integers(1, 12))
            k = int(rng.integers(1, d + 1))
            v = rng.standard_normal(d)
            t = float(rng.uniform(0.05, 20.0))
            assert np.array_equal(top_k(t * v, k), t * top_k(v, k))

    def test_rows_match_single_vector_path(self, rng):
        rows = rng.standard_normal((40, 7))
        rows[3, 1] = rows[3, 4]  # force a tie inside one row
        batched = top_k_rows(rows, 3)
        for i in range(rows.shape[0]):
            assert np.array_equal(batched[i], top_k(rows[i], 3))

    def test_k_out_of_range(self):
        with pytest.raises(DomainError):
            top_k(np.ones(3), 0)
        with pytest.raises(DomainError):
            top_k(np.ones(3), 4)

    def test_exact_contraction_many_vectors(self, rng):
        # No sampling needed: the operator is deterministic.
        vectors = rng.standard_normal((10_000, 8))
        for k in (1, 3, 8):
            compressed = top_k_rows(vectors, k)
            err = np.sum((compressed - vectors) ** 2, axis=1)
            bound = (1.0 - k / 8) * np.sum(vectors**2, axis=1)
            assert np.all(err <= bound + 1e-12)


class TestNaturalCompression:
    def test_exact_power_of_two_fixed(self, rng):
        out = natural_compress(np.array([4.0, -8.0, 0.5]), rng)
        assert np.array_equal(out, [4.0, -8.0, 0.5])

    def test_zero_fixed(self, rng):
        assert natural_compress(np.array([0.0]), rng)[0] == 0.0

    def test_three_splits_between_two_and_four(self):
        rng = np.random.default_rng(0)
        draws = natural_compress(np.full((20_000, 1), 3.0), rng).ravel()
        assert set(np.unique(draws)) == {2.0, 4.0}
        # Unbiasedness identity: 0.5 * 2 + 0.5 * 4 = 3.
        assert draws.mean() == pytest.approx(3.0, abs=4 * draws.std(ddof=1) / np.sqrt(draws.size))

    def test_unbiased_per_coordinate(self):
        rng = np.random.default_rng(1)
        x = np.array([3.0, -1.7, 0.25, 5.5, -0.003, 1024.0, 7.3, -255.9])
        reps = np.tile(x, (100_000, 1))
        out = natural_compress(reps, rng)
        se = out.std(axis=0, ddof=1) / np.sqrt(out.shape[0])
        assert np.all(np.abs(out.mean(axis=0) - x) <= 4.0 * se)

    def test_requires_finite(self, rng):
        with pytest.raises(DomainError):
            natural_compress(np.array([1.0, np.inf]), rng)

    def test_extreme_magnitudes_stay_finite(self, rng):
        v = np.array([5e-324, 1e-300, 1.7e308, -1.2e308, 2.0**1023])
        for _ in range(200):
            out = natural_compress(v, rng)
            assert np.all(np.isfinite(out))
        # No representable power above 2^1023: saturate instead of overflow.
        assert natural_compress(np.array([1.7e308]), rng)[0] == 2.0**1023

    def test_requires_rng(self):
        with pytest.raises(DomainError):
            natural_compress(np.array([3.0]), None)


class TestApply:
    def test_identity(self, rng):
        spec = CompressorSpec("identity", 4)
        v = rng.standard_normal(4)
        assert np.array_equal(apply(spec, v), v)

    def test_topk_delegates(self):
        spec = CompressorSpec("topk", 3, 1)
        assert np.array_equal(apply(spec, np.array([1.0, -3.0, 2.0])), [0.0, -3.0, 0.0])

    def test_natural_scaled_on_power_of_two(self):
        spec = CompressorSpec("natural", 1)
        out = apply(spec, np.array([4.0]), np.random.default_rng(0))
        assert out[0] == pytest.approx((8.0 / 9.0) * 4.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            apply(CompressorSpec("identity", 4), np.ones(3))

    def test_alpha_values(self):
        assert CompressorSpec("topk", 10, 1).alpha == pytest.approx(0.1)
        assert CompressorSpec("identity", 10).alpha == 1.0
        assert CompressorSpec("natural", 10).alpha == pytest.approx(1.0 / 9.0)
        assert NATURAL_ALPHA == pytest.approx(1.0 - 1.0 / (NATURAL_OMEGA + 1.0))

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            CompressorSpec("topk", 3, 0)
        with pytest.raises(DomainError):
            CompressorSpec("topk", 3, 4)
        with pytest.raises(DomainError):
            CompressorSpec("identity", 3, 1)
        with pytest.raises(DomainError):
            CompressorSpec("rank", 3)

    def test_from_config(self):
        spec = CompressorSpec.from_config({"kind": "topk", "k": 2}, dimension=5)
        assert (spec.kind, spec.k, spec.dimension) == ("topk", 2, 5)
        with pytest.raises(DomainError):
            CompressorSpec.from_config({"kind": "topk", "k": 1, "bogus": 1}, dimension=5)


class TestContractionProperty:
    """Empirical mean of ||C(x) - x||^2 stays below (1 - alpha) ||x||^2."""

    def test_deterministic_kinds_exact(self, rng):
        vectors = rng.standard_normal((10_000, 6))
        for spec in (CompressorSpec("topk", 6, 2), CompressorSpec("identity", 6)):
            out = apply_rows(spec, vectors)
            err = np.sum((out - vectors) ** 2, axis=1)
            bound = (1.0 - spec.alpha) * np.sum(vectors**2, axis=1)
            assert np.all(err <= bound + 1e-12)

    def test_natural_scaled_sampled(self):
        rng = np.random.default_rng(3)
        spec = CompressorSpec("natural", 6)
        draws = 1000
        vectors = rng.standard_normal((10_000, 6))
        # Chunk over vectors; each vector's expectation is estimated over
        # `draws` independent compressions.
        for chunk in np.array_split(vectors, 50):
            reps = np.repeat(chunk[:, None, :], draws, axis=1)
            out = natural_compress(reps, rng) / (NATURAL_OMEGA + 1.0)
            err = np.sum((out - reps) ** 2, axis=2)
            mean = err.mean(axis=1)
            se = err.std(axis=1, ddof=1) / np.sqrt(draws)
            bound = (1.0 - spec.alpha) * np.sum(chunk**2, axis=1)
            assert np.all(mean <= bound + 3.0 * se)
