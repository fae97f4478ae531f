import math

import numpy as np
import pytest

from efsim import (
    ClientProblem,
    Dataset,
    DomainError,
    StochasticEstimatorSpec,
    global_smoothness,
    gradient,
    make_global_problem,
    smoothness_constant,
    sparsity_pattern,
    stochastic_gradient,
    value,
)
from tests.conftest import disjoint_support_problem, random_client

KINDS = ("linreg_l2", "linreg_ncvx", "logreg_ncvx")


def finite_difference(client, x, h=1e-6):
    grad = np.empty_like(x)
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = h
        grad[j] = (value(client, x + step) - value(client, x - step)) / (2.0 * h)
    return grad


class TestValue:
    def test_logistic_at_origin_is_log2(self, rng):
        client = random_client(rng, "logreg_ncvx", lam=0.7)
        assert value(client, np.zeros(client.d)) == pytest.approx(math.log(2.0))

    def test_identity_design_quadratic(self):
        d = 4
        client = ClientProblem("linreg_l2", Dataset(np.eye(d), np.zeros(d)), lam=0.0)
        x = np.array([1.0, -2.0, 0.5, 3.0])
        assert value(client, x) == pytest.approx(float(x @ x) / d)

    def test_nonconvex_regularizer_at_ones(self):
        d = 6
        client = ClientProblem("linreg_ncvx", Dataset(np.zeros((1, d)), np.zeros(1)), lam=1.0)
        assert value(client, np.ones(d)) == pytest.approx(d / 2.0)

    def test_dimension_mismatch(self, rng):
        client = random_client(rng, "linreg_l2")
        with pytest.raises(DomainError):
            value(client, np.zeros(client.d + 1))


class TestGradient:
    def test_regularizer_only_zero_at_origin(self):
        d = 3
        client = ClientProblem("linreg_ncvx", Dataset(np.zeros((1, d)), np.zeros(1)), lam=1.0)
        assert np.array_equal(gradient(client, np.zeros(d)), np.zeros(d))

    def test_regularizer_only_at_unit_vector(self):
        d = 3
        client = ClientProblem("linreg_ncvx", Dataset(np.zeros((1, d)), np.zeros(1)), lam=1.0)
        grad = gradient(client, np.array([1.0, 0.0, 0.0]))
        assert grad == pytest.approx([0.5, 0.0, 0.0], abs=1e-12)
        fd = finite_difference(client, np.array([1.0, 0.0, 0.0]))
        assert grad == pytest.approx(fd, abs=1e-6)

    def test_logistic_single_row_at_origin(self, rng):
        a = rng.standard_normal(4)
        client = ClientProblem("logreg_ncvx", Dataset(a[None, :], np.array([1.0])), lam=0.0)
        grad = gradient(client, np.zeros(4))
        assert grad == pytest.approx(-a / 2.0)
        assert grad == pytest.approx(finite_difference(client, np.zeros(4)), abs=1e-6)

    @pytest.mark.parametrize("kind", KINDS)
    def test_finite_difference_oracle(self, kind):
        rng = np.random.default_rng(hash(kind) % 2**32)
        for _ in range(100):
            client = random_client(rng, kind, d=4, m=5, lam=float(rng.uniform(0.0, 1.0)))
            x = rng.standard_normal(4)
            assert gradient(client, x) == pytest.approx(
                finite_difference(client, x), abs=1e-5
            )

    @pytest.mark.parametrize("kind", KINDS)
    def test_smoothness_is_valid_lipschitz_bound(self, kind):
        rng = np.random.default_rng(7)
        client = random_client(rng, kind, d=5, m=8, lam=0.4)
        big_l = client.smoothness
        for _ in range(1000):
            x = rng.standard_normal(5) * 3.0
            y = rng.standard_normal(5) * 3.0
            lhs = np.linalg.norm(gradient(client, x) - gradient(client, y))
            assert lhs <= big_l * np.linalg.norm(x - y) * (1.0 + 1e-9)


class TestSmoothnessConstant:
    def test_identity_design(self):
        d = 5
        data = Dataset(np.eye(d), np.zeros(d))
        assert smoothness_constant("linreg_l2", data, 0.0) == pytest.approx(2.0 / d)

    def test_logistic_rank_one(self, rng):
        a = rng.standard_normal(6)
        data = Dataset(a[None, :], np.array([1.0]))
        assert smoothness_constant("logreg_ncvx", data, 0.0) == pytest.approx(
            float(a @ a) / 4.0, rel=1e-8
        )

    def test_degenerate_zero_features(self):
        data = Dataset(np.zeros((2, 3)), np.zeros(2))
        with pytest.warns(UserWarning, match="degenerate"):
            assert smoothness_constant("linreg_l2", data, 0.0) == 0.0

    def test_regularizer_contributions(self, rng):
        data = Dataset(rng.standard_normal((4, 3)), rng.standard_normal(4))
        base = smoothness_constant("linreg_l2", data, 0.0)
        assert smoothness_constant("linreg_l2", data, 0.5) == pytest.approx(base + 0.5)
        assert smoothness_constant("linreg_ncvx", data, 0.5) == pytest.approx(base + 1.0)

    def test_scale_multiplies_smoothness(self, rng):
        data = Dataset(rng.standard_normal((4, 3)), rng.standard_normal(4))
        base = ClientProblem("linreg_l2", data, lam=0.1)
        scaled = ClientProblem("linreg_l2", data, lam=0.1, scale=2.5)
        assert scaled.smoothness == pytest.approx(2.5 * base.smoothness)


class TestGlobalSmoothness:
    def test_single_client(self, rng):
        client = random_client(rng, "linreg_l2", lam=0.2)
        assert global_smoothness([client]) == pytest.approx(client.smoothness, rel=1e-8)

    def test_two_identical_clients(self, rng):
        client = random_client(rng, "linreg_ncvx", lam=0.2)
        twin = ClientProblem(client.kind, client.data, client.lam)
        assert global_smoothness([client, twin]) == pytest.approx(client.smoothness, rel=1e-8)

    def test_identity_and_double_identity(self):
        d = 4
        c1 = ClientProblem("linreg_l2", Dataset(np.eye(d), np.zeros(d)), lam=0.0)
        c2 = ClientProblem("linreg_l2", Dataset(2.0 * np.eye(d), np.zeros(d)), lam=0.0)
        assert global_smoothness([c1, c2]) == pytest.approx(5.0 / d, rel=1e-8)

    def test_never_exceeds_arithmetic_mean(self, rng):
        for kind in KINDS:
            clients = [random_client(rng, kind, lam=0.3) for _ in range(5)]
            l_am = np.mean([c.smoothness for c in clients])
            assert global_smoothness(clients) <= l_am * (1.0 + 1e-9)


class TestMakeGlobalProblem:
    def test_nonneg_kinds_lower_bound_zero(self, rng):
        for kind in ("linreg_ncvx", "logreg_ncvx"):
            problem = make_global_problem([random_client(rng, kind) for _ in range(3)])
            assert problem.f_lower == 0.0
            assert problem.pl_mu is None
            for _ in range(10_000):
                assert problem.value(rng.standard_normal(problem.d) * 5.0) >= 0.0

    def test_ridge_exact_minimum_and_pl(self, rng):
        clients = [random_client(rng, "linreg_l2", lam=0.5) for _ in range(3)]
        problem = make_global_problem(clients)
        assert problem.pl_mu is not None and problem.pl_mu > 0.0
        # No probe beats the analytic minimum, and random descent from the
        # optimum gains nothing.
        for _ in range(200):
            x = rng.standard_normal(problem.d) * 4.0
            assert problem.value(x) >= problem.f_lower - 1e-12

    def test_batch_matches_per_client(self, rng):
        problem = make_global_problem(
            [random_client(rng, "logreg_ncvx", lam=0.2) for _ in range(4)]
        )
        x = rng.standard_normal(problem.d)
        vals = problem.batch_values(x)
        grads = problem.batch_gradients(x)
        for i, client in enumerate(problem.clients):
            assert vals[i] == pytest.approx(value(client, x), rel=1e-12)
            assert grads[i] == pytest.approx(gradient(client, x), rel=1e-12, abs=1e-15)

    def test_batch_heterogeneous_shapes_fallback(self, rng):
        clients = [
            random_client(rng, "linreg_l2", m=5, lam=0.1),
            random_client(rng, "linreg_l2", m=9, lam=0.1),
        ]
        problem = make_global_problem(clients)
        x = rng.standard_normal(problem.d)
        assert problem.value(x) == pytest.approx(
            0.5 * (value(clients[0], x) + value(clients[1], x))
        )


class TestStochasticGradient:
    def test_full_pass_is_exact(self, rng):
        client = random_client(rng, "logreg_ncvx", lam=0.3)
        spec = StochasticEstimatorSpec(tau=3, full_pass=True)
        x = rng.standard_normal(client.d)
        assert np.array_equal(stochastic_gradient(client, x, spec, rng), gradient(client, x))

    def test_single_row_dataset_exact(self, rng):
        a = rng.standard_normal((1, 4))
        client = ClientProblem("linreg_ncvx", Dataset(a, rng.standard_normal(1)), lam=0.2)
        x = rng.standard_normal(4)
        for tau in (1, 5):
            got = stochastic_gradient(client, x, StochasticEstimatorSpec(tau=tau), rng)
            assert got == pytest.approx(gradient(client, x), rel=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    def test_unbiased_monte_carlo(self, kind):
        rng = np.random.default_rng(11)
        client = random_client(rng, kind, d=4, m=9, lam=0.25)
        x = rng.standard_normal(4)
        exact = gradient(client, x)
        spec = StochasticEstimatorSpec(tau=2)
        draws = np.stack([stochastic_gradient(client, x, spec, rng) for _ in range(10_000)])
        se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - exact) <= 4.0 * se)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            StochasticEstimatorSpec(tau=0)
        with pytest.raises(DomainError):
            StochasticEstimatorSpec(tau=1, b=np.array([0.5]))


class TestSparsityPattern:
    def test_dense_problem_full_supports(self, rng):
        problem = make_global_problem(
            [random_client(rng, "linreg_l2", lam=0.0) for _ in range(3)]
        )
        pattern = sparsity_pattern(problem)
        assert np.all(pattern.mask)

    def test_disjoint_supports(self):
        problem = disjoint_support_problem(0, n=3, per=2)
        pattern = sparsity_pattern(problem)
        assert np.array_equal(pattern.support(0), [0, 1])
        assert np.array_equal(pattern.support(2), [4, 5])
        assert np.array_equal(pattern.clients_for(0), [0])

    def test_shared_coordinate(self, rng):
        n, d = 4, 3
        clients = []
        for _ in range(n):
            features = np.zeros((2, d))
            features[:, 0] = rng.standard_normal(2)  # coordinate 0 shared by all
            clients.append(ClientProblem("linreg_l2", Dataset(features, np.zeros(2)), lam=0.0))
        pattern = sparsity_pattern(make_global_problem(clients))
        assert pattern.clients_for(0).size == n

    def test_rejects_regularized_clients(self, rng):
        problem = make_global_problem([random_client(rng, "linreg_l2", lam=0.1)])
        with pytest.raises(DomainError, match="rare-features"):
            sparsity_pattern(problem)

    def test_restricted_smoothness_inequality(self):
        # Gradient differences restricted to a client's support are bounded
        # by L_i times the x-difference restricted to the same support.
        problem = disjoint_support_problem(3)
        pattern = sparsity_pattern(problem)
        rng = np.random.default_rng(5)
        for _ in range(300):
            x = rng.standard_normal(problem.d) * 2.0
            y = rng.standard_normal(problem.d) * 2.0
            for i, client in enumerate(problem.clients):
                mask = pattern.mask[i]
                diff = gradient(client, x) - gradient(client, y)
                lhs = float(np.sum(diff[mask] ** 2))
                rhs = client.smoothness**2 * float(np.sum((x - y)[mask] ** 2))
                assert lhs <= rhs * (1.0 + 1e-9)
