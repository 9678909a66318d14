import numpy as np
import pytest

from mergemix.errors import DegenerateInputError
from mergemix.simplex import dirichlet_points
from mergemix.theory import (
    TaylorContext,
    discrepancy,
    horizon_scaling_check,
    predict_merge_params,
    predict_mixture_params,
    relative_curvature,
    task_vector_cosines,
)
from mergemix.worlds import fixture_qw2, fixture_qw4


@pytest.fixture(scope="module")
def ctx_qw2():
    world = fixture_qw2()
    return TaylorContext.from_world(world, world.base_params(), 0.1)


class TestPredictions:
    def test_mixture_hand_value(self, ctx_qw2):
        out = predict_mixture_params(ctx_qw2, [0.5, 0.5])
        np.testing.assert_allclose(out, [0.04625, 0.0475], atol=1e-15)

    def test_merge_hand_value(self, ctx_qw2):
        out = predict_merge_params(ctx_qw2, [0.5, 0.5])
        np.testing.assert_allclose(out, [0.0475, 0.0475], atol=1e-15)

    def test_single_domain_hand_value(self):
        """One domain, unit curvature: the quadratic term pulls the
        first-order point back toward the start."""
        from mergemix.models import Quadratic
        from mergemix.worlds import QuadraticWorld

        world = QuadraticWorld(["only"], [Quadratic(np.array([1.0, 0.0]),
                                                    np.eye(2))])
        ctx = TaylorContext.from_world(world, world.base_params(), 0.1)
        out = predict_mixture_params(ctx, [1.0])
        np.testing.assert_allclose(out, [0.095, 0.0], atol=1e-15)

    def test_one_hot_mixture_equals_merge(self, ctx_qw2):
        for lam in ([1.0, 0.0], [0.0, 1.0]):
            np.testing.assert_array_equal(
                predict_mixture_params(ctx_qw2, lam),
                predict_merge_params(ctx_qw2, lam))

    def test_zero_horizon_limit(self):
        world = fixture_qw2()
        for h in (1e-6, 1e-9):
            ctx = TaylorContext.from_world(world, world.base_params(), h)
            np.testing.assert_allclose(
                predict_mixture_params(ctx, [0.5, 0.5]), [0.0, 0.0], atol=2 * h)

    def test_first_order_terms_coincide(self):
        """With Hessian access zeroed out, both predictions are identical
        for every mixture."""
        world = fixture_qw2()
        grads = tuple(world.grad(k, world.base_params()) for k in range(2))
        zero = lambda v: np.zeros_like(v)
        ctx = TaylorContext(world.base_params(), grads, (zero, zero), 0.3)
        rng = np.random.default_rng(0)
        for lam in dirichlet_points(2, 20, rng):
            np.testing.assert_array_equal(
                predict_mixture_params(ctx, lam),
                predict_merge_params(ctx, lam))

    def test_identical_domains_agree(self):
        from mergemix.models import Quadratic
        from mergemix.worlds import QuadraticWorld

        q = Quadratic(np.array([0.5, -0.5]), np.diag([1.2, 0.7]))
        world = QuadraticWorld(["a", "b"], [q, q])
        ctx = TaylorContext.from_world(world, world.base_params(), 0.2)
        for lam in ([0.3, 0.7], [0.8, 0.2]):
            np.testing.assert_allclose(
                predict_mixture_params(ctx, lam),
                predict_merge_params(ctx, lam), atol=1e-15)


class TestDiscrepancy:
    def test_hand_value(self, ctx_qw2):
        report = discrepancy(ctx_qw2, [0.5, 0.5])
        np.testing.assert_allclose(report.delta, [-0.00125, 0.0], atol=1e-15)
        np.testing.assert_allclose(report.cross_interference,
                                   [-0.0025, -0.00125], atol=1e-15)
        np.testing.assert_allclose(report.self_scaling,
                                   [0.00125, 0.00125], atol=1e-15)

    def test_components_sum_exactly(self, ctx_qw2):
        report = discrepancy(ctx_qw2, [0.3, 0.7])
        np.testing.assert_array_equal(
            report.delta, report.cross_interference + report.self_scaling)

    def test_one_hot_exactly_zero(self, ctx_qw2):
        for lam in ([1.0, 0.0], [0.0, 1.0]):
            report = discrepancy(ctx_qw2, lam)
            assert np.array_equal(report.delta, np.zeros(2))

    def test_identical_domains_zero(self):
        from mergemix.models import Quadratic
        from mergemix.worlds import QuadraticWorld

        q = Quadratic(np.array([1.0, 1.0]), np.eye(2))
        world = QuadraticWorld(["a", "b", "c"], [q, q, q])
        ctx = TaylorContext.from_world(world, world.base_params(), 0.15)
        report = discrepancy(ctx, [0.2, 0.3, 0.5])
        np.testing.assert_allclose(report.delta, [0.0, 0.0], atol=1e-15)

    def test_identity_on_random_draws_qw2_qw4(self):
        """delta == predict_mixture - predict_merge to 1e-12 per coordinate
        over 100 random contexts and mixtures."""
        rng = np.random.default_rng(123)
        for world in (fixture_qw2(), fixture_qw4()):
            k = world.num_domains
            for _ in range(50):
                theta0 = rng.standard_normal(world.dim) * 0.5
                horizon = float(rng.uniform(0.01, 0.5))
                ctx = TaylorContext.from_world(world, theta0, horizon)
                lam = dirichlet_points(k, 1, rng)[0]
                gap = (predict_mixture_params(ctx, lam)
                       - predict_merge_params(ctx, lam))
                delta = discrepancy(ctx, lam).delta
                np.testing.assert_allclose(gap, delta, atol=1e-12)

    def test_observation_attachment(self, ctx_qw2):
        report = discrepancy(ctx_qw2, [0.5, 0.5])
        observed = report.delta + 1e-5
        attached = report.with_observation(observed)
        assert attached.residual_norm == pytest.approx(1e-5 * np.sqrt(2),
                                                       rel=1e-6)


class TestHorizonScaling:
    def test_identical_domains_zero_gap(self):
        from mergemix.models import Quadratic
        from mergemix.worlds import QuadraticWorld

        q = Quadratic(np.array([1.0, 0.0]), np.eye(2))
        world = QuadraticWorld(["a", "b"], [q, q])
        report = horizon_scaling_check(world, [0.5, 0.5], 0.004, 50)
        assert report["gap_norm_full"] == pytest.approx(0.0, abs=1e-14)

    def test_qw2_scaling_bands(self):
        world = fixture_qw2()
        report = horizon_scaling_check(world, [0.5, 0.5], 0.004, 50)
        assert 3.2 <= report["gap_ratio"] <= 4.8
        assert 6.0 <= report["residual_ratio"] <= 10.0


class TestCurvatureMatrix:
    def test_qw2_analytic_values(self, qw2):
        mat = relative_curvature(qw2, qw2.base_params())
        np.testing.assert_allclose(mat.values, [[1.0, 1.0], [2.0, 1.0]],
                                   atol=1e-10)
        assert mat.row_dominant == (True, False)

    def test_diagonal_exactly_one(self, qw4):
        mat = relative_curvature(qw4, qw4.base_params())
        assert all(mat.values[i, i] == 1.0 for i in range(4))

    def test_shared_isotropic_curvature_all_ones(self):
        """One shared curvature gives all-ones entries when it responds
        equally along every gradient direction (isotropic); for anisotropic
        shared curvature the normalized responses differ by direction."""
        from mergemix.models import Quadratic
        from mergemix.worlds import QuadraticWorld

        a = 2.0 * np.eye(2)
        world = QuadraticWorld(
            ["a", "b"],
            [Quadratic(np.array([1.0, 0.0]), a),
             Quadratic(np.array([0.0, 1.0]), a)],
        )
        mat = relative_curvature(world, world.base_params())
        np.testing.assert_allclose(mat.values, np.ones((2, 2)), atol=1e-12)

    def test_zero_gradient_rejected(self, qw2):
        with pytest.raises(DegenerateInputError):
            relative_curvature(qw2, qw2.quadratics[0].minimizer)

    def test_toy_net_fd_matches_assembled_hessian(self, toy_world):
        """Finite-difference curvature matrix agrees with one computed from
        fully assembled Hessians on a small net."""
        from mergemix.models import hvp_finite_difference

        theta0 = toy_world.base_params()
        k, p = toy_world.num_domains, toy_world.dim
        fd = relative_curvature(toy_world, theta0)
        hessians = []
        for d in range(k):
            grad_fn = lambda t, d=d: toy_world.grad(d, t)
            h = np.empty((p, p))
            for i in range(p):
                e = np.zeros(p)
                e[i] = 1.0
                h[:, i] = hvp_finite_difference(grad_fn, theta0, e, step=1e-5)
            hessians.append(0.5 * (h + h.T))
        grads = [toy_world.grad(d, theta0) for d in range(k)]
        expected = np.empty((k, k))
        for a in range(k):
            for b in range(k):
                expected[a, b] = (np.linalg.norm(hessians[a] @ grads[b])
                                  / np.linalg.norm(grads[b]))
            expected[a] /= expected[a, a]
        np.testing.assert_allclose(fd.values, expected, atol=1e-3)


class TestTaskVectorCosines:
    def test_diagonal_is_one(self, qw2_experts, qw2):
        cos = task_vector_cosines(qw2_experts, qw2.base_params())
        assert cos[0, 0] == 1.0 and cos[1, 1] == 1.0

    def test_orthogonal_task_vectors(self):
        class Artifact:
            def __init__(self, name, final):
                self.name = name
                self.final = final

        base = np.zeros(2)
        arts = [Artifact("a", np.array([1.0, 0.0])),
                Artifact("b", np.array([0.0, 1.0]))]
        cos = task_vector_cosines(arts, base)
        assert cos[0, 1] == 0.0 and cos[1, 0] == 0.0

    def test_qw2_experts_nearly_orthogonal(self, qw2_experts, qw2):
        cos = task_vector_cosines(qw2_experts, qw2.base_params())
        assert abs(cos[0, 1]) < 0.3

    def test_symmetric(self, qw4_experts, qw4):
        cos = task_vector_cosines(qw4_experts, qw4.base_params())
        np.testing.assert_array_equal(cos, cos.T)

    def test_zero_task_vector_rejected(self, qw2, qw2_experts):
        class Artifact:
            name = "stuck"
            final = qw2.base_params()

        with pytest.raises(DegenerateInputError):
            task_vector_cosines([qw2_experts[0], Artifact()], qw2.base_params())
