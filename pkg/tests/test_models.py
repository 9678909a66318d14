import numpy as np
import pytest

from mergemix.errors import DimensionError, NumericError
from mergemix.models import Quadratic, ToyNet, hvp_finite_difference


@pytest.fixture(scope="module")
def small_net_problem():
    """A 26-parameter net with a fixed dataset, small enough to assemble
    its full Hessian by finite differences."""
    net = ToyNet(3, 4, 2)
    rng = np.random.default_rng(12)
    theta = net.init_params(rng)
    x = rng.standard_normal((16, 3))
    y = rng.standard_normal((16, 2))
    return net, theta, x, y


class TestQuadratic:
    def test_loss_at_minimizer(self):
        q = Quadratic(np.array([1.0, 0.0]), np.eye(2))
        assert q.loss(np.array([1.0, 0.0])) == 0.0

    def test_loss_hand_value(self):
        q = Quadratic(np.array([1.0, 0.0]), np.eye(2))
        assert q.loss(np.zeros(2)) == pytest.approx(0.5, abs=1e-15)

    def test_grad_hand_value(self):
        q = Quadratic(np.array([1.0, 0.0]), np.eye(2))
        np.testing.assert_array_equal(q.grad(np.zeros(2)), [-1.0, 0.0])

    def test_grad_zero_at_minimizer(self):
        q = Quadratic(np.array([0.3, -0.7]), np.diag([2.0, 1.0]))
        np.testing.assert_array_equal(q.grad(np.array([0.3, -0.7])), [0.0, 0.0])

    def test_grad_linear_in_theta(self):
        q = Quadratic(np.array([1.0, 2.0]), np.diag([2.0, 1.0]))
        rng = np.random.default_rng(5)
        t1, t2 = rng.standard_normal(2), rng.standard_normal(2)
        a = 0.3
        lhs = q.grad(a * t1 + (1 - a) * t2)
        rhs = a * q.grad(t1) + (1 - a) * q.grad(t2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    def test_hvp_analytic(self):
        q = Quadratic(np.zeros(2), np.diag([2.0, 1.0]))
        np.testing.assert_array_equal(q.hvp(np.array([1.0, 1.0])), [2.0, 1.0])

    def test_hvp_zero_direction(self):
        q = Quadratic(np.zeros(2), np.diag([2.0, 1.0]))
        np.testing.assert_array_equal(q.hvp(np.zeros(2)), [0.0, 0.0])

    def test_rejects_indefinite_curvature(self):
        with pytest.raises(NumericError):
            Quadratic(np.zeros(2), np.diag([1.0, -1.0]))

    def test_rejects_asymmetric_curvature(self):
        with pytest.raises(NumericError):
            Quadratic(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            Quadratic(np.zeros(3), np.eye(2))


class TestToyNet:
    def test_param_count(self):
        assert ToyNet(3, 4, 2).num_params == 4 * 3 + 4 + 2 * 4 + 2

    def test_zero_weights_zero_targets(self):
        net = ToyNet(2, 3, 1)
        theta = np.zeros(net.num_params)
        x = np.random.default_rng(0).standard_normal((8, 2))
        assert net.loss(theta, x, np.zeros((8, 1))) == 0.0

    def test_empty_dataset_rejected(self):
        net = ToyNet(2, 3, 1)
        with pytest.raises(DimensionError):
            net.loss(np.zeros(net.num_params), np.zeros((0, 2)), np.zeros((0, 1)))

    def test_grad_matches_central_differences(self, small_net_problem):
        net, theta, x, y = small_net_problem
        grad = net.grad(theta, x, y)
        eps = 1e-6
        for i in range(net.num_params):
            e = np.zeros(net.num_params)
            e[i] = eps
            fd = (net.loss(theta + e, x, y) - net.loss(theta - e, x, y)) / (2 * eps)
            assert abs(grad[i] - fd) <= 1e-4 * max(1.0, abs(fd)), f"coordinate {i}"

    def test_hessian_symmetry_via_hvp_columns(self, small_net_problem):
        net, theta, x, y = small_net_problem
        grad_fn = lambda t: net.grad(t, x, y)
        p = net.num_params
        hess = np.empty((p, p))
        for i in range(p):
            e = np.zeros(p)
            e[i] = 1.0
            hess[:, i] = hvp_finite_difference(grad_fn, theta, e)
        asym = np.max(np.abs(hess - hess.T))
        scale = max(1.0, np.max(np.abs(hess)))
        assert asym / scale <= 1e-3

    def test_hvp_linearity(self, small_net_problem):
        net, theta, x, y = small_net_problem
        grad_fn = lambda t: net.grad(t, x, y)
        rng = np.random.default_rng(8)
        v1, v2 = rng.standard_normal(26), rng.standard_normal(26)
        a, b = 0.6, -1.3
        lhs = hvp_finite_difference(grad_fn, theta, a * v1 + b * v2, step=1e-5)
        rhs = (a * hvp_finite_difference(grad_fn, theta, v1, step=1e-5)
               + b * hvp_finite_difference(grad_fn, theta, v2, step=1e-5))
        np.testing.assert_allclose(lhs, rhs, atol=1e-3)

    def test_hvp_quadratic_exact_linearity(self):
        q = Quadratic(np.zeros(3), np.diag([1.0, 2.0, 3.0]))
        rng = np.random.default_rng(1)
        v1, v2 = rng.standard_normal(3), rng.standard_normal(3)
        lhs = q.hvp(0.5 * v1 + 2.0 * v2)
        rhs = 0.5 * q.hvp(v1) + 2.0 * q.hvp(v2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-6)

    def test_fd_step_validation(self, small_net_problem):
        net, theta, x, y = small_net_problem
        with pytest.raises(NumericError):
            hvp_finite_difference(lambda t: net.grad(t, x, y), theta,
                                  np.ones(26), step=-1.0)
