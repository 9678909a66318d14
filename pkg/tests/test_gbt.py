import numpy as np
import pytest

from mergemix.errors import MergeMixError
from mergemix.gbt import BoostHyper, GradientBoostedRegressor, fit_tree
from mergemix.stats import spearman


class TestRegressionTree:
    def test_single_split_recovers_step_function(self):
        x = np.linspace(0, 1, 20).reshape(-1, 1)
        y = (x[:, 0] > 0.5).astype(float)
        tree = fit_tree(x, y, max_depth=1, min_leaf=2)
        np.testing.assert_allclose(tree.predict(x), y, atol=1e-12)

    def test_respects_min_leaf(self):
        x = np.arange(6, dtype=float).reshape(-1, 1)
        y = np.array([0.0, 0, 0, 1, 1, 1])
        tree = fit_tree(x, y, max_depth=3, min_leaf=3)
        # only the balanced 3/3 split is admissible
        assert (tree.features >= 0).sum() == 1

    def test_json_round_trip(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(size=(30, 3))
        y = rng.standard_normal(30)
        tree = fit_tree(x, y, max_depth=3, min_leaf=2)
        clone = type(tree).from_dict(tree.to_dict())
        np.testing.assert_array_equal(tree.predict(x), clone.predict(x))


class TestBoostedEnsemble:
    def test_constant_target_predicts_constant(self):
        x = np.random.default_rng(1).uniform(size=(10, 2))
        y = np.full(10, 0.37)
        model = GradientBoostedRegressor(BoostHyper()).fit(x, y)
        np.testing.assert_array_equal(model.predict(x), y)
        assert len(model.trees) == 0  # nothing left to boost

    def test_linear_surface_rank_order(self):
        """Fit y = x on 5 points. With min_leaf=2 the outer point pairs can
        never be separated, and thresholds only sit at training midpoints,
        so some grid predictions tie; rank order must still be free of
        inversions and the rank correlation against truth stays high."""
        train_x = np.array([[0.0], [0.25], [0.5], [0.75], [1.0]])
        train_y = train_x[:, 0]
        model = GradientBoostedRegressor(BoostHyper()).fit(train_x, train_y)

        grid = np.arange(0.0, 1.0001, 0.1).reshape(-1, 1)
        predicted = model.predict(grid)
        assert np.all(np.diff(predicted) >= 0)  # no rank inversions
        report = spearman(predicted.tolist(), grid[:, 0].tolist())
        assert report.rho == pytest.approx(0.9438798074485389, abs=1e-12)
        assert report.rho >= 0.9

    def test_deterministic_fit(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(size=(40, 4))
        y = rng.standard_normal(40)
        a = GradientBoostedRegressor(BoostHyper()).fit(x, y)
        b = GradientBoostedRegressor(BoostHyper()).fit(x, y)
        grid = rng.uniform(size=(100, 4))
        np.testing.assert_array_equal(a.predict(grid), b.predict(grid))

    def test_json_round_trip_bit_exact(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(size=(25, 2))
        y = np.sin(x[:, 0] * 3) + x[:, 1]
        model = GradientBoostedRegressor(BoostHyper(n_trees=50)).fit(x, y)
        clone = GradientBoostedRegressor.from_dict(model.to_dict())
        grid = rng.uniform(size=(64, 2))
        np.testing.assert_array_equal(model.predict(grid), clone.predict(grid))

    def test_fits_smooth_function_well(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(size=(80, 1))
        y = 1.0 - (x[:, 0] - 0.3) ** 2
        model = GradientBoostedRegressor(BoostHyper()).fit(x, y)
        pred = model.predict(x)
        assert float(np.max(np.abs(pred - y))) < 0.05

    def test_hyper_validation(self):
        with pytest.raises(MergeMixError):
            BoostHyper(n_trees=0)
        with pytest.raises(MergeMixError):
            BoostHyper(learning_rate=0.0)
