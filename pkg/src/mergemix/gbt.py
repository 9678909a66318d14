"""Deterministic gradient-boosted regression trees.

Small-sample least-squares boosting: axis-aligned splits chosen by exact
SSE reduction, candidate thresholds at midpoints of consecutive sorted
values, features scanned in fixed order with strict improvement so ties
resolve the same way on every run. No row or feature subsampling, hence no
randomness anywhere in fit or predict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, MergeMixError


@dataclass
class RegressionTree:
    """Flat-array binary tree; features[i] == -1 marks a leaf."""

    features: np.ndarray
    thresholds: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    values: np.ndarray
    max_depth: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        node = np.zeros(n, dtype=np.int64)
        for _ in range(self.max_depth + 1):
            feat = self.features[node]
            internal = feat >= 0
            if not internal.any():
                break
            col = np.where(internal, feat, 0)
            go_left = x[np.arange(n), col] <= self.thresholds[node]
            node = np.where(internal,
                            np.where(go_left, self.lefts[node], self.rights[node]),
                            node)
        return self.values[node]

    def to_dict(self) -> dict:
        return {
            "features": self.features.tolist(),
            "thresholds": self.thresholds.tolist(),
            "lefts": self.lefts.tolist(),
            "rights": self.rights.tolist(),
            "values": self.values.tolist(),
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionTree":
        return cls(
            features=np.asarray(data["features"], dtype=np.int64),
            thresholds=np.asarray(data["thresholds"], dtype=np.float64),
            lefts=np.asarray(data["lefts"], dtype=np.int64),
            rights=np.asarray(data["rights"], dtype=np.int64),
            values=np.asarray(data["values"], dtype=np.float64),
            max_depth=int(data["max_depth"]),
        )


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Exact SSE-minimizing (feature, threshold), or None if nothing helps.

    Features are scanned in index order and only strictly better gains win,
    so ties always resolve to the first feature and the first threshold.
    """
    n = y.shape[0]
    total = float(y.sum())
    total_sq = float((y * y).sum())
    parent_sse = total_sq - total * total / n
    best = None
    best_gain = 0.0
    for f in range(x.shape[1]):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        csum = np.cumsum(ys)
        csum_sq = np.cumsum(ys * ys)
        # Candidate split sizes i (left-leaf count), smallest first.
        i = np.arange(min_leaf, n - min_leaf + 1)
        separable = xs[i - 1] != xs[i]  # equal values admit no threshold
        i = i[separable]
        if i.size == 0:
            continue
        left_sum = csum[i - 1]
        left_sse = csum_sq[i - 1] - left_sum * left_sum / i
        right_sum = total - left_sum
        right_sse = (total_sq - csum_sq[i - 1]) - right_sum * right_sum / (n - i)
        gains = parent_sse - left_sse - right_sse
        pos = int(np.argmax(gains))  # first maximum: earliest threshold
        if gains[pos] > best_gain:
            best_gain = float(gains[pos])
            split_at = int(i[pos])
            best = (f, 0.5 * (xs[split_at - 1] + xs[split_at]))
    return best


def _grow(x: np.ndarray, y: np.ndarray, depth: int, max_depth: int,
          min_leaf: int, nodes: dict) -> int:
    index = len(nodes["features"])
    for key in nodes:
        nodes[key].append(None)
    split = None
    if depth < max_depth and y.shape[0] >= 2 * min_leaf:
        split = _best_split(x, y, min_leaf)
    if split is None:
        nodes["features"][index] = -1
        nodes["thresholds"][index] = 0.0
        nodes["lefts"][index] = -1
        nodes["rights"][index] = -1
        nodes["values"][index] = float(y.mean())
        return index
    f, thr = split
    mask = x[:, f] <= thr
    left = _grow(x[mask], y[mask], depth + 1, max_depth, min_leaf, nodes)
    right = _grow(x[~mask], y[~mask], depth + 1, max_depth, min_leaf, nodes)
    nodes["features"][index] = f
    nodes["thresholds"][index] = float(thr)
    nodes["lefts"][index] = left
    nodes["rights"][index] = right
    nodes["values"][index] = float(y.mean())
    return index


def fit_tree(x: np.ndarray, y: np.ndarray, max_depth: int,
             min_leaf: int) -> RegressionTree:
    nodes = {"features": [], "thresholds": [], "lefts": [], "rights": [],
             "values": []}
    _grow(x, y, 0, max_depth, min_leaf, nodes)
    return RegressionTree(
        features=np.asarray(nodes["features"], dtype=np.int64),
        thresholds=np.asarray(nodes["thresholds"], dtype=np.float64),
        lefts=np.asarray(nodes["lefts"], dtype=np.int64),
        rights=np.asarray(nodes["rights"], dtype=np.int64),
        values=np.asarray(nodes["values"], dtype=np.float64),
        max_depth=max_depth,
    )


@dataclass(frozen=True)
class BoostHyper:
    """Ensemble settings; the defaults are small-sample-sane."""

    n_trees: int = 200
    max_depth: int = 3
    learning_rate: float = 0.05
    min_leaf: int = 2

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise MergeMixError("tree count, depth and leaf size must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise MergeMixError("shrinkage must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_leaf": self.min_leaf,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoostHyper":
        return cls(**data)


@dataclass
class GradientBoostedRegressor:
    hyper: BoostHyper
    init_value: float = 0.0
    trees: list[RegressionTree] = field(default_factory=list)

    def fit(self, x: np.ndarray, y: np.ndarray) -> "GradientBoostedRegressor":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DimensionError(
                f"bad training shapes: x {x.shape}, y {y.shape}"
            )
        self.init_value = float(y.mean())
        self.trees = []
        current = np.full(y.shape[0], self.init_value)
        for _ in range(self.hyper.n_trees):
            residual = y - current
            if np.max(np.abs(residual)) == 0.0:
                break  # constant target fitted exactly; nothing left to boost
            tree = fit_tree(x, residual, self.hyper.max_depth, self.hyper.min_leaf)
            current = current + self.hyper.learning_rate * tree.predict(x)
            self.trees.append(tree)
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.full(x.shape[0], self.init_value)
        for tree in self.trees:
            out = out + self.hyper.learning_rate * tree.predict(x)
        return out

    def to_dict(self) -> dict:
        return {
            "hyper": self.hyper.to_dict(),
            "init_value": self.init_value,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GradientBoostedRegressor":
        model = cls(BoostHyper.from_dict(data["hyper"]),
                    init_value=float(data["init_value"]))
        model.trees = [RegressionTree.from_dict(t) for t in data["trees"]]
        return model
