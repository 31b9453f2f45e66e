"""Multiclass gradient boosting with the softmax cross-entropy loss.

Scores start at the class log-priors.  Each stage fits one shallow
regression tree per class to that class's negative gradient (one-hot minus
softmax probability, scaled by the row weight); leaf values are a single
Newton step, and the learning rate scales every update.  The weighted
training loss after each stage is kept on the model so the expected
monotone decrease can be checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forest import tree_rng
from .tree import RegressionTree, grow_regression_tree

_PRIOR_FLOOR = 1e-12


class SingleClassError(ValueError):
    """Boosting needs at least two classes present in the training labels."""


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class GradientBoostingModel:
    init_scores: list[float]
    stages: list[list[RegressionTree]]  # one regression tree per class per stage
    n_features: int
    n_classes: int
    n_estimators: int
    learning_rate: float
    max_depth: int = 3
    max_features: str = "sqrt"
    seed: int = 0
    class_weight: list[float] = field(default_factory=list)
    train_losses: list[float] = field(default_factory=list, repr=False)

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        scores = np.tile(np.asarray(self.init_scores), (len(X), 1))
        for stage in self.stages:
            for c, tree in enumerate(stage):
                scores[:, c] += self.learning_rate * tree.predict_batch(X)
        return scores

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision_scores(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def predict_one(self, values) -> tuple[int, list[float]]:
        scores = list(self.init_scores)
        for stage in self.stages:
            for c, tree in enumerate(stage):
                scores[c] += self.learning_rate * tree.predict_one(values)
        m = max(scores)
        exps = [float(np.exp(s - m)) for s in scores]
        total = sum(exps)
        probs = [e / total for e in exps]
        best = 0
        for c in range(1, self.n_classes):
            if probs[c] > probs[best]:
                best = c
        return best, probs

    def raw_importances_per_tree(self) -> np.ndarray:
        return np.stack([t.raw_importances for stage in self.stages for t in stage])

    def to_dict(self) -> dict:
        return {
            "init_scores": self.init_scores,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "n_estimators": self.n_estimators,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "max_features": self.max_features,
            "seed": self.seed,
            "class_weight": self.class_weight,
            "stages": [[t.to_dict() for t in stage] for stage in self.stages],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GradientBoostingModel":
        stages = [
            [RegressionTree.from_dict(t, data["n_features"]) for t in stage]
            for stage in data["stages"]
        ]
        return cls(
            init_scores=list(data["init_scores"]),
            stages=stages,
            n_features=data["n_features"],
            n_classes=data["n_classes"],
            n_estimators=data["n_estimators"],
            learning_rate=data["learning_rate"],
            max_depth=data["max_depth"],
            max_features=data["max_features"],
            seed=data["seed"],
            class_weight=list(data["class_weight"]),
        )


def _weighted_cross_entropy(probs: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    p = np.clip(probs[np.arange(len(y)), y], 1e-15, None)
    return float((w * -np.log(p)).sum() / w.sum())


def fit_gradient_boosting(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_estimators: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    max_features: str = "sqrt",
    seed: int = 0,
    class_weight: np.ndarray | None = None,
) -> GradientBoostingModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if len(np.unique(y)) < 2:
        raise SingleClassError("gradient boosting needs at least two classes")
    if class_weight is None:
        class_weight = np.ones(n_classes)
    class_weight = np.asarray(class_weight, dtype=np.float64)
    w = class_weight[y]

    n = len(X)
    counts = np.bincount(y, weights=w, minlength=n_classes)
    priors = counts / counts.sum()
    init_scores = np.log(np.clip(priors, _PRIOR_FLOOR, None))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    scores = np.tile(init_scores, (n, 1))
    losses = [_weighted_cross_entropy(softmax(scores), y, w)]
    stages: list[list[RegressionTree]] = []
    newton_scale = (n_classes - 1) / n_classes
    for m in range(n_estimators):
        probs = softmax(scores)
        stage: list[RegressionTree] = []
        for c in range(n_classes):
            residual = onehot[:, c] - probs[:, c]
            rng = tree_rng(seed, m, c)
            tree, leaf_of = grow_regression_tree(
                X, residual, w, rng, max_depth=max_depth, max_features=max_features
            )
            # one Newton step per leaf
            values = np.zeros(len(tree.leaf_value))
            num = np.bincount(leaf_of, weights=w * residual, minlength=len(values))
            hess = np.abs(residual) * (1.0 - np.abs(residual))
            den = np.bincount(leaf_of, weights=w * hess, minlength=len(values))
            nz = den > 1e-150
            values[nz] = newton_scale * num[nz] / den[nz]
            tree.leaf_value = values.tolist()
            scores[:, c] += learning_rate * values[leaf_of]
            stage.append(tree)
        stages.append(stage)
        losses.append(_weighted_cross_entropy(softmax(scores), y, w))

    return GradientBoostingModel(
        init_scores=init_scores.tolist(),
        stages=stages,
        n_features=X.shape[1],
        n_classes=n_classes,
        n_estimators=n_estimators,
        learning_rate=learning_rate,
        max_depth=max_depth,
        max_features=max_features,
        seed=seed,
        class_weight=class_weight.tolist(),
        train_losses=losses,
    )
