"""k-nearest-neighbors classifier with per-feature standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KnnModel:
    X: np.ndarray  # stored standardized when standardize is set
    y: np.ndarray
    k: int
    n_classes: int
    mean: np.ndarray
    std: np.ndarray
    standardize: bool = True

    def _transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std if self.standardize else X

    def _vote(self, distances: np.ndarray) -> tuple[int, list[float]]:
        # stable sort keeps the earlier-indexed row on distance ties
        nearest = np.argsort(distances, kind="stable")[: self.k]
        counts = np.bincount(self.y[nearest], minlength=self.n_classes)
        votes = counts / self.k
        best = 0
        for c in range(1, self.n_classes):
            if votes[c] > votes[best]:
                best = c
        return best, votes.tolist()

    def predict_one(self, values) -> tuple[int, list[float]]:
        q = self._transform(np.asarray(values, dtype=np.float64))
        distances = np.sqrt(((self.X - q) ** 2).sum(axis=1))
        return self._vote(distances)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row)[0] for row in np.asarray(X, dtype=np.float64)])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row)[1] for row in np.asarray(X, dtype=np.float64)])

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "k": self.k,
            "n_classes": self.n_classes,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "standardize": self.standardize,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnnModel":
        return cls(
            X=np.array(data["X"], dtype=np.float64),
            y=np.array(data["y"], dtype=np.intp),
            k=data["k"],
            n_classes=data["n_classes"],
            mean=np.array(data["mean"]),
            std=np.array(data["std"]),
            standardize=data["standardize"],
        )


def fit_knn(
    X: np.ndarray, y: np.ndarray, k: int, n_classes: int, standardize: bool = True
) -> KnnModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if not 1 <= k <= len(X):
        raise ValueError(f"k={k} must be between 1 and the training size {len(X)}")
    if standardize:
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0.0] = 1.0  # constant features pass through unscaled
    else:
        mean = np.zeros(X.shape[1])
        std = np.ones(X.shape[1])
    stored = (X - mean) / std if standardize else X
    return KnnModel(
        X=stored, y=y, k=k, n_classes=n_classes, mean=mean, std=std, standardize=standardize
    )
