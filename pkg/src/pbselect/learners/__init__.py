"""Native classifier families: random forest, gradient boosting, KNN."""

from .boosting import GradientBoostingModel, SingleClassError, fit_gradient_boosting, softmax
from .forest import ForestModel, fit_random_forest, tree_rng
from .knn import KnnModel, fit_knn
from .model_io import (
    FAMILIES,
    GB,
    KNN,
    RF,
    SchemaMismatchError,
    TrainedModel,
    mdi_importance,
)
from .train import DEFAULT_HYPERPARAMS, hyperparams_for, train_model
from .tree import (
    ClassificationTree,
    RegressionTree,
    gini_impurity,
    grow_classification_tree,
    grow_regression_tree,
)
from .weights import INVERSE_FREQUENCY, MODES, UNIFORM, class_weights

__all__ = [
    "ClassificationTree",
    "DEFAULT_HYPERPARAMS",
    "FAMILIES",
    "ForestModel",
    "GB",
    "GradientBoostingModel",
    "INVERSE_FREQUENCY",
    "KNN",
    "KnnModel",
    "MODES",
    "RF",
    "RegressionTree",
    "SchemaMismatchError",
    "SingleClassError",
    "TrainedModel",
    "UNIFORM",
    "class_weights",
    "fit_gradient_boosting",
    "fit_knn",
    "fit_random_forest",
    "gini_impurity",
    "grow_classification_tree",
    "grow_regression_tree",
    "hyperparams_for",
    "mdi_importance",
    "softmax",
    "train_model",
    "tree_rng",
]
