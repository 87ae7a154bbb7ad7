"""Gradient-boosted regression trees with tree-level dropout (DART).

One trainer covers MART (with shrinkage), DART and random forest for
regression, binary classification and LambdaMART ranking.
"""

__version__ = "0.1.0"

from .data import Dataset, QueryGroups, load_csv, load_svmlight, save_svmlight, subsample_rows  # noqa: E402
from .ensemble import Ensemble, load, save  # noqa: E402
from .loss import LambdaRank, Logistic, Squared, loss_value, negative_gradient  # noqa: E402
from .trainer import EPSILON, Mode, TrainerConfig, train  # noqa: E402
from .tree import RegressionTree, TreeLearnConfig, fit_tree  # noqa: E402

__all__ = [
    "Dataset", "QueryGroups", "load_csv", "load_svmlight", "save_svmlight", "subsample_rows",
    "Ensemble", "load", "save",
    "Squared", "Logistic", "LambdaRank", "loss_value", "negative_gradient",
    "EPSILON", "Mode", "TrainerConfig", "train",
    "RegressionTree", "TreeLearnConfig", "fit_tree",
]
