"""Bundled sample data."""

from importlib import resources

import numpy as np


def standardize(X):
    """Zero-mean, unit-variance columns."""
    X = np.asarray(X, dtype=np.float64)
    return (X - X.mean(axis=0)) / X.std(axis=0)


def load_iris_2class(standardized: bool = False):
    """Setosa vs. versicolor, sepal length and width (100 samples).

    Returns ``(X, labels)`` with ``X`` of shape (100, 2) and integer labels
    0/1. The linear model has no intercept, so regret maps are usually drawn
    on standardized features.
    """
    with resources.files("pnml_ood").joinpath("data/iris_2class.csv").open() as fh:
        raw = np.loadtxt(fh, delimiter=",", comments="#")
    X = raw[:, :2]
    if standardized:
        X = standardize(X)
    return X, raw[:, 2].astype(np.int64)
