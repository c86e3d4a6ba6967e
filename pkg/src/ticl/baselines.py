"""Linear regression baselines the contrastive model is compared against.

Two flavours. The scalar regressor maps features straight to minute-of-day
and inherits the classic failure on circular targets: samples on opposite
sides of midnight pull it toward the middle of the day. The cyclic
regressor predicts (cos theta, sin theta) instead and decodes with atan2,
which removes the wraparound artifact but stays linear in the features.

Both are ordinary least squares with a tiny ridge term (1e-8) for
conditioning, solved in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timecore import MINUTES_PER_DAY, ClockTime, Dataset
from .encoders import cyclic_decode, cyclic_encode

RIDGE = 1e-8


@dataclass(frozen=True)
class ScalarRegressor:
    weights: np.ndarray  # (dim,)
    bias: float


@dataclass(frozen=True)
class CyclicRegressor:
    weights: np.ndarray  # (dim, 2) columns are cos, sin
    bias: np.ndarray  # (2,)


def _ridge_solve(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Solve min ||A beta - y||^2 + RIDGE ||beta||^2 with A = [X, 1]."""
    n = features.shape[0]
    if n == 0:
        raise ValueError("cannot fit a regressor on an empty dataset")
    design = np.concatenate([features, np.ones((n, 1))], axis=1)
    gram = design.T @ design + RIDGE * np.eye(design.shape[1])
    return np.linalg.solve(gram, design.T @ targets)


def fit_scalar(dataset: Dataset) -> ScalarRegressor:
    beta = _ridge_solve(dataset.feature_matrix(), dataset.minutes().astype(np.float64))
    return ScalarRegressor(weights=beta[:-1], bias=float(beta[-1]))


def fit_cyclic(dataset: Dataset) -> CyclicRegressor:
    if not dataset.records:
        raise ValueError("cannot fit a regressor on an empty dataset")
    encoded = np.stack([cyclic_encode(r.time) for r in dataset.records], axis=0)
    beta = _ridge_solve(dataset.feature_matrix(), encoded)
    return CyclicRegressor(weights=beta[:-1], bias=beta[-1])


def predict_minutes(regressor, features: np.ndarray) -> float:
    """Raw minute estimate before rounding to the clock grid."""
    features = np.asarray(features, dtype=np.float64)
    if isinstance(regressor, ScalarRegressor):
        return float(features @ regressor.weights + regressor.bias) % MINUTES_PER_DAY
    if isinstance(regressor, CyclicRegressor):
        cs = features @ regressor.weights + regressor.bias
        return float(cyclic_decode(cs[0], cs[1]).minute_of_day)
    raise TypeError(f"unknown regressor type {type(regressor).__name__}")


def predict(regressor, features: np.ndarray) -> ClockTime:
    return ClockTime(int(round(predict_minutes(regressor, features))) % MINUTES_PER_DAY)


def predict_all(regressor, dataset: Dataset) -> np.ndarray:
    """Minute predictions for every record, as float64."""
    return np.array(
        [predict_minutes(regressor, r.features) for r in dataset.records], dtype=np.float64
    )
