"""Linear readout training and task metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ridge_solve


@dataclass
class ReadoutModel:
    """Linear map y = W_o @ h fitted by ridge regression (no intercept)."""

    w_o: np.ndarray
    lam: float

    @property
    def feature_dim(self) -> int:
        return self.w_o.shape[1]


def fit(features: np.ndarray, targets: np.ndarray, lam: float = 0.0) -> ReadoutModel:
    """Fit readout weights on (samples x features) against (samples x outputs)."""
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    w_o = ridge_solve(features, targets, lam)
    return ReadoutModel(w_o=w_o, lam=lam)


def predict(model: ReadoutModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[None, :]
    if features.shape[1] != model.feature_dim:
        raise ValueError(
            f"feature width {features.shape[1]} does not match readout ({model.feature_dim})"
        )
    return features @ model.w_o.T


def nrmse(pred: np.ndarray, target: np.ndarray, normalizer: str = "std") -> float:
    """Root mean squared error normalized by the target's spread.

    The default normalizer is the population standard deviation of the
    target; "rms" divides by the root mean square of the target (the
    benchmark-table convention, see harness) and "range" by max - min.
    Multivariate targets average the per-dimension score.
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    if pred.ndim == 1:
        pred = pred[:, None]
        target = target[:, None]
    if pred.shape[0] < 2:
        raise ValueError("need at least two samples")

    scores = []
    for d in range(target.shape[1]):
        t = target[:, d]
        if normalizer == "std":
            denom = float(np.std(t))
        elif normalizer == "rms":
            denom = float(np.sqrt(np.mean(t * t)))
        elif normalizer == "range":
            denom = float(np.max(t) - np.min(t))
        else:
            raise ValueError(f"unknown normalizer: {normalizer!r}")
        if denom == 0.0:
            raise ValueError("target is constant, normalization undefined")
        rmse = float(np.sqrt(np.mean((pred[:, d] - t) ** 2)))
        scores.append(rmse / denom)
    return float(np.mean(scores))


def accuracy(pred_logits: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax matches the label (ties to the lowest index)."""
    pred_logits = np.asarray(pred_logits, dtype=float)
    labels = np.asarray(labels)
    if pred_logits.ndim != 2:
        raise ValueError("logits must be (samples x classes)")
    if pred_logits.shape[0] == 0:
        raise ValueError("no samples to score")
    if pred_logits.shape[0] != len(labels):
        raise ValueError("row count does not match label count")
    return float(np.mean(np.argmax(pred_logits, axis=1) == labels))


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """0/1 indicator targets for ridge-based classification."""
    labels = np.asarray(labels, dtype=int)
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("labels out of range")
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out
