"""Linear softmax probe on frozen embeddings.

Trained from zero initialization with mini-batch SGD (momentum + weight
decay), fully deterministic given the seed. Supplies the class-probability
outputs the query strategies need, plus test accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DataError
from .validation import as_float_matrix, softmax


@dataclass(frozen=True)
class ProbeConfig:
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float = 0.1
    weight_decay: float = 5e-4
    momentum: float = 0.9
    seed: int = 0

    def validate(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise DataError("steps and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise DataError("learning_rate must be > 0 and weight_decay >= 0")
        if not (0.0 <= self.momentum < 1.0):
            raise DataError("momentum must be in [0, 1)")


def cross_entropy_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    weight_decay: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy (+ L2 penalty on weights and bias) and its gradients."""
    logits = x @ weights.T + bias
    probs = softmax(logits, axis=1)
    n = x.shape[0]
    log_probs = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = log_probs - np.log(np.sum(np.exp(log_probs), axis=1, keepdims=True))
    loss = -float(np.mean(log_probs[np.arange(n), y]))
    loss += 0.5 * weight_decay * (float(np.sum(weights**2)) + float(np.sum(bias**2)))

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = delta.T @ x + weight_decay * weights
    grad_b = delta.sum(axis=0) + weight_decay * bias
    return loss, grad_w, grad_b


class LinearSoftmaxProbe(BaseEstimator, ClassifierMixin):
    """K-class linear probe with the usual fit/predict_proba/score surface."""

    def __init__(
        self,
        n_classes: int = 2,
        steps: int = 2000,
        batch_size: int = 64,
        learning_rate: float = 0.1,
        weight_decay: float = 5e-4,
        momentum: float = 0.9,
        seed: int = 0,
    ):
        self.n_classes = n_classes
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.momentum = momentum
        self.seed = seed

    @classmethod
    def from_config(cls, n_classes: int, config: ProbeConfig) -> "LinearSoftmaxProbe":
        config.validate()
        return cls(
            n_classes=n_classes,
            steps=config.steps,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            weight_decay=config.weight_decay,
            momentum=config.momentum,
            seed=config.seed,
        )

    def fit(self, X, y):
        X = as_float_matrix(X, "X")
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] == 0:
            raise DataError("empty training set")
        if X.shape[0] != y.shape[0]:
            raise DataError("X and y length mismatch")
        if np.any(y < 0) or np.any(y >= self.n_classes):
            raise DataError(f"labels must be in [0, {self.n_classes})")

        k, d = self.n_classes, X.shape[1]
        w = np.zeros((k, d))
        b = np.zeros(k)
        vw = np.zeros_like(w)
        vb = np.zeros_like(b)
        rng = np.random.default_rng(self.seed)

        n = X.shape[0]
        order = rng.permutation(n)
        cursor = 0
        for _ in range(self.steps):
            if cursor >= n:
                order = rng.permutation(n)
                cursor = 0
            batch = order[cursor : cursor + self.batch_size]
            cursor += self.batch_size
            _, gw, gb = cross_entropy_loss_and_grad(
                w, b, X[batch], y[batch], self.weight_decay
            )
            vw = self.momentum * vw - self.learning_rate * gw
            vb = self.momentum * vb - self.learning_rate * gb
            w = w + vw
            b = b + vb

        self.weights_ = w
        self.bias_ = b
        self.classes_ = np.arange(k)
        return self

    def _check_fitted_dims(self, X: np.ndarray) -> None:
        if not hasattr(self, "weights_"):
            raise DataError("probe is not fitted")
        if X.shape[1] != self.weights_.shape[1]:
            raise DataError(
                f"dimension mismatch: probe expects D={self.weights_.shape[1]}, "
                f"got {X.shape[1]}"
            )

    def decision_function(self, X) -> np.ndarray:
        X = as_float_matrix(X, "X")
        self._check_fitted_dims(X)
        return X @ self.weights_.T + self.bias_

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X) -> np.ndarray:
        # argmax breaks ties toward the lowest class index
        return np.argmax(self.decision_function(X), axis=1)

    def score(self, X, y) -> float:
        y = np.asarray(y, dtype=np.int64)
        if y.shape[0] == 0:
            raise DataError("empty evaluation set")
        return float(np.mean(self.predict(X) == y))


def uniform_probe(n_classes: int, dim: int) -> LinearSoftmaxProbe:
    """Zero-weight probe producing uniform probabilities; used when no ID data
    has been labeled yet."""
    probe = LinearSoftmaxProbe(n_classes=n_classes)
    probe.weights_ = np.zeros((n_classes, dim))
    probe.bias_ = np.zeros(n_classes)
    probe.classes_ = np.arange(n_classes)
    return probe
