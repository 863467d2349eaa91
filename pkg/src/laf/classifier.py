"""Multinomial softmax regression over feature vectors.

This is the shallow classifier both filtering directions rely on: it maps a
d-dimensional feature to N label probabilities via a single linear layer,
trained with mini-batch gradient descent on L2-regularized cross-entropy.
Parameters start at zero, so a zero-epoch model predicts the uniform
distribution and training is bitwise reproducible for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CorpusFormatError, ValidationError
from .ioutil import atomic_write_text, decode_f64, encode_f64
from .numerics import softmax

CHECKPOINT_FORMAT = "laf-softmax"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ClassifierTrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    l2_penalty: float = 1e-4
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.l2_penalty < 0:
            raise ValidationError("l2_penalty must be nonnegative")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be positive")


@dataclass(eq=False)
class Classifier:
    """Linear softmax model: logits = weights @ feature + biases."""

    weights: np.ndarray  # (num_labels, feature_dim)
    biases: np.ndarray   # (num_labels,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValidationError(f"inconsistent classifier shapes {self.weights.shape} / {self.biases.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValidationError("classifier parameters must be finite")

    @property
    def num_labels(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


def predict_softmax(clf: Classifier, feature: np.ndarray) -> np.ndarray:
    """Probability vector over labels for one feature; sums to 1 within 1e-12."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape != (clf.feature_dim,):
        raise ValidationError(f"feature dimension {feature.shape} != ({clf.feature_dim},)")
    return softmax(clf.weights @ feature + clf.biases)


def predict_softmax_many(clf: Classifier, features: np.ndarray) -> np.ndarray:
    """Row-wise softmax probabilities for an (n, d) feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != clf.feature_dim:
        raise ValidationError(f"feature matrix shape {features.shape} incompatible with d={clf.feature_dim}")
    return softmax(features @ clf.weights.T + clf.biases, axis=1)


def score_for_label(clf: Classifier, feature: np.ndarray, label: int) -> float:
    """The softmax probability the classifier assigns to ``label``."""
    if not (0 <= label < clf.num_labels):
        raise ValidationError(f"label {label} outside [0, {clf.num_labels})")
    return float(predict_softmax(clf, feature)[label])


def scores_for_labels(clf: Classifier, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Vectorized ``score_for_label``: probs[i] = softmax(x_i)[labels[i]]."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= clf.num_labels):
        raise ValidationError(f"labels outside [0, {clf.num_labels})")
    probs = predict_softmax_many(clf, features)
    return probs[np.arange(len(labels)), labels]


def cross_entropy_loss(weights: np.ndarray, biases: np.ndarray, features: np.ndarray,
                       labels: np.ndarray, l2_penalty: float) -> float:
    """Mean negative log-likelihood plus (l2/2) * squared norm of all parameters."""
    probs = softmax(features @ weights.T + biases, axis=1)
    nll = -np.log(probs[np.arange(len(labels)), labels])
    reg = 0.5 * l2_penalty * (np.sum(weights ** 2) + np.sum(biases ** 2))
    return float(np.mean(nll) + reg)


def cross_entropy_gradient(weights: np.ndarray, biases: np.ndarray, features: np.ndarray,
                           labels: np.ndarray, l2_penalty: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`cross_entropy_loss` wrt weights and biases."""
    n = len(labels)
    delta = softmax(features @ weights.T + biases, axis=1)
    delta[np.arange(n), labels] -= 1.0
    grad_w = delta.T @ features / n + l2_penalty * weights
    grad_b = delta.sum(axis=0) / n + l2_penalty * biases
    return grad_w, grad_b


def _as_arrays(examples: Sequence[tuple[np.ndarray, int]], num_labels: int) -> tuple[np.ndarray, np.ndarray]:
    if len(examples) == 0:
        raise ValidationError("cannot train on an empty example list")
    features = np.stack([np.asarray(f, dtype=np.float64) for f, _ in examples])
    labels = np.asarray([lab for _, lab in examples], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= num_labels:
        raise ValidationError(f"labels outside [0, {num_labels})")
    return features, labels


def train_classifier(examples: Sequence[tuple[np.ndarray, int]], num_labels: int,
                     config: ClassifierTrainConfig) -> Classifier:
    """Mini-batch gradient descent from zero-initialized parameters.

    Each epoch shuffles the example order with the seeded generator; batch
    gradients are averaged, so the learning rate is comparable across batch
    sizes. Deterministic given data, config, and seed.
    """
    features, labels = _as_arrays(examples, num_labels)
    n, dim = features.shape
    weights = np.zeros((num_labels, dim))
    biases = np.zeros(num_labels)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            grad_w, grad_b = cross_entropy_gradient(weights, biases, features[idx], labels[idx],
                                                    config.l2_penalty)
            weights -= config.learning_rate * grad_w
            biases -= config.learning_rate * grad_b
    return Classifier(weights=weights, biases=biases)


def save_classifier(clf: Classifier, path: str | Path) -> None:
    obj = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "num_labels": clf.num_labels,
        "feature_dim": clf.feature_dim,
        "weights": encode_f64(clf.weights),
        "biases": encode_f64(clf.biases),
    }
    atomic_write_text(path, json.dumps(obj) + "\n")


def load_classifier(path: str | Path) -> Classifier:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{path}: invalid JSON: {exc}") from exc
    if obj.get("format") != CHECKPOINT_FORMAT or obj.get("version") != CHECKPOINT_VERSION:
        raise CorpusFormatError(f"{path}: not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} checkpoint")
    num_labels, dim = int(obj["num_labels"]), int(obj["feature_dim"])
    weights = decode_f64(obj["weights"], str(path)).reshape(num_labels, dim)
    biases = decode_f64(obj["biases"], str(path))
    if biases.shape != (num_labels,):
        raise CorpusFormatError(f"{path}: bias length {biases.size} != num_labels {num_labels}")
    return Classifier(weights=weights, biases=biases)
