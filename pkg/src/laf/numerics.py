"""Overflow-safe elementwise primitives shared by the classifier and the LSTM."""

from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax with max-logit subtraction; stable for logits up to ~|700|.

    Entries are floored at the smallest normal float64: exp underflows to an
    exact 0 once logit gaps pass ~745, and a hard zero would both violate the
    strictly-positive output contract and produce infinite log losses.
    """
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return np.maximum(e / np.sum(e, axis=axis, keepdims=True), np.finfo(np.float64).tiny)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function evaluated without overflow on either tail."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
