"""Relevance extraction and frequency-domain explanations.

For a class c, the relevance of embedding component k is
r_k = z_k * theta_{k,c}, where z is the time-pooled embedding and theta
the bias-free head weights.  Components at or below a threshold tau are
zeroed; the survivors are projected through the dictionary to show which
frequency bins drive the decision, and the filtered embedding can be
re-scored through the head to measure how much of the decision the kept
components carry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nmf import Dictionary
from .segnet import CLASSES, ProxyModel

TAU_GRID_POINTS = 20


@dataclass
class RelevanceVector:
    class_id: str
    r: np.ndarray          # (K,), may be negative
    z: np.ndarray          # (K,), non-negative pooled activations


@dataclass
class FilteredRelevance:
    tau: float
    values: np.ndarray     # (K,), r where r > tau, else 0


@dataclass
class FrequencyExplanation:
    x_c: np.ndarray        # (F,)
    bin_hz: float


def class_index(class_id) -> int:
    if isinstance(class_id, str):
        if class_id not in CLASSES:
            raise ShapeError(f"unknown class {class_id!r}, expected one of "
                             f"{CLASSES}")
        return CLASSES.index(class_id)
    return int(class_id)


def pool_embedding(h: np.ndarray) -> np.ndarray:
    """Mean of the embedding over time: z_k = (1/T) sum_t h[k, t]."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[1] == 0:
        raise ShapeError(f"expected a non-empty (K, T) embedding, got {h.shape}")
    return h.mean(axis=1)


def relevance_vector(z: np.ndarray, theta: np.ndarray,
                     class_id) -> RelevanceVector:
    c = class_index(class_id)
    z = np.asarray(z)
    if z.shape[0] != theta.shape[0]:
        raise ShapeError(f"z has {z.shape[0]} components, head expects "
                         f"{theta.shape[0]}")
    name = class_id if isinstance(class_id, str) else CLASSES[c]
    return RelevanceVector(name, z * theta[:, c], z)


def filter_relevance(r: np.ndarray, tau: float) -> FilteredRelevance:
    r = np.asarray(r, dtype=np.float64)
    return FilteredRelevance(tau, np.where(r > tau, r, 0.0))


def relevance(z: np.ndarray, theta_c: np.ndarray, tau: float) -> FilteredRelevance:
    """r = z * theta_c with entries <= tau zeroed."""
    z = np.asarray(z)
    theta_c = np.asarray(theta_c)
    if z.shape != theta_c.shape:
        raise ShapeError(f"z {z.shape} vs theta_c {theta_c.shape}")
    return filter_relevance(z * theta_c, tau)


def project_to_frequency(filtered: FilteredRelevance,
                         w: Dictionary, bin_hz: float = None) -> FrequencyExplanation:
    """Project the kept components into the frequency domain: W R(tau)."""
    if w.rank != filtered.values.shape[0]:
        raise ShapeError(f"dictionary rank {w.rank} vs relevance length "
                         f"{filtered.values.shape[0]}")
    return FrequencyExplanation(w.atoms @ filtered.values, bin_hz)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def head_logits(theta: np.ndarray, h: np.ndarray) -> np.ndarray:
    # contiguous transpose matches the training-time forward bit for bit
    return np.ascontiguousarray(theta.T) @ h


def rescore_filtered(h: np.ndarray, filtered: FilteredRelevance,
                     theta: np.ndarray):
    """Zero the pruned component rows of H and push the rest through the
    head.  Returns (probabilities (C, T), time-pooled score per class)."""
    h = np.asarray(h)
    if h.shape[0] != filtered.values.shape[0]:
        raise ShapeError(f"embedding has {h.shape[0]} components, relevance "
                         f"has {filtered.values.shape[0]}")
    keep = filtered.values != 0
    h_kept = h if keep.all() else h * keep[:, None]
    probs = _sigmoid(head_logits(theta, h_kept))
    return probs, probs.mean(axis=1)


def global_relevance(model: ProxyModel, segments: list, class_id) -> np.ndarray:
    """Mean unfiltered relevance over a set of single-class segments.

    ``segments`` holds spectrogram matrices (F, T); the model is frozen.
    """
    if not segments:
        raise ShapeError("cannot average relevance over an empty segment set")
    theta = model.theta_matrix()
    c = class_index(class_id)
    acc = np.zeros(theta.shape[0])
    for bins in segments:
        h, _, _, _ = model.predict(bins)
        acc += pool_embedding(h) * theta[:, c]
    return acc / len(segments)


def tau_grid(r: np.ndarray, points: int = TAU_GRID_POINTS) -> np.ndarray:
    """Evenly spaced quantiles of the positive part of r (the last point
    is max(r), which prunes everything under the strict > rule)."""
    r = np.asarray(r)
    positive = r[r > 0]
    if positive.size == 0:
        return np.array([0.0])
    return np.quantile(positive, np.linspace(0.0, 1.0, points))


def score_curve(h: np.ndarray, theta: np.ndarray, r: np.ndarray,
                taus: np.ndarray) -> np.ndarray:
    """Time-pooled class scores after filtering at each tau: (len(taus), C)."""
    rows = []
    for tau in taus:
        _, pooled = rescore_filtered(h, filter_relevance(r, tau), theta)
        rows.append(pooled)
    return np.asarray(rows)
