"""Symmetric pair transformations and the pairwise compatibility scorers.

A pair of feature vectors is turned into an argument-order-invariant
joint feature (elementwise product, elementwise sum, elementwise squared
difference, concatenated as [dot; sum; diff]), then scored by a fully
connected network with two ReLU hidden layers and a sigmoid output.
Symmetry is architectural: swapping the items permutes nothing, so the
score is exactly equal up to floating-point commutativity.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .nn import Param, mlp

BCE_EPS = 1e-7
TRANSFORM_ORDER = ("dot", "sum", "diff")


def _as_batch(a: np.ndarray) -> tuple[np.ndarray, bool]:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return a[None, :], True
    if a.ndim == 2:
        return a, False
    raise ShapeError(f"expected a vector or batch of vectors, got shape {a.shape}")


def _single_transform(a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
    if kind == "dot":
        return a * b
    if kind == "diff":
        return (a - b) ** 2
    if kind == "sum":
        return a + b
    raise ConfigError(f"unknown pair transform {kind!r}")


def pair_transform(a: np.ndarray, b: np.ndarray, kind: str = "all") -> np.ndarray:
    """Symmetric joint feature of two vectors (or row-aligned batches).

    ``kind`` is one of ``dot`` (elementwise product), ``diff``
    (elementwise squared difference), ``sum`` (elementwise sum), or
    ``all`` (concatenation in the order [dot; sum; diff]).
    """
    a2, single_a = _as_batch(a)
    b2, single_b = _as_batch(b)
    if a2.shape != b2.shape:
        raise ShapeError(f"pair shapes differ: {np.shape(a)} vs {np.shape(b)}")
    if kind == "all":
        out = np.concatenate([_single_transform(a2, b2, k) for k in TRANSFORM_ORDER], axis=1)
    else:
        out = _single_transform(a2, b2, kind)
    return out[0] if (single_a and single_b) else out


def _joint_feature(a: np.ndarray, b: np.ndarray, kinds: tuple[str, ...]) -> np.ndarray:
    return np.concatenate([_single_transform(a, b, k) for k in kinds], axis=1)


def _joint_feature_backward(a: np.ndarray, b: np.ndarray, kinds: tuple[str, ...],
                            grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = a.shape[1]
    da = np.zeros_like(a)
    db = np.zeros_like(b)
    for i, kind in enumerate(kinds):
        g = grad[:, i * d : (i + 1) * d]
        if kind == "dot":
            da += g * b
            db += g * a
        elif kind == "sum":
            da += g
            db += g
        elif kind == "diff":
            da += 2.0 * (a - b) * g
            db += -2.0 * (a - b) * g
    return da, db


def normalize_transforms(transforms) -> tuple[str, ...]:
    """Validate a transform subset and fix its order to [dot; sum; diff]."""
    chosen = tuple(t for t in TRANSFORM_ORDER if t in transforms)
    unknown = set(transforms) - set(TRANSFORM_ORDER)
    if unknown:
        raise ConfigError(f"unknown pair transforms: {sorted(unknown)}")
    if not chosen:
        raise ConfigError("need at least one pair transform")
    return chosen


class PairDiscriminator:
    """Scores the compatibility of a feature pair in (0, 1)."""

    def __init__(self, name: str, feature_dim: int, rng: np.random.Generator,
                 hidden: tuple[int, int] = (256, 64),
                 transforms: tuple[str, ...] = TRANSFORM_ORDER):
        self.feature_dim = feature_dim
        self.transforms = normalize_transforms(transforms)
        self.hidden = tuple(hidden)
        dims = [len(self.transforms) * feature_dim, *hidden, 1]
        self.net = mlp(name, dims, rng)

    def _pair_batches(self, va: np.ndarray, vb: np.ndarray):
        va, _ = _as_batch(va)
        vb, _ = _as_batch(vb)
        if va.shape != vb.shape or va.shape[1] != self.feature_dim:
            raise ShapeError(
                f"expected two (N, {self.feature_dim}) batches, got {va.shape} and {vb.shape}"
            )
        if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
            raise NumericError("discriminator inputs contain non-finite values")
        return va, vb

    def logits(self, va: np.ndarray, vb: np.ndarray) -> np.ndarray:
        va, vb = self._pair_batches(va, vb)
        return self.net.forward(_joint_feature(va, vb, self.transforms))[:, 0]

    def scores(self, va: np.ndarray, vb: np.ndarray) -> np.ndarray:
        """Compatibility scores for row-aligned feature batches.

        Clamped to [eps, 1 - eps] so saturated logits still honor the
        open-interval contract under float64.
        """
        return np.clip(_sigmoid(self.logits(va, vb)), BCE_EPS, 1.0 - BCE_EPS)

    def score_one(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.scores(a[None, :], b[None, :])[0])

    def loss_and_grads(self, va: np.ndarray, vb: np.ndarray, labels: np.ndarray):
        """Mean binary cross-entropy plus gradients w.r.t. both feature batches."""
        va, vb = self._pair_batches(va, vb)
        y = np.asarray(labels, dtype=np.float64)
        if y.shape != (va.shape[0],):
            raise ShapeError(f"labels must have shape ({va.shape[0]},)")
        joint = _joint_feature(va, vb, self.transforms)
        z, cache = self.net.forward_train(joint)
        z = z[:, 0]
        scores = _sigmoid(z)
        loss = binary_cross_entropy(scores, y)

        n = y.size
        clipped = np.clip(scores, BCE_EPS, 1.0 - BCE_EPS)
        inside = (scores > BCE_EPS) & (scores < 1.0 - BCE_EPS)
        dl_dscore = (-y / clipped + (1.0 - y) / (1.0 - clipped)) * inside / n
        dz = dl_dscore * scores * (1.0 - scores)
        djoint = self.net.backward(cache, dz[:, None])
        da, db = _joint_feature_backward(va, vb, self.transforms, djoint)
        return loss, da, db

    def params(self) -> list[Param]:
        return self.net.params()


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def binary_cross_entropy(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean BCE with log arguments clamped to [eps, 1 - eps], eps = 1e-7."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.size == 0:
        raise ConfigError("binary cross-entropy needs a non-empty batch")
    clipped = np.clip(scores, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-labels * np.log(clipped) - (1.0 - labels) * np.log(1.0 - clipped)))


def discriminator_loss(discriminator: PairDiscriminator, va: np.ndarray, vb: np.ndarray,
                       labels: np.ndarray) -> float:
    """Forward-only mean BCE of a labeled feature-pair batch."""
    return binary_cross_entropy(discriminator.scores(va, vb), labels)


def balanced_accuracy(scores: np.ndarray, labels: np.ndarray, threshold: float) -> float:
    """Mean of sensitivity and specificity for ``score >= threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pred = scores >= threshold
    pos = labels == 1
    neg = ~pos
    if not pos.any() or not neg.any():
        raise ConfigError("balanced accuracy needs both classes present")
    sensitivity = np.mean(pred[pos])
    specificity = np.mean(~pred[neg])
    return float(0.5 * (sensitivity + specificity))


def select_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Decision threshold maximizing balanced accuracy on validation pairs.

    Candidates are the distinct observed scores plus the midpoints
    between consecutive distinct scores; ties resolve to the smallest
    threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    uniq = np.unique(scores)
    candidates = list(uniq)
    candidates.extend((uniq[:-1] + uniq[1:]) / 2.0)
    best_theta = None
    best_acc = -1.0
    for theta in sorted(candidates):
        acc = balanced_accuracy(scores, labels, theta)
        if acc > best_acc + 1e-15:
            best_acc = acc
            best_theta = theta
    return float(best_theta)
