"""Shared image-text coherence space: embedders, query path, and losses.

Image and text features map into one unconstrained Euclidean space via
two single-hidden-layer ReLU networks. Training pulls an item's image
and text embeddings together and pushes a different item away (two
triplet hinges on squared distances), adds a direct squared alignment
penalty, and L2-regularizes the embedder weights (by default only the
output layers). Free-text queries ride the text pipeline, so a query
equal to an item's text lands exactly on that item's text embedding.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, InvalidQueryError, NumericError, ShapeError
from .nn import Linear, Param, Sequential, mlp


def make_embedder(name: str, feature_dim: int, embed_dim: int, hidden: int,
                  rng: np.random.Generator) -> Sequential:
    """Fully connected embedder with one hidden ReLU layer."""
    return mlp(name, [feature_dim, hidden, embed_dim], rng)


def _check_vector(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NumericError(f"{what} contains non-finite values")
    return v


def embed_image(image_feature: np.ndarray, embedder: Sequential) -> np.ndarray:
    """Map one image feature vector into the coherence space."""
    v = _check_vector(image_feature, "image feature")
    return embedder.forward(v[None, :])[0]


def embed_text(text_feature: np.ndarray, embedder: Sequential) -> np.ndarray:
    """Map one text feature vector into the coherence space."""
    v = _check_vector(text_feature, "text feature")
    return embedder.forward(v[None, :])[0]


def embed_query(query_text: str, text_backbone, text_embedder: Sequential) -> np.ndarray:
    """Embed a free-text outfit query via the text pipeline."""
    if not query_text or not query_text.strip():
        raise InvalidQueryError("query text must be non-empty")
    return text_embedder.forward(text_backbone.forward([query_text]))[0]


def triplet_loss(anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray,
                 margin: float) -> float:
    """Squared-distance triplet hinge: max(d(a,p)^2 - d(a,n)^2 + margin, 0)."""
    if margin <= 0:
        raise ConfigError(f"margin must be positive, got {margin}")
    a = _check_vector(anchor, "anchor")
    p = _check_vector(positive, "positive")
    n = _check_vector(negative, "negative")
    if not (a.shape == p.shape == n.shape):
        raise ShapeError(f"triplet shapes differ: {a.shape}, {p.shape}, {n.shape}")
    d_ap = float(np.sum((a - p) ** 2))
    d_an = float(np.sum((a - n) ** 2))
    return max(d_ap - d_an + margin, 0.0)


def triplet_loss_grads(anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray,
                       margin: float):
    """Triplet hinge value plus analytic gradients w.r.t. all three inputs."""
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    value = triplet_loss(a, p, n, margin)
    if value == 0.0:
        zero = np.zeros_like(a)
        return value, zero, zero.copy(), zero.copy()
    da = 2.0 * (a - p) - 2.0 * (a - n)
    dp = -2.0 * (a - p)
    dn = 2.0 * (a - n)
    return value, da, dp, dn


def _weight_params(embedder: Sequential, scope: str) -> list[Param]:
    linears = [layer for layer in embedder.layers if isinstance(layer, Linear)]
    if scope == "output":
        linears = linears[-1:]
    elif scope != "all":
        raise ConfigError(f"l2_scope must be 'output' or 'all', got {scope!r}")
    return [layer.W for layer in linears]


def _validate_batch(image_features: np.ndarray, text_features: np.ndarray,
                    negative_indices: np.ndarray):
    if image_features.ndim != 2 or text_features.ndim != 2:
        raise ShapeError("expected 2-D feature batches")
    if image_features.shape[0] != text_features.shape[0]:
        raise ShapeError("image/text batches differ in length")
    n = image_features.shape[0]
    if n == 0:
        raise ConfigError("embedding loss needs a non-empty batch")
    neg = np.asarray(negative_indices, dtype=np.int64)
    if neg.shape != (n,):
        raise ShapeError(f"negative_indices must have shape ({n},)")
    if np.any(neg == np.arange(n)) or np.any(neg < 0) or np.any(neg >= n):
        raise ConfigError("each anchor needs a negative index of a different batch item")
    return neg


def embedding_loss_and_grads(
    image_features: np.ndarray,
    text_features: np.ndarray,
    negative_indices: np.ndarray,
    image_embedder: Sequential,
    text_embedder: Sequential,
    margin: float,
    l2_coeff: float = 5e-4,
    l2_scope: str = "output",
):
    """Batch embedding loss plus gradients.

    Per anchor j with negative m: two triplet hinges (text embedding of m,
    image embedding of m as negatives) anchored at the item's image
    embedding with its text embedding as positive, plus the squared
    image/text alignment distance. Mean over the batch; the L2 term adds
    ``l2_coeff * sum(W^2)`` over the selected embedder weights.

    Accumulates parameter gradients on both embedders and returns
    ``(loss, components, d_image_features, d_text_features)``.
    """
    vi = np.asarray(image_features, dtype=np.float64)
    vt = np.asarray(text_features, dtype=np.float64)
    neg = _validate_batch(vi, vt, negative_indices)
    n = vi.shape[0]

    ui, cache_i = image_embedder.forward_train(vi)
    ut, cache_t = text_embedder.forward_train(vt)

    a, p = ui, ut
    n_text = ut[neg]
    n_img = ui[neg]

    d_ap = np.sum((a - p) ** 2, axis=1)
    h1_arg = d_ap - np.sum((a - n_text) ** 2, axis=1) + margin
    h2_arg = d_ap - np.sum((a - n_img) ** 2, axis=1) + margin
    active1 = h1_arg > 0
    active2 = h2_arg > 0
    hinge1 = np.where(active1, h1_arg, 0.0)
    hinge2 = np.where(active2, h2_arg, 0.0)
    align = d_ap

    triplet_total = float(np.mean(hinge1 + hinge2))
    align_total = float(np.mean(align))

    l2_params = _weight_params(image_embedder, l2_scope) + _weight_params(text_embedder, l2_scope)
    l2_total = float(l2_coeff * sum(np.sum(w.value**2) for w in l2_params))
    loss = triplet_total + align_total + l2_total

    # gradients w.r.t. the embedding rows, mean reduction folded in
    g_a = np.zeros_like(a)
    g_p = np.zeros_like(p)
    scale = 1.0 / n
    for active, nvec, g_n_target in ((active1, n_text, "text"), (active2, n_img, "image")):
        act = active[:, None] * scale
        g_a += act * (2.0 * (a - p) - 2.0 * (a - nvec))
        g_p += act * (-2.0 * (a - p))
        g_neg = act * (2.0 * (a - nvec))
        if g_n_target == "text":
            g_ut_neg = g_neg
        else:
            g_ui_neg = g_neg
    g_a += scale * (-2.0) * (p - a)
    g_p += scale * 2.0 * (p - a)

    g_ui = g_a.copy()
    g_ut = g_p.copy()
    np.add.at(g_ut, neg, g_ut_neg)
    np.add.at(g_ui, neg, g_ui_neg)

    d_vi = image_embedder.backward(cache_i, g_ui)
    d_vt = text_embedder.backward(cache_t, g_ut)
    for w in l2_params:
        w.grad += 2.0 * l2_coeff * w.value

    components = {"triplet": triplet_total, "align": align_total, "l2": l2_total}
    return loss, components, d_vi, d_vt


def embedding_loss(
    image_features: np.ndarray,
    text_features: np.ndarray,
    negative_indices: np.ndarray,
    image_embedder: Sequential,
    text_embedder: Sequential,
    margin: float,
    l2_coeff: float = 5e-4,
    l2_scope: str = "output",
) -> float:
    """Forward-only value of the batch embedding loss (see the grads variant)."""
    vi = np.asarray(image_features, dtype=np.float64)
    vt = np.asarray(text_features, dtype=np.float64)
    neg = _validate_batch(vi, vt, negative_indices)

    ui = image_embedder.forward(vi)
    ut = text_embedder.forward(vt)
    d_ap = np.sum((ui - ut) ** 2, axis=1)
    h1 = np.maximum(d_ap - np.sum((ui - ut[neg]) ** 2, axis=1) + margin, 0.0)
    h2 = np.maximum(d_ap - np.sum((ui - ui[neg]) ** 2, axis=1) + margin, 0.0)
    l2_params = _weight_params(image_embedder, l2_scope) + _weight_params(text_embedder, l2_scope)
    l2_total = l2_coeff * sum(np.sum(w.value**2) for w in l2_params)
    return float(np.mean(h1 + h2 + d_ap) + l2_total)
