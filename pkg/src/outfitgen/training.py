"""Joint training of encoders, embedders, and discriminators; checkpoints.

Each epoch walks every positive pair once in a seeded shuffled order and
pairs it with a freshly resampled type-aware negative (epoch seed =
``seed XOR epoch``). A batch contributes the weighted embedding loss over
its unique items plus one BCE term per discriminator mode; a single
adaptive-moment optimizer updates all parameters. The checkpoint kept is
the one with the best validation compatibility AUC.

Checkpoint container: an 8-byte little-endian length prefix, a UTF-8
JSON manifest (config, vocabulary, thresholds, metric snapshot, array
table with offsets/shapes/dtypes, payload SHA-256), then the raw
little-endian row-major array payloads in manifest order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation
from .catalog import DatasetSplit, generate_positive_pairs, sample_negative_pairs
from .compatibility import select_threshold
from .embedding import embedding_loss_and_grads, triplet_loss_grads
from .errors import (
    CheckpointIntegrityError,
    ConfigError,
    NumericError,
    ShapeError,
)
from .model import DISCRIMINATOR_MODES, ItemIndex, ModelConfig, OutfitModel
from .nn import Adam, finite_difference_check, zero_grads

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 20
    batch_size: int = 64
    margin: float = 1.0
    l2_coeff: float = 5e-4
    loss_weights: dict = field(
        default_factory=lambda: {"embed": 1.0, "image": 1.0, "text": 1.0, "cat": 1.0}
    )
    seed: int = 0
    adam_eps: float = 1e-8
    keep_best: bool = True
    convergence_notes: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.beta1 <= 0 or self.beta2 <= 0:
            raise ConfigError("optimizer rates must be positive")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "margin": self.margin,
            "l2_coeff": self.l2_coeff,
            "loss_weights": dict(self.loss_weights),
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    manifest: dict
    arrays: dict[str, np.ndarray]

    def to_model(self) -> OutfitModel:
        return model_from_checkpoint(self)


def checkpoint_from_model(model: OutfitModel, train_config: TrainConfig | None = None,
                          metrics: dict | None = None) -> Checkpoint:
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "seed": model.seed,
        "config": model.config.to_dict(),
        "type_vocabulary": list(model.type_vocabulary),
        "feature_dim": model.config.feature_dim,
        "embed_dim": model.config.embed_dim,
        "backbones": {"image": model.image_backbone.kind, "text": model.text_backbone.kind},
        "thresholds": dict(model.thresholds),
        "metrics": metrics or {},
        "train_config": train_config.to_dict() if train_config else None,
    }
    arrays = {p.name: p.value.copy() for p in model.params()}
    return Checkpoint(manifest=manifest, arrays=arrays)


def model_from_checkpoint(checkpoint: Checkpoint) -> OutfitModel:
    manifest = checkpoint.manifest
    config = ModelConfig.from_dict(manifest["config"])
    model = OutfitModel(config, manifest["type_vocabulary"], seed=manifest.get("seed", 0))
    params = {p.name: p for p in model.params()}
    missing = sorted(set(params) - set(checkpoint.arrays))
    extra = sorted(set(checkpoint.arrays) - set(params))
    if missing or extra:
        raise CheckpointIntegrityError(
            f"checkpoint arrays do not match the model (missing={missing}, extra={extra})"
        )
    for name, param in params.items():
        value = checkpoint.arrays[name]
        if tuple(value.shape) != tuple(param.value.shape):
            raise ShapeError(
                f"checkpoint array {name} has shape {tuple(value.shape)}, "
                f"model expects {tuple(param.value.shape)}"
            )
        param.value[...] = value
    model.thresholds = {k: float(v) for k, v in manifest.get("thresholds", {}).items()}
    return model


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    """Write the single-file checkpoint container described in the module docs."""
    payload = bytearray()
    records = []
    for name, arr in checkpoint.arrays.items():
        arr = np.ascontiguousarray(arr)
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C")
        records.append(
            {
                "name": name,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)
    manifest = dict(checkpoint.manifest)
    manifest["arrays"] = records
    manifest["payload_sha256"] = hashlib.sha256(bytes(payload)).hexdigest()
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise CheckpointIntegrityError("checkpoint file is truncated")
    blob_len = int.from_bytes(data[:8], "little")
    if len(data) < 8 + blob_len:
        raise CheckpointIntegrityError("checkpoint manifest is truncated")
    try:
        manifest = json.loads(data[8 : 8 + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointIntegrityError(f"checkpoint manifest is corrupt: {exc}") from exc
    payload = data[8 + blob_len :]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != manifest.get("payload_sha256"):
        raise CheckpointIntegrityError("checkpoint payload hash mismatch")
    arrays: dict[str, np.ndarray] = {}
    for record in manifest["arrays"]:
        start, nbytes = record["offset"], record["nbytes"]
        if start + nbytes > len(payload):
            raise CheckpointIntegrityError(f"array {record['name']} overruns the payload")
        dtype = np.dtype(record["dtype"]).newbyteorder("<")
        arrays[record["name"]] = (
            np.frombuffer(payload, dtype=dtype, count=nbytes // dtype.itemsize, offset=start)
            .reshape(record["shape"])
            .astype(record["dtype"], copy=True)
        )
    manifest = {k: v for k, v in manifest.items() if k not in ("arrays", "payload_sha256")}
    return Checkpoint(manifest=manifest, arrays=arrays)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def _pair_rows(pairs, row_of):
    a = np.asarray([row_of[p.item_a] for p in pairs], dtype=np.int64)
    b = np.asarray([row_of[p.item_b] for p in pairs], dtype=np.int64)
    y = np.asarray([p.label for p in pairs], dtype=np.float64)
    return a, b, y


def train(
    train_split: DatasetSplit,
    config: TrainConfig,
    valid_split: DatasetSplit | None = None,
    model_config: ModelConfig | None = None,
    log_path: str | Path | None = None,
) -> Checkpoint:
    """Train the full model on one split; returns the selected checkpoint.

    Deterministic for a fixed seed under single-threaded execution. Emits
    one JSON record per epoch to ``log_path`` when given.
    """
    if not train_split.outfits or not train_split.items:
        raise ConfigError("training needs a non-empty train split")
    if model_config is None:
        model_config = ModelConfig(resolution=train_split.resolution)
    if model_config.resolution != train_split.resolution:
        raise ConfigError(
            f"model resolution {model_config.resolution} != dataset resolution "
            f"{train_split.resolution}"
        )
    positives = generate_positive_pairs(train_split.outfits)
    if not positives:
        raise ConfigError("training needs at least one positive pair")

    model = OutfitModel(model_config, train_split.type_vocabulary, seed=config.seed)
    params = model.params()
    optimizer = Adam(params, lr=config.learning_rate, beta1=config.beta1,
                     beta2=config.beta2, eps=config.adam_eps)

    ids = sorted(train_split.items)
    row_of = {item_id: row for row, item_id in enumerate(ids)}
    images = np.stack([train_split.items[i].image for i in ids]).transpose(0, 3, 1, 2)
    bows = model.text_backbone.featurize([train_split.items[i].text for i in ids])

    weights = {
        "embed": float(config.loss_weights.get("embed", 1.0)),
        "image": float(config.loss_weights.get("image", 1.0)),
        "text": float(config.loss_weights.get("text", 1.0)),
        "cat": float(config.loss_weights.get("cat", 1.0)),
    }

    valid_negatives = None
    if valid_split is not None:
        valid_negatives = evaluation.make_random_negative_outfits(
            valid_split.outfits, valid_split.items, seed=config.seed + 9001
        )

    history: list[dict] = []
    best_auc = -np.inf
    best_epoch = None
    best_values = None
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(config.epochs):
            negatives = sample_negative_pairs(positives, train_split.items,
                                              seed=config.seed ^ epoch)
            order = np.random.default_rng([config.seed, 7, epoch]).permutation(len(positives))
            sums = {"total": 0.0, "embed": 0.0, "image": 0.0, "text": 0.0, "cat": 0.0}
            n_batches = 0
            for start in range(0, len(order), config.batch_size):
                batch_idx = order[start : start + config.batch_size]
                batch_pairs = [positives[i] for i in batch_idx]
                batch_pairs += [negatives[i] for i in batch_idx]
                try:
                    losses = _train_batch(
                        model, batch_pairs, images, bows, row_of, weights, config,
                        epoch, n_batches,
                    )
                except NumericError as exc:
                    raise NumericError(
                        f"training aborted at epoch {epoch}, batch {n_batches}: {exc}"
                    ) from exc
                for key, value in losses.items():
                    sums[key] += value
                n_batches += 1
                optimizer.step()
                zero_grads(params)

            record = {
                "epoch": epoch,
                **{f"loss_{k}": sums[k] / n_batches for k in sums},
            }
            if valid_split is not None:
                index = ItemIndex.build(model, valid_split)
                auc = evaluation.compatibility_auc(
                    valid_split.outfits, valid_negatives, "cat", model, index
                )
                record["val_auc"] = auc
                improved = auc > best_auc
                if config.convergence_notes:
                    record["improved"] = improved
                if improved:
                    best_auc = auc
                    best_epoch = epoch
                    if config.keep_best:
                        best_values = [p.value.copy() for p in params]
            history.append(record)
            if log_file:
                log_file.write(json.dumps(record, sort_keys=True) + "\n")
                log_file.flush()
    finally:
        if log_file:
            log_file.close()

    if best_values is not None:
        for p, value in zip(params, best_values):
            p.value[...] = value

    threshold_split = valid_split if valid_split is not None else train_split
    _fit_thresholds(model, threshold_split, seed=config.seed + 4242)

    metrics = {
        "epochs_run": config.epochs,
        "final_loss": history[-1]["loss_total"],
        "best_val_auc": None if best_epoch is None else best_auc,
        "best_epoch": best_epoch,
        "history": history,
    }
    return checkpoint_from_model(model, train_config=config, metrics=metrics)


def _train_batch(model, batch_pairs, images, bows, row_of, weights, config,
                 epoch, batch_index):
    unique_rows = sorted({row_of[p.item_a] for p in batch_pairs}
                         | {row_of[p.item_b] for p in batch_pairs})
    local = {row: i for i, row in enumerate(unique_rows)}
    rows = np.asarray(unique_rows, dtype=np.int64)

    vi, cache_img = model.image_backbone.forward_train(images[rows])
    vt, cache_txt = model.text_backbone.forward_train(bows[rows])

    m = len(unique_rows)
    rng = np.random.default_rng([config.seed, 13, epoch, batch_index])
    offset = int(rng.integers(1, m)) if m > 1 else 0
    neg = (np.arange(m) + offset) % m if m > 1 else None

    d_vi = np.zeros_like(vi)
    d_vt = np.zeros_like(vt)
    losses = {"embed": 0.0, "image": 0.0, "text": 0.0, "cat": 0.0}

    if neg is not None:
        before = {p.name: p.grad.copy() for p in model.image_embedder.params()
                  + model.text_embedder.params()}
        loss_embed, _, g_vi, g_vt = embedding_loss_and_grads(
            vi, vt, neg, model.image_embedder, model.text_embedder,
            margin=config.margin, l2_coeff=config.l2_coeff,
            l2_scope=model.config.l2_scope,
        )
        losses["embed"] = loss_embed
        w = weights["embed"]
        d_vi += w * g_vi
        d_vt += w * g_vt
        if w != 1.0:
            for p in model.image_embedder.params() + model.text_embedder.params():
                p.grad[...] = before[p.name] + w * (p.grad - before[p.name])

    a_rows, b_rows, labels = _pair_rows(batch_pairs, row_of)
    a_local = np.asarray([local[r] for r in a_rows], dtype=np.int64)
    b_local = np.asarray([local[r] for r in b_rows], dtype=np.int64)
    d_f = model.config.feature_dim
    for mode in DISCRIMINATOR_MODES:
        disc = model.discriminators[mode]
        feats = model.mode_features(vi, vt, mode)
        before = {p.name: p.grad.copy() for p in disc.params()}
        loss_mode, d_fa, d_fb = disc.loss_and_grads(feats[a_local], feats[b_local], labels)
        losses[mode] = loss_mode
        w = weights[mode]
        if w != 1.0:
            for p in disc.params():
                p.grad[...] = before[p.name] + w * (p.grad - before[p.name])
        d_feats = np.zeros_like(feats)
        np.add.at(d_feats, a_local, w * d_fa)
        np.add.at(d_feats, b_local, w * d_fb)
        if mode == "image":
            d_vi += d_feats
        elif mode == "text":
            d_vt += d_feats
        else:
            d_vi += d_feats[:, :d_f]
            d_vt += d_feats[:, d_f:]

    total = sum(weights[k] * losses[k] for k in losses)
    if not np.isfinite(total):
        raise NumericError(
            "non-finite loss components: "
            + ", ".join(f"{k}={losses[k]:.6g}" for k in losses)
        )

    model.image_backbone.backward(cache_img, d_vi)
    model.text_backbone.backward(cache_txt, d_vt)
    losses["total"] = total
    return losses


def _fit_thresholds(model: OutfitModel, split: DatasetSplit, seed: int) -> None:
    positives = generate_positive_pairs(split.outfits)
    if not positives:
        return
    try:
        negatives = sample_negative_pairs(positives, split.items, seed=seed)
    except Exception:
        return  # tiny splits may not support threshold fitting
    index = ItemIndex.build(model, split)
    pairs = positives + negatives
    labels = np.asarray([p.label for p in pairs], dtype=np.float64)
    a_rows = np.asarray([index.row_of[p.item_a] for p in pairs])
    b_rows = np.asarray([index.row_of[p.item_b] for p in pairs])
    for mode in DISCRIMINATOR_MODES:
        feats = index.features_for_mode(model, mode)
        scores = model.discriminate_features(feats[a_rows], feats[b_rows], mode)
        model.thresholds[mode] = select_threshold(scores, labels)


# ---------------------------------------------------------------------------
# gradient-check suite
# ---------------------------------------------------------------------------


def gradcheck_suite(seed: int = 0, h: float = 1e-5, probes_per_param: int = 5) -> dict:
    """Finite-difference verification of every analytic gradient path.

    Uses a scaled-down model so the whole suite runs in seconds at double
    precision. Returns per-section, per-tensor max relative errors plus
    the full parameter census.
    """
    rng = np.random.default_rng([seed, 99])
    config = ModelConfig(
        feature_dim=6, embed_dim=5, resolution=8, channels=(4, 5, 6),
        text_buckets=32, text_hidden=7, embed_hidden=6, disc_hidden=(8, 5),
    )
    model = OutfitModel(config, ["tops", "bottoms"], seed=seed)
    report: dict = {"sections": {}, "params": [p.name for p in model.params()]}

    # triplet hinge: gradients w.r.t. the three input vectors
    a = rng.normal(size=4)
    p_vec = a + 0.5 * rng.normal(size=4)
    n_vec = a + 0.6 * rng.normal(size=4)
    margin = 1.0
    value, da, dp, dn = triplet_loss_grads(a, p_vec, n_vec, margin)
    if value <= 1e-3:  # keep the probe away from the hinge kink
        n_vec = a.copy()
        value, da, dp, dn = triplet_loss_grads(a, p_vec, n_vec, margin)
    worst = 0.0
    from .embedding import triplet_loss

    for vec, grad in ((a, da), (p_vec, dp), (n_vec, dn)):
        for i in range(vec.size):
            orig = vec[i]
            vec[i] = orig + h
            up = triplet_loss(a, p_vec, n_vec, margin)
            vec[i] = orig - h
            down = triplet_loss(a, p_vec, n_vec, margin)
            vec[i] = orig
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(grad[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(grad[i] - numeric) / denom)
    report["sections"]["triplet_loss"] = {"inputs": worst}

    batch = 6
    vi_in = rng.normal(size=(batch, config.feature_dim))
    vt_in = vi_in + 0.3 * rng.normal(size=(batch, config.feature_dim))
    neg = (np.arange(batch) + 2) % batch
    embed_params = model.image_embedder.params() + model.text_embedder.params()

    def embed_loss_fn():
        zero_grads(embed_params)
        loss, _, _, _ = embedding_loss_and_grads(
            vi_in, vt_in, neg, model.image_embedder, model.text_embedder,
            margin=1.0, l2_coeff=5e-4, l2_scope=config.l2_scope,
        )
        return loss

    report["sections"]["embedding_loss"] = finite_difference_check(
        embed_loss_fn, embed_params, rng, probes_per_param=probes_per_param, h=h
    )

    disc = model.discriminators["cat"]
    fa = rng.normal(size=(batch, 2 * config.feature_dim))
    fb = rng.normal(size=(batch, 2 * config.feature_dim))
    labels = (np.arange(batch) % 2).astype(np.float64)

    def disc_loss_fn():
        zero_grads(disc.params())
        loss, _, _ = disc.loss_and_grads(fa, fb, labels)
        return loss

    report["sections"]["discriminator_loss"] = finite_difference_check(
        disc_loss_fn, disc.params(), rng, probes_per_param=probes_per_param, h=h
    )

    probe_imgs = rng.uniform(size=(2, 3, config.resolution, config.resolution))
    probe_proj = rng.normal(size=(2, config.feature_dim))

    def image_loss_fn():
        zero_grads(model.image_backbone.params())
        out, cache = model.image_backbone.forward_train(probe_imgs)
        model.image_backbone.backward(cache, probe_proj)
        return float(np.sum(out * probe_proj))

    report["sections"]["image_backbone"] = finite_difference_check(
        image_loss_fn, model.image_backbone.params(), rng,
        probes_per_param=probes_per_param, h=h,
    )

    probe_bow = model.text_backbone.featurize(
        ["red floral dress", "leather boots with buckle"]
    )
    probe_proj_t = rng.normal(size=(2, config.feature_dim))

    def text_loss_fn():
        zero_grads(model.text_backbone.params())
        out, cache = model.text_backbone.forward_train(probe_bow)
        model.text_backbone.backward(cache, probe_proj_t)
        return float(np.sum(out * probe_proj_t))

    report["sections"]["text_backbone"] = finite_difference_check(
        text_loss_fn, model.text_backbone.params(), rng,
        probes_per_param=probes_per_param, h=h,
    )

    worst_overall = report["sections"]["triplet_loss"]["inputs"]
    for section in ("embedding_loss", "discriminator_loss", "image_backbone", "text_backbone"):
        worst_overall = max(worst_overall, max(report["sections"][section].values()))
    report["max_relative_error"] = worst_overall
    return report
