"""The trained bundle: encoders, embedders, discriminators, and an item index.

:class:`OutfitModel` owns every trainable component and a stable,
name-addressable parameter list (the checkpoint and optimizer contract).
:class:`ItemIndex` precomputes per-item features and coherence-space
vectors for a catalog split, which generation, evaluation, search, and
the service all share read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import DatasetSplit, FashionItem
from .compatibility import PairDiscriminator, normalize_transforms
from .embedding import embed_query, make_embedder
from .encoders import ImageBackbone, TextBackbone
from .errors import ConfigError, ModalityError
from .nn import Param

DISCRIMINATOR_MODES = ("image", "text", "cat")


@dataclass
class ModelConfig:
    feature_dim: int = 128
    embed_dim: int = 128
    resolution: int = 64
    channels: tuple[int, int, int] = (16, 32, 64)
    text_buckets: int = 2048
    text_hidden: int = 256
    embed_hidden: int = 128
    disc_hidden: tuple[int, int] = (256, 64)
    transforms: tuple[str, ...] = ("dot", "sum", "diff")
    item_repr: str = "image"  # coherence-space item vector: "image" or "mean"
    l2_scope: str = "output"

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.disc_hidden = tuple(self.disc_hidden)
        self.transforms = normalize_transforms(self.transforms)
        if self.item_repr not in ("image", "mean"):
            raise ConfigError(f"item_repr must be 'image' or 'mean', got {self.item_repr!r}")

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "embed_dim": self.embed_dim,
            "resolution": self.resolution,
            "channels": list(self.channels),
            "text_buckets": self.text_buckets,
            "text_hidden": self.text_hidden,
            "embed_hidden": self.embed_hidden,
            "disc_hidden": list(self.disc_hidden),
            "transforms": list(self.transforms),
            "item_repr": self.item_repr,
            "l2_scope": self.l2_scope,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        return cls(
            feature_dim=raw["feature_dim"],
            embed_dim=raw["embed_dim"],
            resolution=raw["resolution"],
            channels=tuple(raw["channels"]),
            text_buckets=raw["text_buckets"],
            text_hidden=raw["text_hidden"],
            embed_hidden=raw["embed_hidden"],
            disc_hidden=tuple(raw["disc_hidden"]),
            transforms=tuple(raw["transforms"]),
            item_repr=raw["item_repr"],
            l2_scope=raw["l2_scope"],
        )


class OutfitModel:
    """All trainable components plus the decision thresholds."""

    def __init__(self, config: ModelConfig, type_vocabulary: list[str], seed: int = 0):
        self.config = config
        self.type_vocabulary = list(type_vocabulary)
        self.seed = seed
        self.image_backbone = ImageBackbone(
            seed, feature_dim=config.feature_dim, resolution=config.resolution,
            channels=config.channels,
        )
        self.text_backbone = TextBackbone(
            seed, feature_dim=config.feature_dim, buckets=config.text_buckets,
            hidden=config.text_hidden,
        )
        rng_embed = np.random.default_rng([seed, 404])
        self.image_embedder = make_embedder(
            "image_embedder", config.feature_dim, config.embed_dim, config.embed_hidden,
            rng_embed,
        )
        self.text_embedder = make_embedder(
            "text_embedder", config.feature_dim, config.embed_dim, config.embed_hidden,
            rng_embed,
        )
        rng_disc = np.random.default_rng([seed, 505])
        self.discriminators = {
            "image": PairDiscriminator("disc_image", config.feature_dim, rng_disc,
                                       hidden=config.disc_hidden, transforms=config.transforms),
            "text": PairDiscriminator("disc_text", config.feature_dim, rng_disc,
                                      hidden=config.disc_hidden, transforms=config.transforms),
            "cat": PairDiscriminator("disc_cat", 2 * config.feature_dim, rng_disc,
                                     hidden=config.disc_hidden, transforms=config.transforms),
        }
        self.thresholds: dict[str, float] = {}

    # -- parameters ---------------------------------------------------------

    def params(self) -> list[Param]:
        """Every trainable tensor in a stable, checkpoint-defining order."""
        out: list[Param] = []
        out.extend(self.image_backbone.params())
        out.extend(self.text_backbone.params())
        out.extend(self.image_embedder.params())
        out.extend(self.text_embedder.params())
        for mode in DISCRIMINATOR_MODES:
            out.extend(self.discriminators[mode].params())
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    # -- encoding -----------------------------------------------------------

    def features_for_items(self, items: list[FashionItem], batch_size: int = 256):
        """Encode items into aligned (N, d_f) image and text feature arrays."""
        n = len(items)
        vi = np.empty((n, self.config.feature_dim))
        vt = np.empty((n, self.config.feature_dim))
        for start in range(0, n, batch_size):
            chunk = items[start : start + batch_size]
            images = np.stack([it.image for it in chunk]).transpose(0, 3, 1, 2)
            vi[start : start + len(chunk)] = self.image_backbone.forward(images)
            vt[start : start + len(chunk)] = self.text_backbone.forward(
                [it.text for it in chunk]
            )
        return vi, vt

    def embeddings_from_features(self, vi: np.ndarray, vt: np.ndarray):
        return self.image_embedder.forward(vi), self.text_embedder.forward(vt)

    def item_vectors(self, ui: np.ndarray, ut: np.ndarray) -> np.ndarray:
        """Coherence-space vector per item, per the configured representation."""
        if self.config.item_repr == "mean":
            return 0.5 * (ui + ut)
        return ui

    def embed_query(self, query_text: str) -> np.ndarray:
        return embed_query(query_text, self.text_backbone, self.text_embedder)

    # -- discrimination -----------------------------------------------------

    def mode_features(self, vi: np.ndarray | None, vt: np.ndarray | None,
                      mode: str) -> np.ndarray:
        """Select/stack modality features for a discriminator mode."""
        if mode not in DISCRIMINATOR_MODES:
            raise ConfigError(f"unknown discriminator mode {mode!r}")
        if mode == "image":
            if vi is None:
                raise ModalityError("mode 'image' needs image features")
            return vi
        if mode == "text":
            if vt is None:
                raise ModalityError("mode 'text' needs text features")
            return vt
        if vi is None or vt is None:
            raise ModalityError("mode 'cat' needs both image and text features")
        return np.concatenate([vi, vt], axis=-1)

    def discriminate_features(self, fa: np.ndarray, fb: np.ndarray, mode: str) -> np.ndarray:
        """Scores in (0, 1) for row-aligned mode-feature batches."""
        return self.discriminators[mode].scores(fa, fb)

    def discriminate_items(self, x: FashionItem, y: FashionItem, mode: str = "cat") -> float:
        vi, vt = self.features_for_items([x, y])
        feats = self.mode_features(vi, vt, mode)
        return float(self.discriminators[mode].scores(feats[0:1], feats[1:2])[0])


class ItemIndex:
    """Precomputed per-item features and vectors for one catalog split."""

    def __init__(self, ids: list[str], items: dict[str, FashionItem],
                 vi: np.ndarray, vt: np.ndarray, ui: np.ndarray, ut: np.ndarray,
                 vectors: np.ndarray):
        self.ids = ids
        self.items = items
        self.row_of = {item_id: row for row, item_id in enumerate(ids)}
        self.image_features = vi
        self.text_features = vt
        self.image_embeddings = ui
        self.text_embeddings = ut
        self.vectors = vectors
        self.type_rows: dict[str, np.ndarray] = {}
        for semantic_type in sorted({items[i].semantic_type for i in ids}):
            rows = [row for row, item_id in enumerate(ids)
                    if items[item_id].semantic_type == semantic_type]
            self.type_rows[semantic_type] = np.asarray(rows, dtype=np.int64)

    @classmethod
    def build(cls, model: OutfitModel, split: DatasetSplit) -> "ItemIndex":
        ids = sorted(split.items)
        items = [split.items[i] for i in ids]
        vi, vt = model.features_for_items(items)
        ui, ut = model.embeddings_from_features(vi, vt)
        vectors = model.item_vectors(ui, ut)
        return cls(ids, split.items, vi, vt, ui, ut, vectors)

    def features_for_mode(self, model: OutfitModel, mode: str) -> np.ndarray:
        return model.mode_features(self.image_features, self.text_features, mode)

    def vector_of(self, item_id: str) -> np.ndarray:
        return self.vectors[self.row_of[item_id]]

    def rows_of_type(self, semantic_type: str) -> np.ndarray:
        return self.type_rows.get(semantic_type, np.empty(0, dtype=np.int64))
