"""Item encoders: raster -> image feature, text -> text feature.

Two self-contained reference backbones keep the package trainable
offline; large pretrained models plug in through
:class:`PretrainedAdapter` instead of being vendored.

Reference image backbone (all shapes derive from the constructor args):
three 3x3 stride-2 conv blocks with ReLU (channels 16/32/64 by default),
global average pooling, and a linear head to ``feature_dim``. Input
resolution must be divisible by 8.

Reference text backbone: bag-of-words over FNV-1a token hashing into
``buckets`` counts (L2-normalized), followed by a two-layer perceptron
to ``feature_dim``. Text with no tokens falls back to a reserved
empty-sequence token, so the empty string still encodes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nn import Conv2d, GlobalAvgPool, Linear, Param, ReLU, Sequential, mlp

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_EMPTY_TOKEN = "\x00empty"


@dataclass
class BackboneSpec:
    kind: str  # "reference-cnn" | "reference-text" | "external-pretrained"
    output_dim: int
    trainable: bool


def _fnv1a(token: str) -> int:
    h = 0x811C9DC5
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; a reserved token when none exist."""
    tokens = _TOKEN_RE.findall(text.lower())
    return tokens or [_EMPTY_TOKEN]


class ImageBackbone:
    """Small trainable CNN mapping (N, 3, R, R) rasters to (N, feature_dim)."""

    kind = "reference-cnn"

    def __init__(self, seed: int, feature_dim: int = 128, resolution: int = 64,
                 channels: tuple[int, int, int] = (16, 32, 64)):
        if resolution % 8 != 0 or resolution < 8:
            raise ShapeError(f"resolution must be a positive multiple of 8, got {resolution}")
        rng = np.random.default_rng([seed, 101])
        c1, c2, c3 = channels
        self.feature_dim = feature_dim
        self.resolution = resolution
        self.channels = channels
        self.net = Sequential([
            Conv2d("image_backbone.conv0", 3, c1, rng, stride=2),
            ReLU(),
            Conv2d("image_backbone.conv1", c1, c2, rng, stride=2),
            ReLU(),
            Conv2d("image_backbone.conv2", c2, c3, rng, stride=2),
            ReLU(),
            GlobalAvgPool(),
            Linear("image_backbone.head", c3, feature_dim, rng, init="lecun"),
        ])

    def _check(self, images: np.ndarray):
        if images.ndim != 4 or images.shape[1:] != (3, self.resolution, self.resolution):
            raise ShapeError(
                f"expected images of shape (N, 3, {self.resolution}, {self.resolution}), "
                f"got {images.shape}"
            )

    def forward(self, images: np.ndarray) -> np.ndarray:
        self._check(images)
        return self.net.forward(images)

    def forward_train(self, images: np.ndarray):
        self._check(images)
        return self.net.forward_train(images)

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        return self.net.backward(cache, grad)

    def params(self) -> list[Param]:
        return self.net.params()

    def spec(self) -> BackboneSpec:
        return BackboneSpec(kind=self.kind, output_dim=self.feature_dim, trainable=True)


class TextBackbone:
    """Token-hashing bag-of-words followed by a 2-layer perceptron."""

    kind = "reference-text"

    def __init__(self, seed: int, feature_dim: int = 128, buckets: int = 2048,
                 hidden: int = 256):
        rng = np.random.default_rng([seed, 202])
        self.feature_dim = feature_dim
        self.buckets = buckets
        self.hidden = hidden
        self.net = mlp("text_backbone", [buckets, hidden, feature_dim], rng)

    def featurize(self, texts: list[str]) -> np.ndarray:
        """Hash token counts into (N, buckets), L2-normalized per row."""
        bow = np.zeros((len(texts), self.buckets))
        for row, text in enumerate(texts):
            for token in tokenize(text):
                bow[row, _fnv1a(token) % self.buckets] += 1.0
        norms = np.linalg.norm(bow, axis=1, keepdims=True)
        return bow / norms

    def forward_bow(self, bow: np.ndarray) -> np.ndarray:
        return self.net.forward(bow)

    def forward(self, texts: list[str]) -> np.ndarray:
        return self.forward_bow(self.featurize(texts))

    def forward_train(self, bow: np.ndarray):
        return self.net.forward_train(bow)

    def backward(self, cache, grad: np.ndarray) -> np.ndarray:
        return self.net.backward(cache, grad)

    def params(self) -> list[Param]:
        return self.net.params()

    def spec(self) -> BackboneSpec:
        return BackboneSpec(kind=self.kind, output_dim=self.feature_dim, trainable=True)


class PretrainedAdapter:
    """Wraps an external frozen feature extractor behind a trained projection.

    ``features_fn`` maps a batch of inputs to (N, output_dim) arrays; only
    the linear projection to ``feature_dim`` is trainable or serialized.
    """

    kind = "external-pretrained"

    def __init__(self, features_fn, output_dim: int, feature_dim: int, seed: int):
        rng = np.random.default_rng([seed, 303])
        self.features_fn = features_fn
        self.output_dim = output_dim
        self.feature_dim = feature_dim
        self.projection = Linear("pretrained.projection", output_dim, feature_dim, rng,
                                 init="lecun")

    def forward(self, inputs) -> np.ndarray:
        feats = np.asarray(self.features_fn(inputs), dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.output_dim:
            raise ShapeError(f"adapter expected (N, {self.output_dim}) features, got {feats.shape}")
        return self.projection.forward(feats)

    def params(self) -> list[Param]:
        return self.projection.params()

    def spec(self) -> BackboneSpec:
        return BackboneSpec(kind=self.kind, output_dim=self.feature_dim, trainable=False)


def reference_backbones(seed: int, feature_dim: int = 128, resolution: int = 64,
                        buckets: int = 2048, text_hidden: int = 256,
                        channels: tuple[int, int, int] = (16, 32, 64),
                        ) -> tuple[ImageBackbone, TextBackbone]:
    """Deterministically initialized reference image/text backbones."""
    image = ImageBackbone(seed, feature_dim=feature_dim, resolution=resolution,
                          channels=channels)
    text = TextBackbone(seed, feature_dim=feature_dim, buckets=buckets, hidden=text_hidden)
    return image, text


def _require_finite_feature(vec: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(vec)):
        from .errors import NumericError

        raise NumericError(f"{what} produced non-finite values")
    return vec


def encode_image(image: np.ndarray, backbone: ImageBackbone) -> np.ndarray:
    """Encode one (R, R, 3) raster into a (feature_dim,) vector."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"expected an (R, R, 3) raster, got shape {image.shape}")
    batch = image.transpose(2, 0, 1)[None, :, :, :]
    return _require_finite_feature(backbone.forward(batch)[0], "image encoder")


def encode_images(images: np.ndarray, backbone: ImageBackbone) -> np.ndarray:
    """Encode a stack of (N, R, R, 3) rasters into (N, feature_dim)."""
    batch = np.asarray(images, dtype=np.float64).transpose(0, 3, 1, 2)
    return _require_finite_feature(backbone.forward(batch), "image encoder")


def encode_text(text: str, backbone: TextBackbone) -> np.ndarray:
    """Encode one string (may be empty) into a (feature_dim,) vector."""
    return _require_finite_feature(backbone.forward([text])[0], "text encoder")
