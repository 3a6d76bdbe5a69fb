"""Regenerate tests/data/goldens.npz from the naive oracles.

Run from the repository root: ``python3 tests/data/make_goldens.py``.
The frozen values pin the behavior observed at the first verified build;
tests compare both the package output and a live oracle recomputation
against them.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import oracles  # noqa: E402
from oracles import GOLDEN_SEED, fixture_image  # noqa: E402
from outfitgen.compatibility import PairDiscriminator  # noqa: E402
from outfitgen.embedding import make_embedder  # noqa: E402
from outfitgen.encoders import ImageBackbone, TextBackbone  # noqa: E402


def main():
    out = {}

    backbone = ImageBackbone(GOLDEN_SEED, feature_dim=6, resolution=8, channels=(4, 5, 6))
    out["image_feature"] = oracles.cnn_forward(backbone, fixture_image())

    text_backbone = TextBackbone(GOLDEN_SEED, feature_dim=6, buckets=64, hidden=7)
    out["text_feature"] = oracles.text_forward(text_backbone, "red floral summer dress")

    rng = np.random.default_rng(GOLDEN_SEED)
    image_embedder = make_embedder("image_embedder", 6, 5, 4, np.random.default_rng(GOLDEN_SEED))
    text_embedder = make_embedder("text_embedder", 6, 5, 4, np.random.default_rng(GOLDEN_SEED + 1))
    probe = rng.normal(size=6)
    out["probe_feature"] = probe
    out["image_embedding"] = oracles.mlp_forward(oracles.linear_layers(image_embedder), probe)

    disc = PairDiscriminator("disc", 6, np.random.default_rng(GOLDEN_SEED), hidden=(8, 5))
    pair_a = rng.normal(size=6)
    pair_b = rng.normal(size=6)
    out["pair_a"] = pair_a
    out["pair_b"] = pair_b
    out["cat_score"] = np.array(oracles.discriminator_score(disc, pair_a, pair_b))

    vi = rng.normal(size=(8, 6))
    vt = vi + 0.4 * rng.normal(size=(8, 6))
    neg = (np.arange(8) + 3) % 8
    out["embed_batch_vi"] = vi
    out["embed_batch_vt"] = vt
    out["embed_batch_neg"] = neg
    out["embedding_loss"] = np.array(
        oracles.embedding_loss(vi, vt, neg, image_embedder, text_embedder,
                               margin=1.0, l2_coeff=5e-4)
    )

    scores = rng.uniform(0.01, 0.99, size=16)
    labels = (np.arange(16) % 2).astype(np.float64)
    out["bce_scores"] = scores
    out["bce_labels"] = labels
    out["bce_loss"] = np.array(oracles.bce(scores, labels))

    path = Path(__file__).with_name("goldens.npz")
    np.savez(path, **out)
    print(f"wrote {path} with {len(out)} entries")


if __name__ == "__main__":
    main()
