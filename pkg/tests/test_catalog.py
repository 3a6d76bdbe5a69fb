"""Dataset loading, pair construction, and the synthetic generator."""

import itertools
import json

import numpy as np
import pytest
from PIL import Image

from outfitgen.catalog import (
    Outfit,
    SyntheticConfig,
    convert_polyvore,
    generate_positive_pairs,
    generate_synthetic_dataset,
    load_dataset,
    sample_negative_pairs,
)
from outfitgen.errors import (
    ConfigError,
    DataIntegrityError,
    DatasetFormatError,
    SamplingExhaustionError,
    VocabularyError,
)


def make_dataset_dir(root, items, outfits_by_split, types=None, resolution=8):
    (root / "images").mkdir(parents=True, exist_ok=True)
    entries = []
    for item_id, semantic_type in items:
        rel = f"images/{item_id}.png"
        img = Image.fromarray(
            np.full((resolution, resolution, 3), 100, dtype=np.uint8), mode="RGB"
        )
        img.save(root / rel)
        entries.append(
            {
                "item_id": item_id,
                "title": f"title {item_id}",
                "description": "",
                "semantic_type": semantic_type,
                "fine_category": None,
                "image": rel,
            }
        )
    (root / "items.json").write_text(json.dumps(entries))
    for split, outfits in outfits_by_split.items():
        (root / f"outfits_{split}.json").write_text(
            json.dumps([{"outfit_id": oid, "items": ids} for oid, ids in outfits])
        )
    if types is not None:
        (root / "types.json").write_text(json.dumps(types))
    return root


class TestLoadDataset:
    def test_minimal_fixture(self, tmp_path):
        make_dataset_dir(
            tmp_path,
            items=[("a", "tops"), ("b", "bottoms"), ("c", "shoes")],
            outfits_by_split={"train": [("o1", ["a", "b", "c"])]},
        )
        split = load_dataset(tmp_path, "train", resolution=8)
        assert len(split.items) == 3
        assert len(split.outfits) == 1
        assert split.items["a"].image.shape == (8, 8, 3)
        assert split.items["a"].image.dtype == np.float64
        assert 0.0 <= split.items["a"].image.min() <= split.items["a"].image.max() <= 1.0
        assert split.type_vocabulary == sorted(["tops", "bottoms", "shoes"])

    def test_missing_items_file_named(self, tmp_path):
        (tmp_path / "images").mkdir()
        (tmp_path / "outfits_train.json").write_text("[]")
        with pytest.raises(DatasetFormatError, match="items.json"):
            load_dataset(tmp_path, "train")

    def test_missing_outfits_file_named(self, tmp_path):
        make_dataset_dir(tmp_path, items=[("a", "tops"), ("b", "tops")],
                         outfits_by_split={})
        with pytest.raises(DatasetFormatError, match="outfits_test.json"):
            load_dataset(tmp_path, "test")

    def test_unknown_item_reference_named(self, tmp_path):
        make_dataset_dir(
            tmp_path,
            items=[("a", "tops"), ("b", "bottoms")],
            outfits_by_split={"train": [("o1", ["a", "missing_id"])]},
        )
        with pytest.raises(DataIntegrityError, match="missing_id"):
            load_dataset(tmp_path, "train", resolution=8)

    def test_unknown_semantic_type(self, tmp_path):
        make_dataset_dir(
            tmp_path,
            items=[("a", "hats"), ("b", "tops")],
            outfits_by_split={"train": [("o1", ["a", "b"])]},
            types=["tops", "bottoms"],
        )
        with pytest.raises(VocabularyError, match="hats"):
            load_dataset(tmp_path, "train", resolution=8)

    def test_duplicate_item_in_outfit(self, tmp_path):
        make_dataset_dir(
            tmp_path,
            items=[("a", "tops"), ("b", "tops")],
            outfits_by_split={"train": [("o1", ["a", "a"])]},
        )
        with pytest.raises(DataIntegrityError, match="repeats"):
            load_dataset(tmp_path, "train", resolution=8)

    def test_disjoint_flag(self, tmp_path):
        make_dataset_dir(
            tmp_path,
            items=[("a", "tops"), ("b", "bottoms"), ("c", "tops"), ("d", "bottoms")],
            outfits_by_split={
                "train": [("o1", ["a", "b"])],
                "test": [("o2", ["c", "d"])],
            },
        )
        assert load_dataset(tmp_path, "train", resolution=8).disjoint is True

        overlapping = tmp_path / "overlap"
        make_dataset_dir(
            overlapping,
            items=[("a", "tops"), ("b", "bottoms"), ("d", "bottoms")],
            outfits_by_split={
                "train": [("o1", ["a", "b"])],
                "test": [("o2", ["a", "d"])],
            },
        )
        assert load_dataset(overlapping, "train", resolution=8).disjoint is False


class TestPositivePairs:
    def test_three_item_outfit(self):
        pairs = generate_positive_pairs([Outfit("o", ["a", "b", "c"], "train")])
        got = {frozenset((p.item_a, p.item_b)) for p in pairs}
        assert got == {frozenset(x) for x in itertools.combinations("abc", 2)}
        assert all(p.label == 1 for p in pairs)

    def test_deduplication(self):
        outfits = [Outfit("o1", ["a", "b"], "train"), Outfit("o2", ["a", "b"], "train")]
        pairs = generate_positive_pairs(outfits)
        assert len(pairs) == 1

    def test_empty_input(self):
        assert generate_positive_pairs([]) == []

    def test_thousand_outfits_match_bruteforce(self, tiny_splits):
        config = SyntheticConfig(n_themes=4, items_per_theme=12, types=("tops", "bottoms", "shoes"),
                                 outfit_len=3, n_outfits=1000, noise=0.1, seed=9, resolution=8)
        outfits = generate_synthetic_dataset(config)["train"].outfits
        pairs = generate_positive_pairs(outfits)
        brute = set()
        for outfit in outfits:  # independent double loop
            for x, y in itertools.combinations(outfit.item_ids, 2):
                brute.add(frozenset((x, y)))
        assert {frozenset((p.item_a, p.item_b)) for p in pairs} == brute
        assert len(pairs) == len(brute)


class TestNegativePairs:
    def test_seeded_determinism(self, tiny_splits):
        split = tiny_splits["train"]
        positives = generate_positive_pairs(split.outfits)
        first = sample_negative_pairs(positives, split.items, seed=7)
        second = sample_negative_pairs(positives, split.items, seed=7)
        assert first == second
        assert sample_negative_pairs(positives, split.items, seed=8) != first

    def test_exhaustion_error_names_type(self):
        # only same-type candidate for "b" co-occurs with "a" -> no negative exists
        from outfitgen.catalog import FashionItem

        def stub(item_id, semantic_type):
            return FashionItem(item_id=item_id, image=np.zeros((4, 4, 3)), title="t",
                               description="", semantic_type=semantic_type)

        items = {
            "a": stub("a", "tops"),
            "b": stub("b", "bottoms"),
            "c": stub("c", "bottoms"),
        }
        outfits = [Outfit("o1", ["a", "b"], "train"), Outfit("o2", ["a", "c"], "train")]
        positives = generate_positive_pairs(outfits)
        with pytest.raises(SamplingExhaustionError, match="bottoms"):
            sample_negative_pairs(positives, items, seed=0)

    def test_all_negatives_valid_bruteforce(self):
        config = SyntheticConfig(n_themes=4, items_per_theme=60, types=("tops", "bottoms", "shoes"),
                                 outfit_len=3, n_outfits=6000, noise=0.1, seed=3, resolution=8)
        split = generate_synthetic_dataset(config)["train"]
        positives = generate_positive_pairs(split.outfits)
        assert len(positives) >= 10_000
        negatives = sample_negative_pairs(positives, split.items, seed=1)
        co = {}
        for outfit in split.outfits:  # independent co-occurrence oracle
            for x in outfit.item_ids:
                co.setdefault(x, set()).update(outfit.item_ids)
        for pos, neg in zip(positives, negatives):
            assert neg.item_a == pos.item_a
            assert neg.label == 0
            assert neg.item_b != pos.item_b
            assert split.items[neg.item_b].semantic_type == split.items[pos.item_b].semantic_type
            assert neg.item_b not in co[neg.item_a]


class TestSyntheticDataset:
    def test_deterministic(self):
        config = SyntheticConfig(n_themes=2, items_per_theme=8, types=("tops", "bottoms"),
                                 outfit_len=2, n_outfits=12, seed=1, resolution=16)
        a = generate_synthetic_dataset(config)
        b = generate_synthetic_dataset(config)
        for split in ("train", "valid", "test"):
            assert [o.item_ids for o in a[split].outfits] == [o.item_ids for o in b[split].outfits]
            assert sorted(a[split].items) == sorted(b[split].items)
            for item_id in a[split].items:
                np.testing.assert_array_equal(a[split].items[item_id].image,
                                              b[split].items[item_id].image)
                assert a[split].items[item_id].text == b[split].items[item_id].text

    def test_zero_noise_means_pure_themes(self):
        config = SyntheticConfig(n_themes=3, items_per_theme=8, types=("tops", "bottoms"),
                                 outfit_len=2, n_outfits=40, noise=0.0, seed=2, resolution=16)
        splits = generate_synthetic_dataset(config)
        for split in splits.values():
            for outfit in split.outfits:
                themes = {split.items[i].fine_category for i in outfit.item_ids}
                assert len(themes) == 1

    def test_theme_separation_in_image_statistics(self):
        config = SyntheticConfig(seed=4, items_per_theme=10, n_outfits=40, resolution=32)
        split = generate_synthetic_dataset(config)["train"]
        stats, themes = [], []
        for item in split.items.values():
            stats.append(item.image.mean(axis=(0, 1)))
            themes.append(item.fine_category)
        stats = np.stack(stats)
        themes = np.asarray(themes)
        within, cross = [], []
        for i in range(len(stats)):
            for j in range(i + 1, len(stats)):
                d = float(np.linalg.norm(stats[i] - stats[j]))
                (within if themes[i] == themes[j] else cross).append(d)
        assert np.mean(within) < np.mean(cross)

    def test_splits_are_item_disjoint(self, tiny_splits):
        ids = {s: set(tiny_splits[s].items) for s in tiny_splits}
        assert not (ids["train"] & ids["valid"])
        assert not (ids["train"] & ids["test"])
        assert not (ids["valid"] & ids["test"])
        assert all(tiny_splits[s].disjoint for s in tiny_splits)

    def test_outfit_len_exceeding_types_rejected(self):
        with pytest.raises(ConfigError):
            generate_synthetic_dataset(
                SyntheticConfig(types=("tops", "bottoms"), outfit_len=3)
            )

    def test_write_then_load_round_trip(self, tiny_splits, tiny_dataset_dir):
        loaded = load_dataset(tiny_dataset_dir, "train", resolution=16)
        original = tiny_splits["train"]
        assert sorted(loaded.items) == sorted(original.items)
        assert [o.item_ids for o in loaded.outfits] == [o.item_ids for o in original.outfits]
        assert loaded.type_vocabulary == list(original.type_vocabulary)
        # 8-bit PNG round trip quantizes to 1/255
        for item_id in loaded.items:
            np.testing.assert_allclose(
                loaded.items[item_id].image, original.items[item_id].image, atol=0.51 / 255
            )


class TestConvertPolyvore:
    def test_mock_download(self, tmp_path):
        src = tmp_path / "download"
        (src / "images").mkdir(parents=True)
        (src / "nondisjoint").mkdir()
        metadata = {
            "101": {"title": "Red top", "description": "a red top",
                    "semantic_category": "tops", "category_id": "11"},
            "102": {"title": "", "url_name": "blue jeans", "description": "",
                    "semantic_category": "bottoms", "category_id": "27"},
            "103": {"title": "Boots", "description": "leather",
                    "semantic_category": "shoes", "category_id": "42"},
        }
        (src / "polyvore_item_metadata.json").write_text(json.dumps(metadata))
        for item_id in metadata:
            Image.fromarray(np.zeros((10, 10, 3), dtype=np.uint8)).save(
                src / "images" / f"{item_id}.jpg"
            )
        outfit = [{"set_id": "9001", "items": [
            {"item_id": "101", "index": 1},
            {"item_id": "102", "index": 2},
            {"item_id": "103", "index": 3},
        ]}]
        for split in ("train", "valid", "test"):
            (src / "nondisjoint" / f"{split}.json").write_text(json.dumps(outfit))

        out = tmp_path / "converted"
        counts = convert_polyvore(src, out, layout="nondisjoint")
        assert counts == {"train": 1, "valid": 1, "test": 1, "items": 3}
        split = load_dataset(out, "train", resolution=8)
        assert sorted(split.items) == ["101", "102", "103"]
        assert split.items["102"].title == "blue jeans"  # url_name fallback
        assert split.items["101"].semantic_type == "tops"
