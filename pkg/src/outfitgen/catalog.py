"""Item/outfit data model, dataset ingestion, pair construction, synthesis.

Datasets live on disk as UTF-8 JSON plus an image directory:

* ``items.json``      -- array of ``{"item_id", "title", "description",
  "semantic_type", "fine_category", "image"}`` where ``image`` is a path
  relative to the dataset root.
* ``outfits_train.json`` / ``outfits_valid.json`` / ``outfits_test.json``
  -- arrays of ``{"outfit_id", "items": [item_id, ...]}``.
* ``images/``         -- PNG or JPEG files.
* ``types.json``      -- optional declared semantic-type vocabulary; when
  present, items outside it are rejected.

A split's item table holds exactly the items referenced by that split's
outfits. Everything is read-only after loading and safe to share across
threads.
"""

from __future__ import annotations

import colorsys
import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    ConfigError,
    DataIntegrityError,
    DatasetFormatError,
    SamplingExhaustionError,
    VocabularyError,
)

SPLIT_NAMES = ("train", "valid", "test")


@dataclass
class FashionItem:
    """One product: raster, text, and category metadata."""

    item_id: str
    image: np.ndarray  # (R, R, 3) float64 in [0, 1]
    title: str
    description: str
    semantic_type: str
    fine_category: str | None = None
    image_path: str | None = None  # dataset-relative source path, when loaded from disk

    @property
    def text(self) -> str:
        """Title and description joined, the input to the text encoder."""
        return f"{self.title} {self.description}".strip()


@dataclass
class Outfit:
    outfit_id: str
    item_ids: list[str]
    split: str


@dataclass(frozen=True)
class PairSample:
    item_a: str
    item_b: str
    label: int  # 1 = compatible, 0 = incompatible


@dataclass
class DatasetSplit:
    items: dict[str, FashionItem]
    outfits: list[Outfit]
    type_vocabulary: list[str]
    disjoint: bool
    resolution: int

    def items_of_type(self, semantic_type: str) -> list[str]:
        return sorted(i for i, item in self.items.items() if item.semantic_type == semantic_type)


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def _read_json(path: Path):
    if not path.is_file():
        raise DatasetFormatError(f"missing required file: {path.name}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path.name} is not valid JSON: {exc}") from exc


def load_image(path: Path, resolution: int) -> np.ndarray:
    """Decode an image file, bilinear-resize, and scale channels to [0, 1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((resolution, resolution), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float64) / 255.0


def load_dataset(root_path: str | Path, split: str, resolution: int = 64) -> DatasetSplit:
    """Load one split from a dataset directory in the layout described above.

    Only items referenced by the split's outfits are materialized; their
    images are decoded and resized to ``resolution``.
    """
    if split not in SPLIT_NAMES:
        raise ConfigError(f"unknown split {split!r}, expected one of {SPLIT_NAMES}")
    root = Path(root_path)
    raw_items = _read_json(root / "items.json")
    raw_outfits = _read_json(root / f"outfits_{split}.json")
    if not (root / "images").is_dir():
        raise DatasetFormatError("missing required file: images/")

    declared_vocab: list[str] | None = None
    if (root / "types.json").is_file():
        declared_vocab = list(_read_json(root / "types.json"))

    entries: dict[str, dict] = {}
    for entry in raw_items:
        item_id = entry["item_id"]
        if item_id in entries:
            raise DataIntegrityError(f"duplicate item_id in items.json: {item_id!r}")
        if declared_vocab is not None and entry["semantic_type"] not in declared_vocab:
            raise VocabularyError(
                f"item {item_id!r} has semantic_type {entry['semantic_type']!r} "
                f"outside the declared vocabulary"
            )
        entries[item_id] = entry

    outfits: list[Outfit] = []
    referenced: list[str] = []
    seen_ref: set[str] = set()
    missing: list[str] = []
    for raw in raw_outfits:
        ids = list(raw["items"])
        if len(ids) < 2:
            raise DataIntegrityError(f"outfit {raw['outfit_id']!r} has fewer than 2 items")
        if len(set(ids)) != len(ids):
            raise DataIntegrityError(f"outfit {raw['outfit_id']!r} repeats an item_id")
        for item_id in ids:
            if item_id not in entries:
                missing.append(item_id)
            elif item_id not in seen_ref:
                seen_ref.add(item_id)
                referenced.append(item_id)
        outfits.append(Outfit(outfit_id=raw["outfit_id"], item_ids=ids, split=split))
    if missing:
        raise DataIntegrityError(
            "outfits reference unknown item ids: " + ", ".join(sorted(set(missing)))
        )

    items: dict[str, FashionItem] = {}
    for item_id in referenced:
        entry = entries[item_id]
        image = load_image(root / entry["image"], resolution)
        items[item_id] = FashionItem(
            item_id=item_id,
            image=image,
            title=entry.get("title", ""),
            description=entry.get("description", "") or "",
            semantic_type=entry["semantic_type"],
            fine_category=entry.get("fine_category"),
            image_path=entry["image"],
        )

    vocab = declared_vocab or sorted({it.semantic_type for it in items.values()})
    return DatasetSplit(
        items=items,
        outfits=outfits,
        type_vocabulary=list(vocab),
        disjoint=_splits_are_disjoint(root),
        resolution=resolution,
    )


def _splits_are_disjoint(root: Path) -> bool:
    """True when the item-id sets referenced by the available splits never overlap."""
    id_sets: list[set[str]] = []
    for split in SPLIT_NAMES:
        path = root / f"outfits_{split}.json"
        if not path.is_file():
            continue
        ids: set[str] = set()
        for raw in _read_json(path):
            ids.update(raw["items"])
        id_sets.append(ids)
    for i in range(len(id_sets)):
        for j in range(i + 1, len(id_sets)):
            if id_sets[i] & id_sets[j]:
                return False
    return True


# ---------------------------------------------------------------------------
# pair construction
# ---------------------------------------------------------------------------


def generate_positive_pairs(outfits: list[Outfit]) -> list[PairSample]:
    """All unordered item pairs co-occurring in some outfit, deduplicated.

    Order is first-seen; the orientation of each pair follows the item
    order inside the outfit where it first appeared.
    """
    seen: set[frozenset] = set()
    pairs: list[PairSample] = []
    for outfit in outfits:
        ids = outfit.item_ids
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                key = frozenset((ids[i], ids[j]))
                if key not in seen:
                    seen.add(key)
                    pairs.append(PairSample(item_a=ids[i], item_b=ids[j], label=1))
    return pairs


def co_occurrence_sets(positives: list[PairSample]) -> dict[str, set[str]]:
    """Map each item to the set of items it shares an outfit with.

    Every item co-occurs with itself, which keeps degenerate (x, x)
    negatives out of the sampler.
    """
    co: dict[str, set[str]] = {}
    for pair in positives:
        co.setdefault(pair.item_a, {pair.item_a}).add(pair.item_b)
        co.setdefault(pair.item_b, {pair.item_b}).add(pair.item_a)
    return co


_REJECTION_ATTEMPTS = 100


def sample_negative_pairs(
    positives: list[PairSample],
    items: dict[str, FashionItem],
    seed: int,
) -> list[PairSample]:
    """One incompatible pair per positive, by type-aware replacement.

    Keeps ``item_a`` and swaps ``item_b`` for a uniformly sampled item of
    the same semantic type that differs from ``item_b`` and never
    co-occurs with ``item_a``. Rejection sampling caps at 100 attempts,
    then falls back to an exhaustive scan of the type pool; an empty scan
    raises :class:`SamplingExhaustionError`.
    """
    rng = np.random.default_rng(seed)
    by_type: dict[str, list[str]] = {}
    for item_id in sorted(items):
        by_type.setdefault(items[item_id].semantic_type, []).append(item_id)
    co = co_occurrence_sets(positives)

    negatives: list[PairSample] = []
    for pair in positives:
        a, b = pair.item_a, pair.item_b
        target_type = items[b].semantic_type
        pool = by_type.get(target_type, [])
        blocked = co.get(a, {a})
        chosen = None
        for _ in range(_REJECTION_ATTEMPTS):
            cand = pool[int(rng.integers(len(pool)))] if pool else None
            if cand is not None and cand != b and cand not in blocked:
                chosen = cand
                break
        if chosen is None:
            eligible = [c for c in pool if c != b and c not in blocked]
            if not eligible:
                raise SamplingExhaustionError(target_type)
            chosen = eligible[int(rng.integers(len(eligible)))]
        negatives.append(PairSample(item_a=a, item_b=chosen, label=0))
    return negatives


# ---------------------------------------------------------------------------
# synthetic dataset
# ---------------------------------------------------------------------------

# Word bank carved into per-theme pools so text carries the planted theme.
_WORD_BANK = [
    "amber", "breezy", "coastal", "velvet", "midnight", "linen", "golden", "urban",
    "floral", "rustic", "pastel", "monochrome", "tropical", "vintage", "sporty", "sleek",
    "cozy", "bold", "minimal", "ornate", "denim", "silk", "crimson", "sage",
    "charcoal", "ivory", "sunset", "arctic", "meadow", "harbor", "neon", "earthy",
    "glossy", "matte", "woven", "quilted", "breathable", "tailored", "flowing", "crisp",
    "smoky", "radiant", "dusty", "polished", "casual", "formal", "layered", "airy",
    "saturday", "evening", "garden", "studio", "alpine", "desert", "lagoon", "metro",
    "festival", "gallery", "voyage", "orchard", "twilight", "morning", "harvest", "regatta",
]
_WORDS_PER_THEME = 6


@dataclass
class SyntheticConfig:
    """Knobs for the planted-theme synthetic dataset.

    ``items_per_theme`` is the number of items rendered for each
    (theme, type) cell before splitting. ``noise`` scales every
    corruption channel: raster noise, the probability that an outfit
    slot is filled off-theme, and the chance that a text word borrows
    from another theme's pool (text is deliberately the noisier
    modality, as in real product feeds).
    """

    n_themes: int = 4
    items_per_theme: int = 24
    types: tuple[str, ...] = ("tops", "bottoms", "shoes")
    outfit_len: int = 3
    n_outfits: int = 200
    noise: float = 0.05
    seed: int = 0
    resolution: int = 64
    split_fractions: tuple[float, float] = (0.70, 0.15)  # train, valid; rest is test


def _theme_palette(theme: int, n_themes: int) -> tuple[np.ndarray, np.ndarray]:
    hue = theme / n_themes
    c1 = np.array(colorsys.hsv_to_rgb(hue, 0.65, 0.75))
    c2 = np.array(colorsys.hsv_to_rgb((hue + 0.08) % 1.0, 0.50, 0.45))
    return c1, c2


def _render_item_image(
    rng: np.random.Generator,
    theme: int,
    n_themes: int,
    type_index: int,
    resolution: int,
    noise: float,
) -> np.ndarray:
    c1, c2 = _theme_palette(theme, n_themes)
    coords = np.linspace(0.0, 1.0, resolution)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    angle = type_index * np.pi / 5.0
    freq = 2.0 + 2.0 * type_index
    phase = rng.uniform(0.0, 2.0 * np.pi)
    wave = 0.5 * (1.0 + np.sin(2.0 * np.pi * freq * (np.cos(angle) * xx + np.sin(angle) * yy) + phase))
    img = c1[None, None, :] * (1.0 - wave[..., None]) + c2[None, None, :] * wave[..., None]
    img = img + rng.normal(0.0, 0.02, size=3)[None, None, :]
    if noise > 0:
        img = img + rng.normal(0.0, 0.35 * noise, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _theme_word_pools(n_themes: int, seed: int) -> list[list[str]]:
    bank = list(_WORD_BANK)
    needed = n_themes * _WORDS_PER_THEME
    for i in range(max(0, needed - len(bank))):
        bank.append(f"style{i:03d}")
    rng = np.random.default_rng([seed, 11])
    shuffled = [bank[i] for i in rng.permutation(len(bank))]
    return [shuffled[i * _WORDS_PER_THEME : (i + 1) * _WORDS_PER_THEME] for i in range(n_themes)]


def _item_text(rng: np.random.Generator, pools: list[list[str]], theme: int,
               semantic_type: str, noise: float) -> tuple[str, str]:
    contamination = min(0.6, 5.0 * noise)
    words = []
    for _ in range(4):
        pool = pools[theme]
        if contamination > 0 and rng.random() < contamination:
            pool = pools[int(rng.integers(len(pools)))]
        words.append(pool[int(rng.integers(len(pool)))])
    title = f"{words[0]} {words[1]} {semantic_type}"
    if rng.random() < 0.1:
        return title, ""  # some items ship without a description
    description = f"{words[2]} {semantic_type} piece with {words[3]} accents"
    return title, description


def generate_synthetic_dataset(config: SyntheticConfig) -> dict[str, DatasetSplit]:
    """Build item-disjoint train/valid/test splits with planted themes.

    Each theme owns a color palette and a word pool; items are rendered
    rasters plus templated text; outfits pick one item per type within a
    single theme (modulo ``noise``). Deterministic for a fixed seed.
    """
    if config.n_themes < 2:
        raise ConfigError("n_themes must be >= 2")
    if len(config.types) < 2:
        raise ConfigError("need at least 2 semantic types")
    if config.outfit_len > len(config.types):
        raise ConfigError(
            f"outfit_len {config.outfit_len} exceeds number of types {len(config.types)}"
        )
    if config.outfit_len < 2:
        raise ConfigError("outfit_len must be >= 2")

    n = config.items_per_theme
    n_valid = max(2, round(config.split_fractions[1] * n))
    n_train = n - 2 * n_valid
    if n_train < 2:
        raise ConfigError(f"items_per_theme={n} too small for the split fractions")

    word_pools = _theme_word_pools(config.n_themes, config.seed)

    # cell_items[split][(theme, type_index)] -> list of FashionItem
    cell_items: dict[str, dict[tuple[int, int], list[FashionItem]]] = {
        s: {} for s in SPLIT_NAMES
    }
    for theme in range(config.n_themes):
        for t_idx, semantic_type in enumerate(config.types):
            cells = {s: [] for s in SPLIT_NAMES}
            for k in range(n):
                if k < n_train:
                    split = "train"
                elif k < n_train + n_valid:
                    split = "valid"
                else:
                    split = "test"
                rng = np.random.default_rng([config.seed, 2, theme, t_idx, k])
                title, description = _item_text(rng, word_pools, theme, semantic_type,
                                                config.noise)
                item = FashionItem(
                    item_id=f"{split}-{semantic_type}-t{theme}-{k:03d}",
                    image=_render_item_image(
                        rng, theme, config.n_themes, t_idx, config.resolution, config.noise
                    ),
                    title=title,
                    description=description,
                    semantic_type=semantic_type,
                    fine_category=f"theme-{theme}",
                )
                cells[split].append(item)
            for split, items in cells.items():
                cell_items[split][(theme, t_idx)] = items

    outfit_counts = {
        "train": config.n_outfits,
        "valid": max(4, config.n_outfits // 2),
        "test": max(4, config.n_outfits // 2),
    }
    splits: dict[str, DatasetSplit] = {}
    for s_idx, split in enumerate(SPLIT_NAMES):
        rng = np.random.default_rng([config.seed, 3, s_idx])
        outfits: list[Outfit] = []
        referenced: dict[str, FashionItem] = {}
        for o in range(outfit_counts[split]):
            theme = int(rng.integers(config.n_themes))
            if config.outfit_len == len(config.types):
                type_indices = list(range(len(config.types)))
            else:
                type_indices = sorted(
                    int(i)
                    for i in rng.choice(len(config.types), size=config.outfit_len, replace=False)
                )
            ids = []
            for t_idx in type_indices:
                item_theme = theme
                if config.noise > 0 and rng.random() < config.noise:
                    item_theme = int(rng.integers(config.n_themes))
                pool = cell_items[split][(item_theme, t_idx)]
                item = pool[int(rng.integers(len(pool)))]
                ids.append(item.item_id)
                referenced[item.item_id] = item
            outfits.append(Outfit(outfit_id=f"{split}-outfit-{o:05d}", item_ids=ids, split=split))
        splits[split] = DatasetSplit(
            items=dict(sorted(referenced.items())),
            outfits=outfits,
            type_vocabulary=list(config.types),
            disjoint=True,
            resolution=config.resolution,
        )
    return splits


def write_dataset(splits: dict[str, DatasetSplit], out_dir: str | Path) -> None:
    """Serialize splits to the on-disk layout (PNG images, JSON tables)."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)

    all_items: dict[str, FashionItem] = {}
    vocab: list[str] = []
    for split in splits.values():
        all_items.update(split.items)
        for t in split.type_vocabulary:
            if t not in vocab:
                vocab.append(t)

    entries = []
    for item_id in sorted(all_items):
        item = all_items[item_id]
        rel = f"images/{item_id}.png"
        raster = np.clip(np.round(item.image * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(raster, mode="RGB").save(out / rel)
        entries.append(
            {
                "item_id": item_id,
                "title": item.title,
                "description": item.description,
                "semantic_type": item.semantic_type,
                "fine_category": item.fine_category,
                "image": rel,
            }
        )
    _write_json(out / "items.json", entries)
    _write_json(out / "types.json", vocab)
    for split_name, split in splits.items():
        _write_json(
            out / f"outfits_{split_name}.json",
            [{"outfit_id": o.outfit_id, "items": o.item_ids} for o in split.outfits],
        )


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Polyvore-layout converter
# ---------------------------------------------------------------------------


def convert_polyvore(in_dir: str | Path, out_dir: str | Path, layout: str = "nondisjoint") -> dict:
    """Convert a published Polyvore-Outfits-style download into our layout.

    Expects ``<in>/polyvore_item_metadata.json`` (mapping id -> metadata
    with title/description/semantic_category), ``<in>/<layout>/{train,
    valid,test}.json`` outfit files, and ``<in>/images/<id>.jpg``. Only
    referenced items and images are copied. Returns per-split counts.
    """
    src = Path(in_dir)
    out = Path(out_dir)
    meta_path = src / "polyvore_item_metadata.json"
    if not meta_path.is_file():
        raise DatasetFormatError("missing required file: polyvore_item_metadata.json")
    with open(meta_path, encoding="utf-8") as fh:
        metadata = json.load(fh)

    (out / "images").mkdir(parents=True, exist_ok=True)
    referenced: dict[str, dict] = {}
    counts = {}
    for split in SPLIT_NAMES:
        split_path = src / layout / f"{split}.json"
        if not split_path.is_file():
            raise DatasetFormatError(f"missing required file: {layout}/{split}.json")
        with open(split_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        outfits = []
        for entry in raw:
            ids = [it["item_id"] for it in entry["items"]]
            if len(set(ids)) < 2:
                continue  # degenerate source outfit
            # drop repeated ids, keeping first occurrence
            ids = list(dict.fromkeys(ids))
            missing = [i for i in ids if i not in metadata]
            if missing:
                raise DataIntegrityError(
                    "outfits reference unknown item ids: " + ", ".join(sorted(missing))
                )
            outfits.append({"outfit_id": str(entry["set_id"]), "items": ids})
            for item_id in ids:
                referenced.setdefault(item_id, metadata[item_id])
        _write_json(out / f"outfits_{split}.json", outfits)
        counts[split] = len(outfits)

    entries = []
    vocab: set[str] = set()
    for item_id in sorted(referenced):
        meta = referenced[item_id]
        src_image = src / "images" / f"{item_id}.jpg"
        if not src_image.is_file():
            raise DatasetFormatError(f"missing required file: images/{item_id}.jpg")
        rel = f"images/{item_id}.jpg"
        shutil.copyfile(src_image, out / rel)
        semantic_type = meta.get("semantic_category", "")
        vocab.add(semantic_type)
        entries.append(
            {
                "item_id": item_id,
                "title": meta.get("title") or meta.get("url_name", ""),
                "description": meta.get("description", ""),
                "semantic_type": semantic_type,
                "fine_category": meta.get("category_id"),
                "image": rel,
            }
        )
    _write_json(out / "items.json", entries)
    _write_json(out / "types.json", sorted(vocab))
    counts["items"] = len(entries)
    return counts
