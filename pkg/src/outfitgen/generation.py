"""Iterative outfit construction: slot choice, ranking, top-k sampling.

The loop picks the unfilled type whose candidate pool sits closest to
the query on average, ranks that type's candidates (query distance
alone for an empty outfit, query distance divided by mean compatibility
once items exist), then draws from the top k greedily, uniformly, or
from a softmin over the rank scores. A compatibility-only baseline runs
the same loop seeded by an item, ranking purely by mean compatibility.

Everything here is a pure function of (query, pools, parameters, seed);
step s of a run with seed S draws from ``default_rng([S, s])``, so traces
replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import Outfit
from .errors import ConfigError, PoolError
from .kernels import pairwise_sqdist
from .model import ItemIndex, OutfitModel

TRACE_CANDIDATES = 20


@dataclass
class GenerationConfig:
    k: int = 10
    sampling: str = "greedy"  # greedy | uniform | biased
    compat_mode: str = "cat"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"top-k threshold must be >= 1, got {self.k}")
        if self.sampling not in ("greedy", "uniform", "biased"):
            raise ConfigError(f"unknown sampling mode {self.sampling!r}")


@dataclass
class Query:
    text: str
    vector: np.ndarray

    @classmethod
    def from_text(cls, text: str, model: OutfitModel) -> "Query":
        return cls(text=text, vector=model.embed_query(text))


@dataclass
class PartialOutfit:
    slots: list[str]
    filled: dict[str, str] = field(default_factory=dict)
    locked: set[str] = field(default_factory=set)

    def __post_init__(self):
        if len(set(self.slots)) != len(self.slots):
            raise ConfigError("slots must be distinct semantic types")
        bad = set(self.filled) - set(self.slots)
        if bad:
            raise ConfigError(f"filled slots {sorted(bad)} are not in the slot list")
        if not self.locked <= set(self.filled):
            raise ConfigError("locked slots must be filled")

    def unfilled(self) -> list[str]:
        return [s for s in self.slots if s not in self.filled]

    def is_complete(self) -> bool:
        return not self.unfilled()


@dataclass
class RankedCandidate:
    item_id: str
    score: float
    query_distance: float | None = None
    compatibility: float | None = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "score": self.score,
            "query_distance": self.query_distance,
            "compatibility": self.compatibility,
        }


def select_next_slot(partial: PartialOutfit, query_vector: np.ndarray,
                     index: ItemIndex) -> str | None:
    """Unfilled type whose full candidate pool averages closest to the query.

    Returns ``None`` as the completion signal when every slot is filled.
    Ties break to the lexicographically smallest type name.
    """
    unfilled = partial.unfilled()
    if not unfilled:
        return None
    best = None
    for semantic_type in sorted(unfilled):
        rows = index.rows_of_type(semantic_type)
        if rows.size == 0:
            raise PoolError(semantic_type)
        dists = np.sqrt(pairwise_sqdist(query_vector[None, :], index.vectors[rows]))[0]
        mean = float(dists.mean())
        if best is None or mean < best[0]:
            best = (mean, semantic_type)
    return best[1]


def _mean_compatibility(model: OutfitModel, index: ItemIndex, mode: str,
                        candidate_rows: np.ndarray, filled_rows: np.ndarray) -> np.ndarray:
    feats = index.features_for_mode(model, mode)
    n_cand, n_filled = candidate_rows.size, filled_rows.size
    va = feats[np.repeat(candidate_rows, n_filled)]
    vb = feats[np.tile(filled_rows, n_cand)]
    scores = model.discriminate_features(va, vb, mode)
    return scores.reshape(n_cand, n_filled).mean(axis=1)


def rank_candidates(partial: PartialOutfit, query_vector: np.ndarray, semantic_type: str,
                    index: ItemIndex, model: OutfitModel,
                    compat_mode: str = "cat") -> list[RankedCandidate]:
    """Candidates of one type, ascending by rank score, ties by item_id."""
    filled_ids = set(partial.filled.values())
    rows = np.asarray(
        [r for r in index.rows_of_type(semantic_type) if index.ids[r] not in filled_ids],
        dtype=np.int64,
    )
    if rows.size == 0:
        raise PoolError(semantic_type)
    dists = np.sqrt(pairwise_sqdist(query_vector[None, :], index.vectors[rows]))[0]
    if partial.filled:
        filled_rows = np.asarray(
            [index.row_of[i] for i in partial.filled.values()], dtype=np.int64
        )
        compat = _mean_compatibility(model, index, compat_mode, rows, filled_rows)
        scores = dists / compat
    else:
        compat = None
        scores = dists
    ranked = [
        RankedCandidate(
            item_id=index.ids[row],
            score=float(scores[i]),
            query_distance=float(dists[i]),
            compatibility=None if compat is None else float(compat[i]),
        )
        for i, row in enumerate(rows)
    ]
    ranked.sort(key=lambda c: (c.score, c.item_id))
    return ranked


def rank_by_compatibility(partial: PartialOutfit, semantic_type: str, index: ItemIndex,
                          model: OutfitModel, compat_mode: str = "cat") -> list[RankedCandidate]:
    """Baseline ranking: descending mean compatibility to the filled items."""
    if not partial.filled:
        raise ConfigError("compatibility-only ranking needs at least one filled slot")
    filled_ids = set(partial.filled.values())
    rows = np.asarray(
        [r for r in index.rows_of_type(semantic_type) if index.ids[r] not in filled_ids],
        dtype=np.int64,
    )
    if rows.size == 0:
        raise PoolError(semantic_type)
    filled_rows = np.asarray([index.row_of[i] for i in partial.filled.values()], dtype=np.int64)
    compat = _mean_compatibility(model, index, compat_mode, rows, filled_rows)
    ranked = [
        RankedCandidate(
            item_id=index.ids[row],
            score=float(-compat[i]),  # ascending score == descending compatibility
            compatibility=float(compat[i]),
        )
        for i, row in enumerate(rows)
    ]
    ranked.sort(key=lambda c: (c.score, c.item_id))
    return ranked


def sample_from_ranked(ranked: list[RankedCandidate], config: GenerationConfig,
                       rng: np.random.Generator) -> str:
    """Draw one item from the top ``min(k, len(ranked))`` of a ranked list."""
    if not ranked:
        raise PoolError("<empty>", "cannot sample from an empty ranked list")
    k = min(config.k, len(ranked))
    if config.sampling == "greedy" or k == 1:
        return ranked[0].item_id
    if config.sampling == "uniform":
        return ranked[int(rng.integers(k))].item_id
    scores = np.asarray([c.score for c in ranked[:k]])
    logits = -(scores - scores.min())  # softmin, stabilized
    probs = np.exp(logits)
    probs /= probs.sum()
    return ranked[int(rng.choice(k, p=probs))].item_id


def biased_probabilities(scores: np.ndarray) -> np.ndarray:
    """Softmin distribution exp(-r_i) / sum_j exp(-r_j) over rank scores."""
    scores = np.asarray(scores, dtype=np.float64)
    logits = -(scores - scores.min())
    probs = np.exp(logits)
    return probs / probs.sum()


def _step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, step])


def generate_outfit(query: Query, slots: list[str], index: ItemIndex, model: OutfitModel,
                    config: GenerationConfig,
                    starting: dict[str, str] | None = None) -> tuple[Outfit, list[dict]]:
    """Fill every slot, one item per step; returns the outfit and its trace.

    ``starting`` pre-fills (and locks) slots with caller-chosen items.
    The trace records, per step, the chosen type, the top candidates,
    and the sampled item, and is JSON-serializable.
    """
    partial = PartialOutfit(slots=list(slots), filled=dict(starting or {}),
                            locked=set(starting or {}))
    trace: list[dict] = []
    step = 0
    while True:
        slot = select_next_slot(partial, query.vector, index)
        if slot is None:
            break
        ranked = rank_candidates(partial, query.vector, slot, index, model,
                                 config.compat_mode)
        chosen = sample_from_ranked(ranked, config, _step_rng(config.seed, step))
        partial.filled[slot] = chosen
        trace.append(_trace_step(step, slot, "auto", chosen, ranked, config))
        step += 1
    outfit = Outfit(
        outfit_id=f"generated-{config.seed}",
        item_ids=[partial.filled[s] for s in partial.slots],
        split="generated",
    )
    return outfit, trace


def baseline_generate(seed_item: str, slots: list[str], index: ItemIndex,
                      model: OutfitModel, config: GenerationConfig,
                      ) -> tuple[Outfit, list[dict]]:
    """Compatibility-only generation from a starting item, slots in given order."""
    if seed_item not in index.row_of:
        raise ConfigError(f"unknown seed item {seed_item!r}")
    seed_type = index.items[seed_item].semantic_type
    if seed_type not in slots:
        raise ConfigError(f"seed item type {seed_type!r} is not among the slots")
    partial = PartialOutfit(slots=list(slots), filled={seed_type: seed_item},
                            locked={seed_type})
    trace: list[dict] = []
    step = 0
    for slot in slots:
        if slot in partial.filled:
            continue
        ranked = rank_by_compatibility(partial, slot, index, model, config.compat_mode)
        chosen = sample_from_ranked(ranked, config, _step_rng(config.seed, step))
        partial.filled[slot] = chosen
        trace.append(_trace_step(step, slot, "baseline", chosen, ranked, config))
        step += 1
    outfit = Outfit(
        outfit_id=f"baseline-{config.seed}",
        item_ids=[partial.filled[s] for s in partial.slots],
        split="generated",
    )
    return outfit, trace


def _trace_step(step: int, slot: str, action: str, chosen: str,
                ranked: list[RankedCandidate], config: GenerationConfig) -> dict:
    return {
        "step": step,
        "slot": slot,
        "action": action,
        "sampling": config.sampling,
        "k": config.k,
        "chosen": chosen,
        "candidates": [c.to_dict() for c in ranked[:TRACE_CANDIDATES]],
    }
