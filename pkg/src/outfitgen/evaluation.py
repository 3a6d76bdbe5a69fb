"""Quantitative harness: AUC, fill-in-the-blank, cluster size, coherence.

Outfit-level compatibility is the mean pairwise discriminator score; AUC
ranks ground-truth outfits against randomized ones with the tie-splitting
rank convention. Fill-in-the-blank picks the 4-way candidate maximizing
mean compatibility to the context. Coherence statistics treat outfits as
clusters in the shared space: the cluster size is the median item-center
distance, and the query/center distance correlation is reported with both
an analytic t-test p-value and a seeded permutation p-value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .catalog import DatasetSplit, FashionItem, Outfit
from .errors import ConfigError, DataIntegrityError, UndefinedCorrelationError
from .generation import (
    GenerationConfig,
    Query,
    baseline_generate,
    generate_outfit,
)
from .kernels import pairwise_sqdist
from .model import ItemIndex, OutfitModel

# ---------------------------------------------------------------------------
# compatibility metrics
# ---------------------------------------------------------------------------


def outfit_score(item_ids: list[str], compat_mode: str, model: OutfitModel,
                 index: ItemIndex) -> float:
    """Mean discriminator score over all unordered item pairs of an outfit."""
    if len(item_ids) < 2:
        raise ConfigError("outfit_score needs at least 2 items")
    rows = np.asarray([index.row_of[i] for i in item_ids], dtype=np.int64)
    feats = index.features_for_mode(model, compat_mode)
    a_idx, b_idx = np.triu_indices(len(rows), k=1)
    scores = model.discriminate_features(feats[rows[a_idx]], feats[rows[b_idx]], compat_mode)
    return float(scores.mean())


def auc_from_scores(positive_scores: np.ndarray, negative_scores: np.ndarray) -> float:
    """Rank-based AUC with ties counted half (Mann-Whitney convention)."""
    pos = np.asarray(positive_scores, dtype=np.float64)
    neg = np.asarray(negative_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ConfigError("AUC needs non-empty positive and negative score sets")
    ranks = stats.rankdata(np.concatenate([pos, neg]))
    rank_sum = ranks[: pos.size].sum()
    return float((rank_sum - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size))


def compatibility_auc(positive_outfits: list[Outfit], negative_outfits: list[Outfit],
                      compat_mode: str, model: OutfitModel, index: ItemIndex) -> float:
    """AUC of outfit scores: ground-truth outfits vs. randomized outfits."""
    pos = np.asarray(
        [outfit_score(o.item_ids, compat_mode, model, index) for o in positive_outfits]
    )
    neg = np.asarray(
        [outfit_score(o.item_ids, compat_mode, model, index) for o in negative_outfits]
    )
    return auc_from_scores(pos, neg)


def make_random_negative_outfits(outfits: list[Outfit], items: dict[str, FashionItem],
                                 seed: int) -> list[Outfit]:
    """Type-preserving random substitutions; never reproduces a real outfit."""
    rng = np.random.default_rng(seed)
    by_type: dict[str, list[str]] = {}
    for item_id in sorted(items):
        by_type.setdefault(items[item_id].semantic_type, []).append(item_id)
    truth = {frozenset(o.item_ids) for o in outfits}

    negatives = []
    for outfit in outfits:
        for _ in range(1000):
            ids = []
            for item_id in outfit.item_ids:
                pool = by_type[items[item_id].semantic_type]
                ids.append(pool[int(rng.integers(len(pool)))])
            if len(set(ids)) == len(ids) and frozenset(ids) not in truth:
                break
        else:
            raise DataIntegrityError(
                f"could not build a distinct random outfit for {outfit.outfit_id!r}"
            )
        negatives.append(Outfit(outfit_id=f"neg-{outfit.outfit_id}", item_ids=ids,
                                split=outfit.split))
    return negatives


# ---------------------------------------------------------------------------
# fill in the blank
# ---------------------------------------------------------------------------


@dataclass
class FITBQuestion:
    context: list[str]  # the outfit minus the held-out item
    candidates: list[str]  # exactly 4, one of which completes the outfit
    answer_index: int


def make_fitb_questions(outfits: list[Outfit], items: dict[str, FashionItem],
                        seed: int, n_candidates: int = 4) -> list[FITBQuestion]:
    """Hold one item out per outfit and offer same-type distractors.

    Outfits whose held-out type lacks enough distractors are skipped.
    """
    rng = np.random.default_rng(seed)
    by_type: dict[str, list[str]] = {}
    for item_id in sorted(items):
        by_type.setdefault(items[item_id].semantic_type, []).append(item_id)

    questions = []
    for outfit in outfits:
        held_pos = int(rng.integers(len(outfit.item_ids)))
        answer = outfit.item_ids[held_pos]
        context = [i for i in outfit.item_ids if i != answer]
        pool = [i for i in by_type[items[answer].semantic_type]
                if i != answer and i not in outfit.item_ids]
        if len(pool) < n_candidates - 1:
            continue
        picks = rng.choice(len(pool), size=n_candidates - 1, replace=False)
        candidates = [answer] + [pool[int(i)] for i in picks]
        order = rng.permutation(n_candidates)
        candidates = [candidates[int(i)] for i in order]
        questions.append(
            FITBQuestion(
                context=context,
                candidates=candidates,
                answer_index=candidates.index(answer),
            )
        )
    return questions


def model_pair_scorer(model: OutfitModel, index: ItemIndex, compat_mode: str):
    """Scorer mapping (candidate ids, context ids) -> mean compatibility array."""
    feats = index.features_for_mode(model, compat_mode)

    def scorer(candidate_ids: list[str], context_ids: list[str]) -> np.ndarray:
        cand_rows = np.asarray([index.row_of[i] for i in candidate_ids], dtype=np.int64)
        ctx_rows = np.asarray([index.row_of[i] for i in context_ids], dtype=np.int64)
        va = feats[np.repeat(cand_rows, ctx_rows.size)]
        vb = feats[np.tile(ctx_rows, cand_rows.size)]
        scores = model.discriminate_features(va, vb, compat_mode)
        return scores.reshape(cand_rows.size, ctx_rows.size).mean(axis=1)

    return scorer


def fitb_accuracy(questions: list[FITBQuestion], scorer) -> float:
    """Fraction of questions where the best-scoring candidate is the answer.

    Ties resolve to the lowest candidate index.
    """
    if not questions:
        raise ConfigError("fitb_accuracy needs at least one question")
    correct = 0
    for q in questions:
        scores = np.asarray(scorer(q.candidates, q.context), dtype=np.float64)
        if int(np.argmax(scores)) == q.answer_index:
            correct += 1
    return correct / len(questions)


# ---------------------------------------------------------------------------
# coherence metrics
# ---------------------------------------------------------------------------


def outfit_center(vectors: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the outfit's item vectors."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ConfigError("outfit_center needs a non-empty (n, d) array")
    return vectors.mean(axis=0)


def cluster_size(vectors: np.ndarray) -> float:
    """Median Euclidean distance from each item vector to the outfit center."""
    vectors = np.asarray(vectors, dtype=np.float64)
    center = outfit_center(vectors)
    dists = np.sqrt(np.sum((vectors - center) ** 2, axis=1))
    return float(np.median(dists))


@dataclass
class CoherenceRecord:
    query_vector: np.ndarray
    item_vectors: np.ndarray
    center: np.ndarray = field(init=False)
    size: float = field(init=False)

    def __post_init__(self):
        self.center = outfit_center(self.item_vectors)
        self.size = cluster_size(self.item_vectors)


@dataclass
class CoherenceStats:
    rho: float
    p_value: float
    r_squared: float
    n_pairs: int
    p_permutation: float | None = None


def _pair_distances(records: list[CoherenceRecord]) -> tuple[np.ndarray, np.ndarray]:
    queries = np.stack([r.query_vector for r in records])
    centers = np.stack([r.center for r in records])
    i_idx, j_idx = np.triu_indices(len(records), k=1)
    d_q = np.sqrt(pairwise_sqdist(queries, queries))[i_idx, j_idx]
    d_c = np.sqrt(pairwise_sqdist(centers, centers))[i_idx, j_idx]
    return d_q, d_c


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("a distance series has zero variance")
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


def query_coherence(records: list[CoherenceRecord], permutation_draws: int = 0,
                    seed: int = 0) -> CoherenceStats:
    """Correlation between pairwise query distances and center distances.

    The analytic p-value is a two-sided t-test with n-2 degrees of
    freedom over the n unordered record pairs; set ``permutation_draws``
    to also estimate a permutation p-value (seeded shuffles of one side).
    """
    if len(records) < 3:
        raise ConfigError("query_coherence needs at least 3 records")
    d_q, d_c = _pair_distances(records)
    rho = pearson(d_q, d_c)
    n = d_q.size
    if abs(rho) >= 1.0:
        p_value = 0.0
    else:
        t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
        p_value = float(2.0 * stats.t.sf(abs(t), df=n - 2))
    p_perm = None
    if permutation_draws > 0:
        rng = np.random.default_rng(seed)
        hits = 0
        for _ in range(permutation_draws):
            shuffled = d_c[rng.permutation(n)]
            try:
                r = pearson(d_q, shuffled)
            except UndefinedCorrelationError:
                r = 0.0
            if abs(r) >= abs(rho):
                hits += 1
        p_perm = (hits + 1) / (permutation_draws + 1)
    return CoherenceStats(rho=rho, p_value=p_value, r_squared=rho * rho, n_pairs=n,
                          p_permutation=p_perm)


# ---------------------------------------------------------------------------
# the coherence experiment and report plumbing
# ---------------------------------------------------------------------------


@dataclass
class CoherenceRow:
    margin: float
    baseline_size: float  # mean cluster size, compatibility-only generation
    coherent_size: float  # mean cluster size, query-guided generation
    mean_query_distance: float
    mean_center_distance: float
    rho: float
    p_value: float
    p_permutation: float | None
    r_squared: float
    n_outfits: int

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "baseline_size": self.baseline_size,
            "coherent_size": self.coherent_size,
            "mean_query_distance": self.mean_query_distance,
            "mean_center_distance": self.mean_center_distance,
            "rho": self.rho,
            "p_value": self.p_value,
            "p_permutation": self.p_permutation,
            "r_squared": self.r_squared,
            "n_outfits": self.n_outfits,
        }


def sample_query_texts(split: DatasetSplit, n: int, seed: int) -> list[str]:
    """Item texts drawn (with replacement) from a split to serve as queries."""
    texts = [split.items[i].text for i in sorted(split.items) if split.items[i].text.strip()]
    if not texts:
        raise ConfigError("no non-empty item texts available for queries")
    rng = np.random.default_rng(seed)
    return [texts[int(i)] for i in rng.integers(len(texts), size=n)]


def run_coherence_experiment(
    model: OutfitModel,
    candidate_split: DatasetSplit,
    query_split: DatasetSplit,
    n_outfits: int,
    config: GenerationConfig,
    margin: float,
    seed: int = 0,
    permutation_draws: int = 10_000,
) -> tuple[CoherenceRow, np.ndarray, np.ndarray]:
    """Generate n query-guided and n baseline outfits and compare coherence.

    Queries are item texts sampled from ``query_split``; candidates come
    from ``candidate_split``. Returns the summary row plus the pairwise
    (query distance, center distance) scatter arrays.
    """
    index = ItemIndex.build(model, candidate_split)
    slots = sorted(index.type_rows)
    texts = sample_query_texts(query_split, n_outfits, seed)
    rng = np.random.default_rng([seed, 17])

    records: list[CoherenceRecord] = []
    baseline_sizes: list[float] = []
    for i, text in enumerate(texts):
        query = Query.from_text(text, model)
        run_config = replace(config, seed=config.seed * 1_000_003 + i)
        outfit, _ = generate_outfit(query, slots, index, model, run_config)
        vectors = np.stack([index.vector_of(item_id) for item_id in outfit.item_ids])
        records.append(CoherenceRecord(query_vector=query.vector, item_vectors=vectors))

        seed_item = index.ids[int(rng.integers(len(index.ids)))]
        baseline, _ = baseline_generate(seed_item, slots, index, model, run_config)
        b_vectors = np.stack([index.vector_of(item_id) for item_id in baseline.item_ids])
        baseline_sizes.append(cluster_size(b_vectors))

    stats_out = query_coherence(records, permutation_draws=permutation_draws, seed=seed)
    d_q, d_c = _pair_distances(records)
    row = CoherenceRow(
        margin=margin,
        baseline_size=float(np.mean(baseline_sizes)),
        coherent_size=float(np.mean([r.size for r in records])),
        mean_query_distance=float(d_q.mean()),
        mean_center_distance=float(d_c.mean()),
        rho=stats_out.rho,
        p_value=stats_out.p_value,
        p_permutation=stats_out.p_permutation,
        r_squared=stats_out.r_squared,
        n_outfits=n_outfits,
    )
    return row, d_q, d_c


def evaluate_compatibility(model: OutfitModel, split: DatasetSplit, compat_mode: str,
                           seed: int = 0) -> dict:
    """AUC plus FITB accuracy of one discriminator mode on a split."""
    index = ItemIndex.build(model, split)
    negatives = make_random_negative_outfits(split.outfits, split.items, seed=seed)
    auc = compatibility_auc(split.outfits, negatives, compat_mode, model, index)
    questions = make_fitb_questions(split.outfits, split.items, seed=seed)
    accuracy = fitb_accuracy(questions, model_pair_scorer(model, index, compat_mode))
    return {
        "mode": compat_mode,
        "auc": auc,
        "fitb_accuracy": accuracy,
        "n_outfits": len(split.outfits),
        "n_questions": len(questions),
    }


@dataclass
class EvalReport:
    compat_rows: list[dict] = field(default_factory=list)
    coherence_rows: list[CoherenceRow] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "compatibility": self.compat_rows,
                "coherence": [row.to_dict() for row in self.coherence_rows],
            },
            indent=2,
            sort_keys=True,
        )


def render_compat_table(rows: list[dict]) -> str:
    header = f"{'mode':<8} {'AUC':>8} {'FITB':>8} {'outfits':>8} {'questions':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['mode']:<8} {row['auc']:>8.3f} {row['fitb_accuracy']:>8.3f} "
            f"{row['n_outfits']:>8d} {row['n_questions']:>10d}"
        )
    return "\n".join(lines)


def render_coherence_table(rows: list[CoherenceRow]) -> str:
    header = (
        f"{'margin':>7} {'s_b':>8} {'s_c':>8} {'d_q':>8} {'d_c':>8} "
        f"{'rho':>7} {'p':>10} {'R^2':>7}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        p = r.p_permutation if r.p_permutation is not None else r.p_value
        lines.append(
            f"{r.margin:>7.2f} {r.baseline_size:>8.3f} {r.coherent_size:>8.3f} "
            f"{r.mean_query_distance:>8.3f} {r.mean_center_distance:>8.3f} "
            f"{r.rho:>7.3f} {p:>10.4g} {r.r_squared:>7.3f}"
        )
    return "\n".join(lines)


def write_scatter_csv(path: str | Path, d_q: np.ndarray, d_c: np.ndarray) -> None:
    """Export the pairwise distance scatter for external plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_distance", "center_distance"])
        for a, b in zip(d_q, d_c):
            writer.writerow([f"{a:.10g}", f"{b:.10g}"])
