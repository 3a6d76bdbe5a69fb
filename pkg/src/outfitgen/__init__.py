"""Query-guided outfit generation: learn item compatibility and an
image-text coherence space, then compose outfits one type-slot at a time.

The package splits into: ``catalog`` (data model, ingestion, pairs,
synthesis), ``encoders``/``embedding``/``compatibility`` (the trainable
model), ``training`` (joint optimization and checkpoints), ``generation``
(the slot-filling loop), ``evaluation`` (AUC/FITB/coherence harness),
``service`` (HTTP API), and ``cli`` (batch entry points). Hot kernels in
``kernels`` carry numba acceleration with a numpy fallback selected via
the ``OUTFITGEN_BACKEND`` environment variable.
"""

from .catalog import (
    DatasetSplit,
    FashionItem,
    Outfit,
    PairSample,
    SyntheticConfig,
    generate_positive_pairs,
    generate_synthetic_dataset,
    load_dataset,
    sample_negative_pairs,
    write_dataset,
)
from .compatibility import (
    PairDiscriminator,
    binary_cross_entropy,
    pair_transform,
    select_threshold,
)
from .embedding import embed_image, embed_query, embed_text, embedding_loss, triplet_loss
from .encoders import (
    ImageBackbone,
    TextBackbone,
    encode_image,
    encode_text,
    reference_backbones,
)
from .evaluation import (
    EvalReport,
    FITBQuestion,
    cluster_size,
    compatibility_auc,
    fitb_accuracy,
    make_fitb_questions,
    make_random_negative_outfits,
    outfit_center,
    outfit_score,
    query_coherence,
    run_coherence_experiment,
)
from .generation import (
    GenerationConfig,
    PartialOutfit,
    Query,
    RankedCandidate,
    baseline_generate,
    generate_outfit,
    rank_candidates,
    sample_from_ranked,
    select_next_slot,
)
from .model import ItemIndex, ModelConfig, OutfitModel
from .training import (
    Checkpoint,
    TrainConfig,
    gradcheck_suite,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
