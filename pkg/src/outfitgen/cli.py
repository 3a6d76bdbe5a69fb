"""Batch entry points: dataset synthesis/conversion, training, evaluation,
one-shot generation with board export, and the composer service.

Exit codes: 0 success, 2 usage/config problems, 3 data errors, 4 numeric
failures. Every command takes ``--seed`` where randomness is involved and
is fully deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import (
    CheckpointIntegrityError,
    ConfigError,
    DataIntegrityError,
    DatasetFormatError,
    InvalidQueryError,
    NumericError,
    OutfitgenError,
    PoolError,
    SamplingExhaustionError,
    ShapeError,
    VocabularyError,
)

_DATA_ERRORS = (
    DatasetFormatError,
    DataIntegrityError,
    VocabularyError,
    PoolError,
    SamplingExhaustionError,
    CheckpointIntegrityError,
)
_USAGE_ERRORS = (ConfigError, InvalidQueryError, ShapeError)


@click.group(name="outfitgen")
def cli():
    """Train, evaluate, and serve the query-guided outfit generator."""


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


@cli.group()
def data():
    """Dataset synthesis and conversion."""


@data.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output dataset directory.")
@click.option("--themes", default=4, show_default=True, help="Number of planted themes.")
@click.option("--items-per-theme", default=24, show_default=True,
              help="Items per (theme, type) cell before splitting.")
@click.option("--types", default="tops,bottoms,shoes", show_default=True,
              help="Comma-separated semantic types.")
@click.option("--outfit-len", default=3, show_default=True, help="Items per outfit.")
@click.option("--outfits", "n_outfits", default=200, show_default=True,
              help="Training outfits (valid/test get half each).")
@click.option("--noise", default=0.05, show_default=True, help="Corruption level in [0, 1].")
@click.option("--resolution", default=64, show_default=True, help="Image side length (multiple of 8).")
@click.option("--seed", default=0, show_default=True, help="Random seed.")
def synth(out_dir, themes, items_per_theme, types, outfit_len, n_outfits, noise,
          resolution, seed):
    """Generate a planted-theme synthetic dataset."""
    from .catalog import SyntheticConfig, generate_synthetic_dataset, write_dataset

    config = SyntheticConfig(
        n_themes=themes,
        items_per_theme=items_per_theme,
        types=tuple(t.strip() for t in types.split(",") if t.strip()),
        outfit_len=outfit_len,
        n_outfits=n_outfits,
        noise=noise,
        seed=seed,
        resolution=resolution,
    )
    splits = generate_synthetic_dataset(config)
    write_dataset(splits, out_dir)
    counts = {name: len(split.outfits) for name, split in splits.items()}
    click.echo(json.dumps({"out": str(out_dir), "outfits": counts,
                           "items": sum(len(s.items) for s in splits.values())}))


@data.command("convert-polyvore")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True),
              help="Published Polyvore-Outfits-style download directory.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output dataset directory.")
@click.option("--layout", default="nondisjoint", show_default=True,
              type=click.Choice(["nondisjoint", "disjoint"]),
              help="Which split layout of the download to ingest.")
def convert_polyvore(in_dir, out_dir, layout):
    """Convert a Polyvore-Outfits-style download into the dataset layout."""
    from .catalog import convert_polyvore as converter

    counts = converter(in_dir, out_dir, layout=layout)
    click.echo(json.dumps({"out": str(out_dir), **counts}))


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(), help="Checkpoint file.")
@click.option("--margin", default=1.0, show_default=True, help="Triplet margin.")
@click.option("--epochs", default=20, show_default=True)
@click.option("--lr", default=1e-5, show_default=True, help="Learning rate (raise to ~3e-3 for desk-scale from-scratch runs).")
@click.option("--batch-size", default=64, show_default=True)
@click.option("--l2", default=5e-4, show_default=True, help="Embedder weight decay coefficient.")
@click.option("--feature-dim", default=128, show_default=True)
@click.option("--embed-dim", default=128, show_default=True)
@click.option("--resolution", default=64, show_default=True)
@click.option("--transforms", default="dot,sum,diff", show_default=True,
              help="Pair transforms fed to the discriminators.")
@click.option("--item-repr", default="image", show_default=True,
              type=click.Choice(["image", "mean"]))
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Per-epoch JSONL metric log (default: <out>.log.jsonl).")
@click.option("--seed", default=0, show_default=True)
def train(data_dir, out_path, margin, epochs, lr, batch_size, l2, feature_dim,
          embed_dim, resolution, transforms, item_repr, log_path, seed):
    """Train encoders, embedders, and discriminators jointly."""
    from .catalog import load_dataset
    from .model import ModelConfig
    from .training import TrainConfig, save_checkpoint
    from .training import train as run_train

    train_split = load_dataset(data_dir, "train", resolution=resolution)
    valid_split = None
    if (Path(data_dir) / "outfits_valid.json").is_file():
        valid_split = load_dataset(data_dir, "valid", resolution=resolution)

    model_config = ModelConfig(
        feature_dim=feature_dim,
        embed_dim=embed_dim,
        resolution=resolution,
        transforms=tuple(t.strip() for t in transforms.split(",") if t.strip()),
        item_repr=item_repr,
    )
    config = TrainConfig(
        learning_rate=lr, epochs=epochs, batch_size=batch_size,
        margin=margin, l2_coeff=l2, seed=seed,
    )
    log_path = log_path or f"{out_path}.log.jsonl"
    checkpoint = run_train(train_split, config, valid_split=valid_split,
                           model_config=model_config, log_path=log_path)
    save_checkpoint(checkpoint, out_path)
    metrics = checkpoint.manifest["metrics"]
    click.echo(json.dumps({
        "checkpoint": str(out_path),
        "log": str(log_path),
        "best_val_auc": metrics["best_val_auc"],
        "best_epoch": metrics["best_epoch"],
        "final_loss": metrics["final_loss"],
    }))


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


@cli.group(name="eval")
def eval_group():
    """Quantitative evaluation harness."""


def _load_model(ckpt_path):
    from .training import load_checkpoint, model_from_checkpoint

    checkpoint = load_checkpoint(ckpt_path)
    return model_from_checkpoint(checkpoint), checkpoint


@eval_group.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--mode", default="cat", show_default=True,
              type=click.Choice(["cat", "image", "text", "all"]))
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "valid", "test"]))
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write the report as JSON.")
@click.option("--seed", default=0, show_default=True)
def compat(data_dir, ckpt_path, mode, split, out_path, seed):
    """Compatibility AUC and fill-in-the-blank accuracy."""
    from .catalog import load_dataset
    from .evaluation import evaluate_compatibility, render_compat_table

    model, _ = _load_model(ckpt_path)
    dataset = load_dataset(data_dir, split, resolution=model.config.resolution)
    modes = ["cat", "image", "text"] if mode == "all" else [mode]
    rows = [evaluate_compatibility(model, dataset, m, seed=seed) for m in modes]
    click.echo(render_compat_table(rows))
    if out_path:
        Path(out_path).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")


@eval_group.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--ckpt", "ckpt_paths", required=True, type=click.Path(exists=True),
              multiple=True, help="Checkpoint(s); repeat for a margin sweep.")
@click.option("--n", "n_outfits", default=500, show_default=True,
              help="Generated outfits per method per checkpoint.")
@click.option("--k", default=10, show_default=True, help="Top-k sampling threshold.")
@click.option("--sampling", default="biased", show_default=True,
              type=click.Choice(["greedy", "uniform", "biased"]))
@click.option("--permutations", default=10_000, show_default=True,
              help="Draws for the permutation p-value (0 disables).")
@click.option("--scatter", "scatter_path", type=click.Path(), default=None,
              help="Write the (query distance, center distance) pairs as CSV.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write the rows as JSON.")
@click.option("--seed", default=0, show_default=True)
def coherence(data_dir, ckpt_paths, n_outfits, k, sampling, permutations,
              scatter_path, out_path, seed):
    """Cluster sizes and query-center distance correlation per margin."""
    from .catalog import load_dataset
    from .evaluation import render_coherence_table, run_coherence_experiment, write_scatter_csv
    from .generation import GenerationConfig

    rows = []
    scatter = None
    for ckpt_path in ckpt_paths:
        model, checkpoint = _load_model(ckpt_path)
        candidates = load_dataset(data_dir, "test", resolution=model.config.resolution)
        queries = load_dataset(data_dir, "valid", resolution=model.config.resolution)
        train_config = checkpoint.manifest.get("train_config") or {}
        margin = float(train_config.get("margin", 0.0))
        config = GenerationConfig(k=k, sampling=sampling, seed=seed)
        row, d_q, d_c = run_coherence_experiment(
            model, candidates, queries, n_outfits, config, margin,
            seed=seed, permutation_draws=permutations,
        )
        rows.append(row)
        scatter = (d_q, d_c)
    click.echo(render_coherence_table(rows))
    if scatter_path and scatter is not None:
        write_scatter_csv(scatter_path, *scatter)
    if out_path:
        Path(out_path).write_text(
            json.dumps([r.to_dict() for r in rows], indent=2, sort_keys=True) + "\n"
        )


# ---------------------------------------------------------------------------
# generate / serve
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--query", required=True, help="Free-text outfit description.")
@click.option("--slots", default="tops,bottoms,shoes", show_default=True,
              help="Comma-separated type slots.")
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "valid", "test"]), help="Candidate pool split.")
@click.option("--k", default=10, show_default=True)
@click.option("--sampling", default="biased", show_default=True,
              type=click.Choice(["greedy", "uniform", "biased"]))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_paths", default="outfit.json", show_default=True,
              help="Comma-separated outputs; .json gets the outfit+trace, .png the board.")
def generate(ckpt_path, data_dir, query, slots, split, k, sampling, seed, out_paths):
    """Generate one outfit for a query and export it."""
    from .catalog import load_dataset
    from .boards import render_board
    from .generation import GenerationConfig, Query, generate_outfit
    from .model import ItemIndex

    model, _ = _load_model(ckpt_path)
    dataset = load_dataset(data_dir, split, resolution=model.config.resolution)
    index = ItemIndex.build(model, dataset)
    slot_list = [s.strip() for s in slots.split(",") if s.strip()]
    config = GenerationConfig(k=k, sampling=sampling, seed=seed)
    outfit, trace = generate_outfit(Query.from_text(query, model), slot_list, index,
                                    model, config)

    payload = {
        "query": query,
        "slots": slot_list,
        "sampling": sampling,
        "k": k,
        "seed": seed,
        "items": [
            {
                "item_id": item_id,
                "slot": dataset.items[item_id].semantic_type,
                "title": dataset.items[item_id].title,
                "fine_category": dataset.items[item_id].fine_category,
            }
            for item_id in outfit.item_ids
        ],
        "trace": trace,
    }
    wrote = []
    for raw in out_paths.split(","):
        path = raw.strip()
        if not path:
            continue
        if path.endswith(".json"):
            Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        elif path.endswith(".png"):
            render_board([dataset.items[i] for i in outfit.item_ids], query, path)
        else:
            raise ConfigError(f"--out entries must end in .json or .png, got {path!r}")
        wrote.append(path)
    click.echo(json.dumps({"items": outfit.item_ids, "wrote": wrote}))


@cli.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True),
              envvar="OUTFITGEN_CKPT")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True),
              envvar="OUTFITGEN_DATA")
@click.option("--addr", default="127.0.0.1:8000", show_default=True,
              envvar="OUTFITGEN_ADDR", help="Bind address HOST:PORT.")
@click.option("--split", default="test", show_default=True,
              type=click.Choice(["train", "valid", "test"]), help="Catalog split to serve.")
@click.option("--persist-dir", type=click.Path(), default=None,
              envvar="OUTFITGEN_PERSIST", help="Session snapshot directory.")
def serve(ckpt_path, data_dir, addr, split, persist_dir):
    """Run the composer HTTP service."""
    import uvicorn

    from .service import ServiceBundle, create_app

    bundle = ServiceBundle.load(ckpt_path, data_dir, split_name=split,
                                persist_dir=persist_dir)
    app = create_app(bundle)
    host, _, port = addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(json.dumps({"code": "usage_error", "message": exc.format_message()}),
                   err=True)
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except _DATA_ERRORS as exc:
        click.echo(json.dumps({"code": "data_error", "message": str(exc)}), err=True)
        sys.exit(3)
    except NumericError as exc:
        click.echo(json.dumps({"code": "numeric_error", "message": str(exc)}), err=True)
        sys.exit(4)
    except _USAGE_ERRORS as exc:
        click.echo(json.dumps({"code": "usage_error", "message": str(exc)}), err=True)
        sys.exit(2)
    except OutfitgenError as exc:
        click.echo(json.dumps({"code": "error", "message": str(exc)}), err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
