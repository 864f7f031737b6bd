"""Command-line entry points: ingest, build-index, serve, bench."""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .features import compress_collection, compute_feature_stats
from .harness import build_collection, make_actor, run_actor, sweep, synth_dense, write_csv
from .index import create_index, load_index, save_index
from .retrieval import RetrievalParams
from .storage import ModalityVectors, read_compressed, read_dense, write_compressed


@click.group()
def main():
    """Interactive exploration engine for compressed multimodal collections."""


@main.command()
@click.option("--dense", "dense_path", required=True, type=click.Path(exists=True),
              help="Dense input file (EXQD) for one modality.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Compressed output file (EXQC).")
def ingest(dense_path, out_path):
    """Compress a dense modality file into the 3-word format."""
    dense = read_dense(dense_path)
    stats = compute_feature_stats(dense)
    words = compress_collection(dense, stats)
    write_compressed(out_path, dense.shape[1], words)
    click.echo(f"compressed {dense.shape[0]} items (D={dense.shape[1]}) -> {out_path}")


@main.command("build-index")
@click.option("--compressed", "compressed_path", required=True, type=click.Path(exists=True),
              help="Compressed collection file (EXQC).")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Index output file (EXQI).")
@click.option("--modality", type=click.Choice(["visual", "text"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
def build_index(compressed_path, out_path, modality, seed):
    """Build the hierarchical cluster index for one modality."""
    vectors = read_compressed(compressed_path)
    index = create_index(vectors, seed=seed, modality=modality)
    save_index(index, out_path)
    click.echo(f"{index.n_clusters} clusters over {index.n_items} items "
               f"({index.levels_count} levels) -> {out_path}")


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(), default=None,
              help="Persistence root (defaults to $EXQ_DATA_DIR or ./exq-data).")
def serve(port, host, data_dir):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Report directory for sweep.csv and figures.")
@click.option("--n", default=100_000, show_default=True, help="Collection size.")
@click.option("--d-visual", default=200, show_default=True)
@click.option("--d-text", default=50, show_default=True)
@click.option("--categories", default=10, show_default=True)
@click.option("--strength", default=0.9, show_default=True)
@click.option("--duplicates", default=0.0, show_default=True,
              help="Fraction of identical dead vectors (cluster skew).")
@click.option("--actors", "n_actors", default=3, show_default=True)
@click.option("--rounds", default=10, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--b", "b_values", multiple=True, type=str, default=("8", "64", "all"),
              show_default=True, help="b grid; repeatable, 'all' scans every cluster.")
@click.option("--s-c", default=1, show_default=True)
@click.option("--s-m", default=None, type=int)
@click.option("--w", default=1, show_default=True)
@click.option("--k", default=25, show_default=True)
@click.option("--r", default=100, show_default=True)
def bench(out_dir, n, d_visual, d_text, categories, strength, duplicates,
          n_actors, rounds, seed, b_values, s_c, s_m, w, k, r):
    """Synthetic benchmark: precision/latency per round across a b grid."""
    from .figures import render_sweep_figures

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    click.echo(f"generating synthetic collection (N={n}, D={d_visual}/{d_text})")
    dense_v, dense_t, truth = synth_dense(n, d_visual, d_text, categories,
                                          strength, seed, duplicates)
    click.echo("compressing and indexing")
    collection, indexes = build_collection(dense_v, dense_t, seed=seed)
    n_clusters = indexes["visual"].n_clusters
    click.echo(f"{n_clusters} clusters per modality")

    configs = []
    for value in b_values:
        b = n_clusters if value == "all" else int(value)
        configs.append(RetrievalParams(k=k, r=r, b=max(b, s_c), w=w, s_c=s_c, s_m=s_m))
    actors = [make_actor(truth, c, n, seed=seed + 100 + c)
              for c in range(min(n_actors, categories))]

    click.echo(f"running {len(configs)} configs x {len(actors)} actors x {rounds} rounds")
    rows = sweep(configs, collection, indexes, actors, rounds=rounds, session_seed=seed)
    csv_path = out / "sweep.csv"
    write_csv(rows, csv_path)
    figures = render_sweep_figures(rows, out)
    click.echo(f"wrote {csv_path}")
    for path in figures:
        click.echo(f"wrote {path}")
    (out / "truth.json").write_text(json.dumps(truth))
    for config_rows in {row["config_id"]: None for row in rows}:
        subset = [row for row in rows if row["config_id"] == config_rows]
        click.echo(f"{config_rows}: b={subset[0]['b']} "
                   f"mean precision={np.mean([r_['precision'] for r_ in subset]):.3f} "
                   f"median latency={np.median([r_['latency_ms'] for r_ in subset]):.1f}ms")


if __name__ == "__main__":
    main()
