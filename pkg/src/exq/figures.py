"""Render benchmark figures to files next to the CSV report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_sweep_figures"]


def _series_label(row: dict) -> str:
    s_m = row["S_m"]
    parts = [f"S_c={row['S_c']}", f"w={row['w']}"]
    if s_m not in ("", None):
        parts.append(f"S_m={s_m}")
    return ", ".join(parts)


def _group_configs(rows: list[dict]) -> dict:
    configs: dict = {}
    for row in rows:
        configs.setdefault(row["config_id"], []).append(row)
    return configs


def render_sweep_figures(rows: list[dict], out_dir) -> list[str]:
    """Write precision/latency figures for a sweep; returns the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    if not rows:
        return written
    configs = _group_configs(rows)

    # Mean precision and median latency per config, keyed by b, one line
    # per distinct (S_c, w, S_m) combination.
    series: dict[str, list[tuple[int, float, float]]] = {}
    for config_rows in configs.values():
        first = config_rows[0]
        label = _series_label(first)
        precision = float(np.mean([r["precision"] for r in config_rows]))
        steady = [r for r in config_rows if r["round"] > 1] or config_rows
        latency = float(np.median([r["latency_ms"] for r in steady]))
        series.setdefault(label, []).append((int(first["b"]), precision, latency))

    for fname, idx, ylabel, title in (
        ("precision_vs_b.png", 1, "mean precision (10 rounds)", "Precision vs clusters scored"),
        ("latency_vs_b.png", 2, "median round latency (ms)", "Latency vs clusters scored"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, points in sorted(series.items()):
            points = sorted(points)
            ax.plot([p[0] for p in points], [p[idx] for p in points],
                    marker="o", label=label)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("b (clusters scored per round)")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1 or any(series):
            ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out / fname
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(str(path))

    fig, ax = plt.subplots(figsize=(6, 4))
    for config_id, config_rows in sorted(configs.items()):
        config_rows = sorted(config_rows, key=lambda r: r["round"])
        label = f"{config_id} (b={config_rows[0]['b']})"
        ax.plot([r["round"] for r in config_rows],
                [r["precision"] for r in config_rows], marker=".", label=label)
    ax.set_xlabel("round")
    ax.set_ylabel("precision")
    ax.set_title("Precision per interaction round")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = out / "precision_per_round.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(str(path))
    return written
