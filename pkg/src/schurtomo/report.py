"""Render experiment results to figures and a delimited summary.

Consumes the JSONL written by run_experiment (one record per trial plus
a trailing summary record) and produces PNG figures next to a CSV
summary, so a run can be inspected without re-executing anything.
"""
from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load_results(jsonl_path: str | Path) -> tuple[list[dict], dict | None]:
    """Split a results file into trial records and the summary record."""
    trials: list[dict] = []
    summary: dict | None = None
    for line in Path(jsonl_path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if "summary" in record:
            summary = record["summary"]
        else:
            trials.append(record)
    if not trials:
        raise ValueError(f"{jsonl_path} contains no trial records")
    return trials, summary


def _accuracy_figure(trials: list[dict], path: Path) -> None:
    infid = [t["infidelity"] for t in trials]
    tdist = [t["trace_dist"] for t in trials]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, vals, label in ((axes[0], infid, "infidelity"),
                            (axes[1], tdist, "trace distance")):
        ax.hist(vals, bins=min(40, max(10, len(vals) // 20)), color="#4878cf")
        ax.set_xlabel(label)
        ax.set_ylabel("trials")
    fig.suptitle("Estimate accuracy across trials")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _pac_figure(trials: list[dict], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for key, label in (("infidelity", "infidelity"),
                       ("trace_dist", "trace distance")):
        vals = np.sort([t[key] for t in trials])
        rates = np.arange(1, len(vals) + 1) / len(vals)
        ax.step(vals, rates, where="post", label=label)
    ax.set_xlabel("accuracy threshold")
    ax.set_ylabel("fraction of trials within threshold")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    ax.set_title("Accuracy attainment curves")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _label_figure(trials: list[dict], path: Path) -> None:
    counts = Counter(t["label"] for t in trials)
    labels = sorted(counts, key=lambda s: tuple(-int(p) for p in s.split(",")))
    heights = [counts[s] / len(trials) for s in labels]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.bar(range(len(labels)), heights, color="#6acc65")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_xlabel("final label")
    ax.set_ylabel("frequency")
    ax.set_title("Sampled label distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _register_figure(trials: list[dict], path: Path) -> None:
    counts = Counter(t["max_register_dim"] for t in trials)
    dims = sorted(counts)
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.bar(dims, [counts[m] for m in dims], color="#d65f5f",
           width=min(0.8, 0.8 * (dims[-1] - dims[0] + 1) / len(dims)))
    ax.set_xlabel("peak register dimension")
    ax.set_ylabel("trials")
    ax.set_title("Working-memory footprint per trial")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _summary_csv(trials: list[dict], summary: dict | None, path: Path) -> None:
    infid = np.array([t["infidelity"] for t in trials])
    tdist = np.array([t["trace_dist"] for t in trials])
    fails = sum(1 for t in trials if t["outcome"] == "fail")
    rows = [
        ("trials", len(trials)),
        ("fail_rate", f"{fails / len(trials):.17g}"),
        ("mean_infidelity", f"{infid.mean():.17g}"),
        ("mean_trace_dist", f"{tdist.mean():.17g}"),
        ("smd_infidelity", f"{np.sqrt(np.mean(infid ** 2)):.17g}"),
        ("smd_trace_dist", f"{np.sqrt(np.mean(tdist ** 2)):.17g}"),
        ("max_register_dim", max(t["max_register_dim"] for t in trials)),
    ]
    if summary:
        for threshold, rate in summary.get("pac", {}).items():
            rows.append((f"pac_within_{threshold}", f"{rate:.17g}"))
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("statistic", "value"))
        writer.writerows(rows)


def render_report(jsonl_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Write all figures and the CSV summary; returns the created paths."""
    trials, summary = load_results(jsonl_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    targets = {
        out / "accuracy_hist.png": lambda p: _accuracy_figure(trials, p),
        out / "pac_curve.png": lambda p: _pac_figure(trials, p),
        out / "labels.png": lambda p: _label_figure(trials, p),
        out / "registers.png": lambda p: _register_figure(trials, p),
        out / "summary.csv": lambda p: _summary_csv(trials, summary, p),
    }
    for path, render in targets.items():
        render(path)
    return list(targets)
