"""Static result figures from metrics/sweep/summary CSVs.

Everything renders through the Agg backend into standalone vector files
(SVG by default; any extension matplotlib supports works). Each figure
embeds the configs of the runs it was drawn from in its metadata.
"""

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spatialnn.config import cell_key, cell_label
from spatialnn.errors import FormatError
from spatialnn.train import read_metrics_csv


def _grouped(paths):
    """Group CSVs by experiment cell (config minus seed/paths)."""
    groups = {}
    for path in paths:
        config, header, rows = read_metrics_csv(path)
        if config is None:
            raise FormatError("%s: missing embedded config" % path)
        key = cell_key(config)
        groups.setdefault(key, {"label": cell_label(config), "runs": []})
        groups[key]["runs"].append((config, header, np.asarray(rows)))
    return [groups[k] for k in sorted(groups, key=lambda k: groups[k]["label"])]


def _meta(groups):
    configs = [run[0] for g in groups for run in g["runs"]]
    return {"Description": json.dumps(configs)}


def plot_metrics(paths, out_path):
    """Test accuracy vs. epoch; one curve per run, grouped legend by cell."""
    groups = _grouped(paths)
    fig, ax = plt.subplots(figsize=(6, 4))
    for group in groups:
        for config, header, rows in group["runs"]:
            e = rows[:, header.index("epoch")]
            a = rows[:, header.index("test_accuracy")]
            ax.plot(e, a, label="%s seed%s" % (group["label"], config.get("seed")))
    ax.set_xlabel("epoch")
    ax.set_ylabel("test accuracy")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, metadata=_meta(groups))
    plt.close(fig)
    return out_path


def plot_sweep(paths, out_path):
    """Accuracy vs. pruning fraction; seeds of one cell become mean +- std."""
    groups = _grouped(paths)
    fig, ax = plt.subplots(figsize=(6, 4))
    for group in groups:
        curves = []
        for config, header, rows in group["runs"]:
            f = rows[:, header.index("fraction")]
            a = rows[:, header.index("test_accuracy")]
            order = np.argsort(f)
            curves.append((f[order], a[order]))
        fractions = curves[0][0]
        accs = np.stack([c[1] for c in curves])
        mean = accs.mean(axis=0)
        std = accs.std(axis=0, ddof=1) if accs.shape[0] > 1 else np.zeros_like(mean)
        ax.errorbar(fractions, mean, yerr=std, marker="o", capsize=3, label=group["label"])
    ax.set_xlabel("pruning fraction")
    ax.set_ylabel("test accuracy")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, metadata=_meta(groups))
    plt.close(fig)
    return out_path


def plot_bars(summary_rows, out_path):
    """Bar chart with std error bars from aggregate_seeds output."""
    labels = [r["label"] for r in summary_rows]
    means = [r["mean_accuracy"] for r in summary_rows]
    stds = [r["std_accuracy"] for r in summary_rows]
    fig, ax = plt.subplots(figsize=(max(4, 1.1 * len(labels)), 4))
    x = np.arange(len(labels))
    ax.bar(x, means, yerr=stds, capsize=4)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Description": json.dumps(summary_rows)})
    plt.close(fig)
    return out_path
