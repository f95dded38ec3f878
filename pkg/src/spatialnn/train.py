"""Experiment driver: build models from configs, train, evaluate, record.

A run is deterministic given (config, seed): parameter init, shuffling,
and any stochastic encoding all draw from seeded substreams. Each run
owns its output directory <out_dir>/seed<seed>/ and writes
    metrics.csv      one row per epoch: epoch,train_loss,test_accuracy,wall_clock_s
    summary.json     final accuracy (after any post-training pruning) + config
    checkpoint.npz   final parameters (+ prune masks when pruning was active)
    config.snapshot.cfg
Metrics CSV schema v1: two comment lines (schema tag, resolved config
JSON), then the fixed header row. wall_clock_s is the one column that
legitimately differs between reruns.
"""

import csv
import io
import json
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from spatialnn.adam import AdamState, adam_step
from spatialnn.checkpoint import load_checkpoint, save_checkpoint
from spatialnn.config import cell_key, cell_label, dump_config, resolved_dict
from spatialnn.errors import ConfigError, FormatError, TrainingDivergedError
from spatialnn.geometry import EmbeddingSpec
from spatialnn.mlp import DenseMLP, SpatialMLP, softmax_cross_entropy
from spatialnn.mnist import STANDARD_FILES, BatchPlan, epoch_batches, load_image_set
from spatialnn.pruning import DynamicPruner, build_mask
from spatialnn.snn import LIFConfig, SpikingNetwork, predict_classes
from spatialnn.seeding import STREAM_ENCODE, substream

METRICS_SCHEMA = "spatialnn-metrics v1"
SWEEP_SCHEMA = "spatialnn-sweep v1"
SUMMARY_SCHEMA = "spatialnn-summary v1"
METRICS_HEADER = ("epoch", "train_loss", "test_accuracy", "wall_clock_s")

# Substream roles under STREAM_ENCODE (stochastic input encodings).
_ENCODE_TRAIN = 1
_ENCODE_EVAL = 2


def build_model(cfg):
    """Instantiate the model family described by a RunConfig."""
    dtype = np.float64 if cfg.dtype == "float64" else np.float32
    if cfg.is_spatial:
        spec = EmbeddingSpec(cfg.layers, dim=cfg.dim, z_policy=cfg.z_policy,
                             inhibition_steepness=cfg.inhibition_steepness)
        base = SpatialMLP(spec, activation=cfg.activation, seed=cfg.seed, dtype=dtype)
    else:
        base = DenseMLP(cfg.layers, activation=cfg.activation, seed=cfg.seed, dtype=dtype)
    if cfg.is_snn:
        lif = LIFConfig(beta=cfg.snn_beta, threshold=cfg.snn_threshold, num_steps=cfg.snn_steps,
                        surrogate_slope=cfg.snn_surrogate_slope, loss=cfg.snn_loss,
                        encoding=cfg.snn_encoding)
        return SpikingNetwork(base, lif)
    return base


def load_model(path):
    """Rebuild a model from a checkpoint. Returns (cfg, model, masks)."""
    cfg, params, masks, _ = load_checkpoint(path)
    model = build_model(cfg)
    mine = model.param_dict()
    if set(mine) != set(params):
        raise FormatError("checkpoint parameter groups %r do not match config (%r)"
                          % (sorted(params), sorted(mine)))
    model.set_param_dict({k: np.ascontiguousarray(params[k], dtype=mine[k].dtype) for k in params})
    return cfg, model, masks


def _data_path(data_dir, split, kind):
    base = os.path.join(data_dir, STANDARD_FILES[(split, kind)])
    for candidate in (base, base + ".gz"):
        if os.path.exists(candidate):
            return candidate
    raise ConfigError("missing data file %s (also tried .gz); place the IDX files under %r"
                      % (base, data_dir))


def load_dataset(cfg):
    """(train, test) ImageSets per the config's data_dir and limits."""
    dtype = np.float64 if cfg.dtype == "float64" else np.float32
    train = load_image_set(_data_path(cfg.data_dir, "train", "images"),
                           _data_path(cfg.data_dir, "train", "labels"),
                           standardize=cfg.standardize, dtype=dtype, limit=cfg.limit_train)
    test = load_image_set(_data_path(cfg.data_dir, "test", "images"),
                          _data_path(cfg.data_dir, "test", "labels"),
                          standardize=cfg.standardize, dtype=dtype, limit=cfg.limit_test)
    return train, test


def _loss_and_grads(model, cfg, x, y, masks=None, pruner=None, rng=None):
    if cfg.is_snn:
        _, cache = model.forward(x, masks=masks, pruner=pruner, rng=rng)
        return model.loss_and_backward(cache, y)
    logits, cache = model.forward(x, masks=masks, pruner=pruner)
    loss, dlogits = softmax_cross_entropy(logits, y)
    return loss, model.backward(cache, dlogits)


def evaluate(model, cfg, dataset, masks=None, pruner=None):
    """Test accuracy, evaluated in batch_size chunks."""
    correct = 0
    needs_rng = cfg.is_snn and cfg.snn_encoding == "poisson"
    for i, start in enumerate(range(0, dataset.count, cfg.batch_size)):
        x = dataset.images[start:start + cfg.batch_size]
        y = dataset.labels[start:start + cfg.batch_size]
        if cfg.is_snn:
            rng = substream(cfg.seed, STREAM_ENCODE, _ENCODE_EVAL, i) if needs_rng else None
            out, _ = model.forward(x, masks=masks, pruner=pruner, rng=rng)
            pred = predict_classes(out)
        else:
            logits, _ = model.forward(x, masks=masks, pruner=pruner)
            pred = logits.argmax(axis=1)
        correct += int((pred == y).sum())
    return correct / dataset.count


@dataclass
class RunMetrics:
    """Per-epoch records plus the final (post-protocol) test accuracy."""

    rows: list
    final_accuracy: float
    out_dir: str
    checkpoint: str


def _metrics_preamble(cfg):
    return "# %s\n# config: %s\n" % (METRICS_SCHEMA, json.dumps(resolved_dict(cfg)))


def run_experiment(cfg, dataset=None):
    """Train per config; returns RunMetrics and writes the artifact set.

    `dataset` may inject preloaded (train, test) ImageSets; by default the
    four IDX files referenced by the config are loaded (and must exist).
    """
    train, test = dataset if dataset is not None else load_dataset(cfg)
    if cfg.batch_size > train.count:
        raise ConfigError("batch_size %d exceeds training set size %d" % (cfg.batch_size, train.count))
    out_dir = os.path.join(cfg.out_dir, "seed%d" % cfg.seed)
    os.makedirs(out_dir, exist_ok=True)
    model = build_model(cfg)
    opt = AdamState.init(model.param_dict(), lr=cfg.learning_rate)
    pruner = None
    if cfg.prune_protocol == "during-training":
        pruner = DynamicPruner(cfg.prune_fraction, scope=cfg.prune_scope)
    plan = BatchPlan(seed=cfg.seed, batch_size=cfg.batch_size)
    needs_rng = cfg.is_snn and cfg.snn_encoding == "poisson"

    rows = []
    metrics_path = os.path.join(out_dir, "metrics.csv")
    with open(metrics_path, "w", newline="") as f:
        f.write(_metrics_preamble(cfg))
        writer = csv.writer(f)
        writer.writerow(METRICS_HEADER)
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            losses = []
            for i, (xb, yb) in enumerate(epoch_batches(train, plan, epoch)):
                rng = substream(cfg.seed, STREAM_ENCODE, _ENCODE_TRAIN, epoch, i) if needs_rng else None
                loss, grads = _loss_and_grads(model, cfg, xb, yb, pruner=pruner, rng=rng)
                if not np.isfinite(loss):
                    raise TrainingDivergedError("non-finite training loss in epoch %d" % epoch)
                params, opt = adam_step(model.param_dict(), grads, opt)
                model.set_param_dict(params)
                losses.append(loss)
            acc = evaluate(model, cfg, test, pruner=pruner)
            wall = time.perf_counter() - t0
            row = {"epoch": epoch, "train_loss": float(np.mean(losses)),
                   "test_accuracy": acc, "wall_clock_s": wall}
            rows.append(row)
            writer.writerow([epoch, "%.10g" % row["train_loss"], "%.10g" % acc, "%.6g" % wall])
            f.flush()

    # Final protocol application and artifacts.
    masks = None
    if cfg.prune_protocol == "post-training":
        mask = build_mask(model.ranking_blocks(), cfg.prune_fraction, scope=cfg.prune_scope)
        masks = mask.keep
        final_accuracy = evaluate(model, cfg, test, masks=masks)
    elif cfg.prune_protocol == "during-training":
        masks = pruner.last_mask.keep if pruner.last_mask is not None else None
        final_accuracy = rows[-1]["test_accuracy"] if rows else evaluate(model, cfg, test, pruner=pruner)
    else:
        final_accuracy = rows[-1]["test_accuracy"] if rows else evaluate(model, cfg, test)

    ckpt_path = os.path.join(out_dir, "checkpoint.npz")
    save_checkpoint(ckpt_path, cfg, model.param_dict(), masks=masks)
    with open(os.path.join(out_dir, "config.snapshot.cfg"), "w") as f:
        f.write("# resolved configuration (seed %d)\n" % cfg.seed)
        f.write(dump_config(cfg))
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump({"config": resolved_dict(cfg), "final_accuracy": final_accuracy,
                   "epochs_run": len(rows)}, f, indent=2)
        f.write("\n")
    return RunMetrics(rows=rows, final_accuracy=final_accuracy, out_dir=out_dir, checkpoint=ckpt_path)


def run_pruning_sweep(cfg, fractions, dataset=None, checkpoint=None):
    """Accuracy per pruning fraction.

    post-training: one trained model (fresh, or `checkpoint`), masked and
    re-evaluated per fraction. during-training: one full training run per
    fraction. Writes sweep.csv under <out_dir>/seed<seed>/.
    """
    fractions = list(fractions)
    if any(not 0.0 <= f < 1.0 for f in fractions):
        raise ConfigError("pruning fractions must lie in [0, 1)")
    protocol = cfg.prune_protocol if cfg.prune_protocol != "none" else "post-training"
    results = []
    if protocol == "post-training":
        train_test = dataset if dataset is not None else load_dataset(cfg)
        if checkpoint is not None:
            _, model, _ = load_model(checkpoint)
        else:
            base_cfg = replace(cfg, prune_protocol="none", prune_fraction=0.0)
            metrics = run_experiment(base_cfg, dataset=train_test)
            _, model, _ = load_model(metrics.checkpoint)
        for f in fractions:
            if f == 0.0:
                acc = evaluate(model, cfg, train_test[1])
            else:
                mask = build_mask(model.ranking_blocks(), f, scope=cfg.prune_scope)
                acc = evaluate(model, cfg, train_test[1], masks=mask.keep)
            results.append((f, acc))
    else:
        for f in fractions:
            sub = replace(cfg, prune_protocol="during-training", prune_fraction=f,
                          out_dir=os.path.join(cfg.out_dir, "frac%g" % f))
            metrics = run_experiment(sub, dataset=dataset)
            results.append((f, metrics.final_accuracy))

    out_dir = os.path.join(cfg.out_dir, "seed%d" % cfg.seed)
    os.makedirs(out_dir, exist_ok=True)
    sweep_path = os.path.join(out_dir, "sweep.csv")
    with open(sweep_path, "w", newline="") as f:
        f.write("# %s\n# protocol: %s\n# config: %s\n" % (SWEEP_SCHEMA, protocol,
                                                          json.dumps(resolved_dict(cfg))))
        writer = csv.writer(f)
        writer.writerow(("fraction", "test_accuracy"))
        for frac, acc in results:
            writer.writerow(["%.10g" % frac, "%.10g" % acc])
    return results


def read_metrics_csv(path):
    """Parse a metrics or sweep CSV. Returns (config dict or None, header, rows)."""
    config = None
    header = None
    rows = []
    with open(path, "r") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                if line.startswith("# config:"):
                    config = json.loads(line[len("# config:"):])
                continue
            if not line:
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise FormatError("%s: no header row" % path)
    return config, header, rows


def aggregate_seeds(paths):
    """Group metrics CSVs into experiment cells; mean +- std of final accuracy.

    All runs in a cell must share the full configuration apart from seed
    and file locations; a mismatch within one cell is an error. Sample
    standard deviation uses the n-1 denominator (0 for a single run).
    """
    cells = {}
    for path in paths:
        config, header, rows = read_metrics_csv(path)
        if config is None:
            raise FormatError("%s: missing embedded config" % path)
        if not rows:
            raise FormatError("%s: no epoch rows to aggregate" % path)
        acc_col = header.index("test_accuracy")
        key = cell_key(config)
        entry = cells.setdefault(key, {"label": cell_label(config), "configs": [], "accs": [], "seeds": []})
        entry["configs"].append(config)
        entry["accs"].append(rows[-1][acc_col])
        entry["seeds"].append(config.get("seed"))
    for key, entry in cells.items():
        first = entry["configs"][0]
        for other in entry["configs"][1:]:
            if cell_key(other) != cell_key(first):
                raise FormatError("mismatched configs aggregated into one cell: %s" % entry["label"])
    out = []
    for key in sorted(cells, key=lambda k: cells[k]["label"]):
        entry = cells[key]
        accs = np.asarray(entry["accs"], dtype=np.float64)
        std = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
        out.append({"label": entry["label"], "n": int(accs.size),
                    "mean_accuracy": float(accs.mean()), "std_accuracy": std,
                    "seeds": entry["seeds"]})
    return out


def write_summary_csv(path, summary_rows):
    with open(path, "w", newline="") as f:
        f.write("# %s\n" % SUMMARY_SCHEMA)
        writer = csv.writer(f)
        writer.writerow(("cell", "n", "mean_accuracy", "std_accuracy"))
        for row in summary_rows:
            writer.writerow([row["label"], row["n"], "%.10g" % row["mean_accuracy"],
                             "%.10g" % row["std_accuracy"]])


def format_summary_table(summary_rows):
    buf = io.StringIO()
    width = max([len(r["label"]) for r in summary_rows] + [4])
    buf.write("%-*s  %3s  %-8s  %-8s\n" % (width, "cell", "n", "mean", "std"))
    for row in summary_rows:
        buf.write("%-*s  %3d  %.6f  %.6f\n" % (width, row["label"], row["n"],
                                               row["mean_accuracy"], row["std_accuracy"]))
    return buf.getvalue()
