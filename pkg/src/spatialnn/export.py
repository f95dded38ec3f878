"""Neuron position/activation export and scatter plots.

Positions of a spatial checkpoint are written as JSON ("spatialnn-positions
v1"): per layer, each neuron's free coordinates, z, inhibition value and
mask, and its activation in response to the mean test image of a chosen
class. Floats serialize via repr, so export -> import round-trips exactly.

One SVG scatter per layer shows the first two free coordinates colored by
signed activation (activation times inhibition mask where a mask exists),
with the output layer's positions overlaid as reference crosses.
"""

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spatialnn.config import resolved_dict
from spatialnn.errors import ConfigError, FormatError
from spatialnn.geometry import ZPolicy, inhibition_mask
from spatialnn.snn import SpikingNetwork
from spatialnn.train import load_dataset, load_model

POSITIONS_FORMAT = "spatialnn-positions"
POSITIONS_VERSION = 1


def _layer_z_values(model):
    """Per-layer z coordinates as vectors (constant vectors unless FREE_Z)."""
    spec = model.spec
    p = model.params
    if spec.z_policy is ZPolicy.FREE_Z:
        return [z.copy() for z in p.z_coords]
    if spec.z_policy is ZPolicy.LEARNABLE_GAP:
        offsets = np.concatenate([[0.0], np.cumsum(p.gaps)])
    else:
        offsets = np.arange(spec.n_layers, dtype=np.float64)
    return [np.full(n, offsets[l]) for l, n in enumerate(spec.layer_sizes)]


def _class_mean_activations(model, cfg, test_set, class_id):
    """Per-layer activation vectors for the mean image of one class."""
    sel = test_set.labels == class_id
    if not sel.any():
        raise ConfigError("test set holds no samples of class %d" % class_id)
    x = test_set.images[sel].mean(axis=0, keepdims=True)
    if cfg.is_snn:
        _, cache = model.forward(x)
        # Mean spike rate per neuron; the drive itself for the input layer.
        acts = [x[0]] + [spk.mean(axis=0)[0] for spk in cache.spk]
    else:
        _, cache = model.forward(x)
        acts = [a[0] for a in cache.acts]
    return [np.asarray(a, dtype=np.float64) for a in acts]


def export_positions(checkpoint_path, out_dir=None, class_id=0, dataset=None, plot=True):
    """Export positions (+ activations) of a spatial checkpoint.

    Returns the JSON path. Writes layer<i>.svg scatter plots alongside it
    unless plot=False. `dataset` may inject a preloaded (train, test) pair.
    """
    cfg, model, _ = load_model(checkpoint_path)
    if not cfg.is_spatial:
        raise ConfigError("position export needs a spatial checkpoint; %r is a dense model" % cfg.family)
    backbone = model.backbone if isinstance(model, SpikingNetwork) else model
    spec = backbone.spec
    test_set = (dataset[1] if dataset is not None else load_dataset(cfg)[1])
    acts = _class_mean_activations(model, cfg, test_set, class_id)
    z_values = _layer_z_values(backbone)
    out_dir = out_dir or os.path.dirname(os.path.abspath(checkpoint_path))
    os.makedirs(out_dir, exist_ok=True)

    layers = []
    for l, n in enumerate(spec.layer_sizes):
        coords = backbone.params.free_coords[l]
        has_mask = l < spec.n_layers - 1
        values = backbone.params.inhibition[l] if has_mask else None
        masks = inhibition_mask(values, spec.inhibition_steepness) if has_mask else None
        neurons = []
        for i in range(n):
            rec = {
                "id": i,
                "coords": [float(c) for c in coords[i]],
                "z": float(z_values[l][i]),
                "activation": float(acts[l][i]),
            }
            if has_mask:
                rec["inhibition_value"] = float(values[i])
                rec["inhibition_mask"] = float(masks[i])
            neurons.append(rec)
        layers.append({"layer": l, "size": int(n), "neurons": neurons})

    doc = {
        "format": POSITIONS_FORMAT,
        "version": POSITIONS_VERSION,
        "config": resolved_dict(cfg),
        "class_id": int(class_id),
        "layers": layers,
    }
    json_path = os.path.join(out_dir, "positions.json")
    with open(json_path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")

    if plot:
        _plot_layers(doc, backbone, out_dir)
    return json_path


def import_positions(path):
    """Load and validate a positions JSON file."""
    with open(path, "r") as f:
        doc = json.load(f)
    if doc.get("format") != POSITIONS_FORMAT or doc.get("version") != POSITIONS_VERSION:
        raise FormatError("%s: not a %s v%d file" % (path, POSITIONS_FORMAT, POSITIONS_VERSION))
    return doc


def _scatter_xy(layer):
    xs = np.array([n["coords"][0] for n in layer["neurons"]])
    if len(layer["neurons"][0]["coords"]) > 1:
        ys = np.array([n["coords"][1] for n in layer["neurons"]])
    else:
        ys = np.zeros_like(xs)
    return xs, ys


def _plot_layers(doc, backbone, out_dir):
    meta = {"Description": json.dumps(doc["config"])}
    out_layer = doc["layers"][-1]
    ox, oy = _scatter_xy(out_layer)
    for layer in doc["layers"]:
        xs, ys = _scatter_xy(layer)
        signed = np.array([n["activation"] * n.get("inhibition_mask", 1.0) for n in layer["neurons"]])
        vmax = max(float(np.abs(signed).max()), 1e-12)
        fig, ax = plt.subplots(figsize=(5, 4.5))
        sc = ax.scatter(xs, ys, c=signed, cmap="RdBu_r", vmin=-vmax, vmax=vmax,
                        s=18, edgecolors="none")
        if layer is not out_layer:
            ax.scatter(ox, oy, marker="x", c="black", s=40, label="output neurons")
            ax.legend(loc="upper right", fontsize=8)
        ax.set_xlabel("free coordinate 1")
        ax.set_ylabel("free coordinate 2")
        ax.set_title("layer %d (class %d drive)" % (layer["layer"], doc["class_id"]))
        fig.colorbar(sc, ax=ax, label="signed activation")
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "layer%d.svg" % layer["layer"]), metadata=meta)
        plt.close(fig)
