"""Versioned model checkpoints.

A checkpoint is a numpy .npz archive: one array per parameter group
(keys prefixed "param:"), optional prune-mask arrays ("mask:<i>"), and a
"meta" JSON string holding the format version plus the fully resolved run
configuration. The format is stable across runs; loaders reject unknown
versions.
"""

import json

import numpy as np

from spatialnn.config import RunConfig, resolved_dict
from spatialnn.errors import FormatError

FORMAT_NAME = "spatialnn-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(path, cfg, params, masks=None, extra=None):
    """Write config + parameter arrays (+ optional prune masks) to `path`."""
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": resolved_dict(cfg),
    }
    if extra:
        meta["extra"] = extra
    arrays = {"param:%s" % k: np.asarray(v) for k, v in params.items()}
    if masks is not None:
        for i, m in enumerate(masks):
            arrays["mask:%d" % i] = np.asarray(m)
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Read a checkpoint. Returns (RunConfig, params dict, masks or None, meta)."""
    with np.load(path, allow_pickle=False) as npz:
        if "meta" not in npz:
            raise FormatError("%s: not a %s file (no meta entry)" % (path, FORMAT_NAME))
        meta = json.loads(str(npz["meta"][()]))
        if meta.get("format") != FORMAT_NAME:
            raise FormatError("%s: unexpected format %r" % (path, meta.get("format")))
        if meta.get("version") != FORMAT_VERSION:
            raise FormatError("%s: unsupported version %r (reader supports %d)"
                              % (path, meta.get("version"), FORMAT_VERSION))
        params = {}
        mask_items = {}
        for key in npz.files:
            if key.startswith("param:"):
                params[key[len("param:"):]] = npz[key]
            elif key.startswith("mask:"):
                mask_items[int(key[len("mask:"):])] = npz[key]
        masks = [mask_items[i] for i in sorted(mask_items)] if mask_items else None
    cfg = RunConfig(**{k: (tuple(v) if k == "layers" else v) for k, v in meta["config"].items()})
    return cfg, params, masks, meta
