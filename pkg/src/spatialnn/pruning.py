"""Magnitude-based pruning of connection blocks.

Ranking keys are the raw 1/distance weights for spatial models (so the
smallest weights are exactly the longest connections) and absolute values
for dense models; models supply them via ranking_blocks(). The dropped
set is the smallest `fraction` of connections, over all blocks (Global
scope) or within each block (PerBlock). Ties are broken deterministically
by (block index, row, column) ascending: among equal keys, earlier
positions are dropped first.

Two protocols: post-training masks a finished model once; during-training
recomputes the mask from the current weights on every forward pass, so a
dropped connection may re-enter later if its rank improves.
"""

from dataclasses import dataclass

import numpy as np

from spatialnn.errors import ConfigError, ShapeError

SCOPE_GLOBAL = "global"
SCOPE_PER_BLOCK = "per-block"
PROTO_POST = "post-training"
PROTO_DURING = "during-training"


@dataclass
class PruneMask:
    """Boolean keep/drop matrices, one per connection block."""

    keep: list
    fraction: float
    scope: str = SCOPE_GLOBAL
    protocol: str = PROTO_POST

    def kept_count(self):
        return sum(int(k.sum()) for k in self.keep)

    def total_count(self):
        return sum(int(k.size) for k in self.keep)


def _kept_count(total, fraction):
    # Python round (half to even); documented in the README's pruning notes.
    return int(round((1.0 - fraction) * total))


def _drop_smallest(flat_keys, n_drop):
    """Boolean keep vector dropping the n_drop smallest keys.

    Deterministic under ties: among entries equal to the cut value, the
    lowest flat indices are dropped first.
    """
    keep = np.ones(flat_keys.size, dtype=bool)
    if n_drop <= 0:
        return keep
    cut = np.partition(flat_keys, n_drop - 1)[n_drop - 1]
    below = flat_keys < cut
    keep[below] = False
    remaining = n_drop - int(below.sum())
    if remaining > 0:
        at_cut = np.flatnonzero(flat_keys == cut)
        keep[at_cut[:remaining]] = False
    return keep


def build_mask(ranking_blocks, fraction, scope=SCOPE_GLOBAL, protocol=PROTO_POST):
    """Mask dropping the smallest `fraction` of connections by ranking key."""
    if not 0.0 <= fraction < 1.0:
        raise ConfigError("pruning fraction must lie in [0, 1), got %g" % fraction)
    if scope not in (SCOPE_GLOBAL, SCOPE_PER_BLOCK):
        raise ConfigError("unknown pruning scope %r" % scope)
    sizes = [b.size for b in ranking_blocks]
    if scope == SCOPE_GLOBAL:
        flat = np.concatenate([np.asarray(b, dtype=np.float64).ravel() for b in ranking_blocks])
        total = flat.size
        keep_flat = _drop_smallest(flat, total - _kept_count(total, fraction))
        keep, start = [], 0
        for b, size in zip(ranking_blocks, sizes):
            keep.append(keep_flat[start:start + size].reshape(b.shape))
            start += size
    else:
        keep = []
        for b in ranking_blocks:
            flat = np.asarray(b, dtype=np.float64).ravel()
            keep_flat = _drop_smallest(flat, b.size - _kept_count(b.size, fraction))
            keep.append(keep_flat.reshape(b.shape))
    return PruneMask(keep, fraction, scope=scope, protocol=protocol)


def apply_mask(weights, keep):
    """Zero dropped entries of one weight matrix; kept entries are unchanged."""
    w = np.asarray(weights)
    k = np.asarray(keep)
    if w.shape != k.shape:
        raise ShapeError("weights %r vs mask %r" % (w.shape, k.shape))
    return w * k


class DynamicPruner:
    """Per-forward-pass mask recomputation (the during-training protocol).

    Models call masks_for(ranking_blocks) inside forward; the mask built
    from the current weights masks that pass and its backward. The latest
    mask is kept for inspection and checkpointing.
    """

    def __init__(self, fraction, scope=SCOPE_GLOBAL):
        if not 0.0 <= fraction < 1.0:
            raise ConfigError("pruning fraction must lie in [0, 1), got %g" % fraction)
        self.fraction = fraction
        self.scope = scope
        self.last_mask = None

    def masks_for(self, ranking_blocks):
        mask = build_mask(ranking_blocks, self.fraction, scope=self.scope, protocol=PROTO_DURING)
        self.last_mask = mask
        return mask.keep
