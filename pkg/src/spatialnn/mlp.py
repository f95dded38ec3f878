"""Feedforward models: the spatially embedded MLP and its dense baseline.

Both models expose the same surface: forward(x) -> (logits, cache),
backward(cache, dlogits) -> gradient dict keyed like param_dict(). The
backward passes are hand-derived vector-Jacobian products (the graph is
small and fixed), which keeps every gradient checkable against finite
differences.

The dense materialization of a spatial model (fold 1/distance weights,
inhibition mask, and prune mask into explicit matrices) is the primary
correctness oracle: spatial forward must equal the materialized dense
forward to near machine precision.
"""

from dataclasses import dataclass

import numpy as np

from spatialnn import kernels
from spatialnn.errors import ShapeError, UsageError
from spatialnn.geometry import (
    EPSILON_DIST,
    ZPolicy,
    count_params_spatial,
    inhibition_gradient,
    inhibition_mask,
    init_spatial_params,
)
from spatialnn.seeding import STREAM_INIT, substream


def relu(z):
    return np.maximum(z, 0.0)


def drelu(z):
    return (z > 0).astype(z.dtype)


LEAKY_SLOPE = 0.01


def leaky_relu(z):
    return np.where(z > 0, z, LEAKY_SLOPE * z)


def dleaky_relu(z):
    return np.where(z > 0, z.dtype.type(1.0), z.dtype.type(LEAKY_SLOPE))


# leaky-relu is the default: all 1/distance weights are positive and each
# presynaptic sign is shared across a neuron's whole fan-out, so entire
# layers routinely saturate negative early in training; plain relu turns
# that into an absorbing dead state, the leaky slope keeps it recoverable.
ACTIVATIONS = {
    "relu": (relu, drelu),
    "leaky-relu": (leaky_relu, dleaky_relu),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "sigmoid": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda z: (s := 1.0 / (1.0 + np.exp(-z))) * (1.0 - s)),
}


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns (loss, dloss/dlogits); the gradient is (softmax - onehot)/batch.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    batch, n_classes = logits.shape
    if labels.shape != (batch,):
        raise ShapeError("labels must be (%d,), got %r" % (batch, labels.shape))
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("label outside 0..%d" % (n_classes - 1))
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsumexp
    loss = -float(logp[np.arange(batch), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(batch), labels] -= 1.0
    grad /= batch
    return loss, grad.astype(logits.dtype)


@dataclass
class _SpatialCache:
    version: int
    acts: list          # acts[0] = input, acts[-1] = logits
    preacts: list       # preacts[i] = pre-activation of layer i+1
    masked_acts: list   # acts[l] * inhibition mask, per gap
    inhib: list         # inhibition mask vectors per gap
    dists: list         # distance matrix per gap
    w_eff: list         # weights actually used (after prune mask)
    masks: list         # prune masks or None
    zpairs: list        # (za, zb) used per gap


class SpatialMLP:
    """MLP whose weights are 1/distance between embedded neurons.

    Per gap l: a_{l+1} = f((a_l * m_l) @ W_l + b_{l+1}), W_l[i, j] =
    1/d(neuron i of layer l, neuron j of layer l+1), m_l the inhibition
    mask of layer l. The final gap uses the identity (raw logits).
    """

    def __init__(self, spec, params=None, activation="leaky-relu", seed=0, dtype=np.float64,
                 eps=EPSILON_DIST):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.eps = eps
        self.activation = activation
        self.act, self.dact = ACTIVATIONS[activation]
        self.params = params if params is not None else init_spatial_params(spec, seed, dtype=self.dtype)
        self._version = 0
        n = self.params.n_scalars()
        expected = count_params_spatial(spec)
        if n != expected:
            raise ShapeError("parameter container holds %d scalars, architecture requires %d" % (n, expected))

    # -- parameter plumbing -------------------------------------------------
    def param_dict(self):
        return self.params.param_dict()

    def set_param_dict(self, new_params):
        self.params.load_param_dict(new_params)
        self._version += 1

    def z_pair(self, gap):
        """(za, zb) layer-axis coordinates used by connection block `gap`."""
        p, dt = self.params, self.dtype
        n_a = self.spec.layer_sizes[gap]
        n_b = self.spec.layer_sizes[gap + 1]
        if self.spec.z_policy is ZPolicy.FREE_Z:
            return p.z_coords[gap], p.z_coords[gap + 1]
        gap_value = 1.0 if self.spec.z_policy is ZPolicy.FIXED_UNIT else float(p.gaps[gap])
        return np.zeros(n_a, dtype=dt), np.full(n_b, gap_value, dtype=dt)

    def blocks(self):
        """Materialize (weights, distances, zpairs) for every gap.

        Weights are the raw 1/distance values, before inhibition and before
        any prune mask; they are also the ranking keys for pruning.
        """
        weights, dists, zpairs = [], [], []
        for l in range(self.spec.n_gaps):
            za, zb = self.z_pair(l)
            d = kernels.pairwise_distances(self.params.free_coords[l], self.params.free_coords[l + 1],
                                           za, zb, self.eps)
            dists.append(d)
            weights.append(1.0 / d)
            zpairs.append((za, zb))
        return weights, dists, zpairs

    def ranking_blocks(self):
        """Per-block pruning keys: the raw positive 1/distance weights."""
        return self.blocks()[0]

    # -- forward / backward -------------------------------------------------
    def forward(self, x, masks=None, pruner=None):
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.spec.layer_sizes[0]:
            raise ShapeError("input must be (batch, %d), got %r" % (self.spec.layer_sizes[0], x.shape))
        w_raw, dists, zpairs = self.blocks()
        if pruner is not None:
            masks = pruner.masks_for(w_raw)
        acts = [x]
        preacts, masked_acts, inhib, w_eff = [], [], [], []
        for l in range(self.spec.n_gaps):
            m = inhibition_mask(self.params.inhibition[l], self.spec.inhibition_steepness)
            inhib.append(m)
            w = w_raw[l] if masks is None else w_raw[l] * masks[l]
            w_eff.append(w)
            xm = acts[l] * m
            masked_acts.append(xm)
            z = xm @ w + self.params.biases[l]
            preacts.append(z)
            acts.append(self.act(z) if l < self.spec.n_gaps - 1 else z)
        cache = _SpatialCache(self._version, acts, preacts, masked_acts, inhib, dists,
                              w_eff, masks, zpairs)
        return acts[-1], cache

    def backward(self, cache, dlogits):
        """Gradients of a scalar loss given dloss/dlogits. Keys match param_dict()."""
        if cache.version != self._version:
            raise UsageError("stale cache: parameters changed since the forward pass")
        p = self.params
        grads = {"coords%d" % l: np.zeros_like(c) for l, c in enumerate(p.free_coords)}
        if p.gaps is not None:
            grads["gaps"] = np.zeros_like(p.gaps)
        if p.z_coords is not None:
            for l, z in enumerate(p.z_coords):
                grads["z%d" % l] = np.zeros_like(z)
        g = np.ascontiguousarray(dlogits, dtype=self.dtype)
        for l in range(self.spec.n_gaps - 1, -1, -1):
            grads["bias%d" % (l + 1)] = g.sum(axis=0)
            dw = cache.masked_acts[l].T @ g
            if cache.masks is not None:
                dw = dw * cache.masks[l]
            dx = g @ cache.w_eff[l].T
            dmask = (dx * cache.acts[l]).sum(axis=0)
            grads["inhib%d" % l] = inhibition_gradient(p.inhibition[l], self.spec.inhibition_steepness, dmask)
            self._accumulate_geometry(grads, l, dw, cache.dists[l], cache.zpairs[l])
            if l > 0:
                g = (dx * cache.inhib[l]) * self.dact(cache.preacts[l - 1])
        return grads

    def _accumulate_geometry(self, grads, gap, dw, dist, zpair):
        """Project dL/dW of one block onto coordinates and z parameters."""
        dw = np.ascontiguousarray(dw)
        za, zb = zpair
        da, db, dza, dzb = kernels.weight_input_grads(self.params.free_coords[gap],
                                                      self.params.free_coords[gap + 1],
                                                      za, zb, dist, dw, self.eps)
        grads["coords%d" % gap] += da
        grads["coords%d" % (gap + 1)] += db
        if self.spec.z_policy is ZPolicy.LEARNABLE_GAP:
            grads["gaps"][gap] += dzb.sum()
        elif self.spec.z_policy is ZPolicy.FREE_Z:
            grads["z%d" % gap] += dza
            grads["z%d" % (gap + 1)] += dzb

    def project_weight_grads(self, dw_blocks, dists, zpairs):
        """Geometry gradients for externally computed per-block dL/dW
        (used by the spiking wrapper). Returns a partial gradient dict."""
        grads = {"coords%d" % l: np.zeros_like(c) for l, c in enumerate(self.params.free_coords)}
        if self.params.gaps is not None:
            grads["gaps"] = np.zeros_like(self.params.gaps)
        if self.params.z_coords is not None:
            for l, z in enumerate(self.params.z_coords):
                grads["z%d" % l] = np.zeros_like(z)
        for l, dw in enumerate(dw_blocks):
            self._accumulate_geometry(grads, l, dw, dists[l], zpairs[l])
        return grads

    def materialize_dense(self, masks=None):
        """Fold geometry, inhibition, and prune masks into an explicit DenseMLP.

        The result computes the identical function; it is the correctness
        oracle for the spatial forward pass.
        """
        w_raw, _, _ = self.blocks()
        weights, biases = [], []
        for l in range(self.spec.n_gaps):
            m = inhibition_mask(self.params.inhibition[l], self.spec.inhibition_steepness)
            w = w_raw[l] if masks is None else w_raw[l] * masks[l]
            weights.append(m[:, None] * w)
            biases.append(self.params.biases[l].copy())
        dense = DenseMLP(self.spec.layer_sizes, params=DenseParams(weights, biases),
                         activation=self.activation, dtype=self.dtype)
        return dense


@dataclass
class DenseParams:
    """Explicit weight matrices (one per gap) and biases (per non-input layer)."""

    weights: list
    biases: list

    def param_dict(self):
        out = {}
        for l, w in enumerate(self.weights):
            out["W%d" % l] = w
        for l, b in enumerate(self.biases):
            out["bias%d" % (l + 1)] = b
        return out

    def load_param_dict(self, params):
        for l in range(len(self.weights)):
            self.weights[l] = params["W%d" % l]
        for l in range(len(self.biases)):
            self.biases[l] = params["bias%d" % (l + 1)]

    def n_scalars(self):
        return sum(int(a.size) for a in self.param_dict().values())


def init_dense_params(layer_sizes, seed=0, dtype=np.float64):
    """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)); zero biases."""
    rng = substream(seed, STREAM_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return DenseParams(weights, biases)


@dataclass
class _DenseCache:
    version: int
    acts: list
    preacts: list
    w_eff: list
    masks: list


class DenseMLP:
    """Conventional MLP baseline: explicit weights, same head and activation."""

    def __init__(self, layer_sizes, params=None, activation="leaky-relu", seed=0, dtype=np.float64):
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        self.dtype = np.dtype(dtype)
        self.activation = activation
        self.act, self.dact = ACTIVATIONS[activation]
        self.params = params if params is not None else init_dense_params(self.layer_sizes, seed, self.dtype)
        self._version = 0

    @property
    def n_gaps(self):
        return len(self.layer_sizes) - 1

    def param_dict(self):
        return self.params.param_dict()

    def set_param_dict(self, new_params):
        self.params.load_param_dict(new_params)
        self._version += 1

    def ranking_blocks(self):
        """Per-block pruning keys: absolute weight magnitudes."""
        return [np.abs(w) for w in self.params.weights]

    def forward(self, x, masks=None, pruner=None):
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            raise ShapeError("input must be (batch, %d), got %r" % (self.layer_sizes[0], x.shape))
        if pruner is not None:
            masks = pruner.masks_for(self.ranking_blocks())
        acts = [x]
        preacts, w_eff = [], []
        for l in range(self.n_gaps):
            w = self.params.weights[l] if masks is None else self.params.weights[l] * masks[l]
            w_eff.append(w)
            z = acts[l] @ w + self.params.biases[l]
            preacts.append(z)
            acts.append(self.act(z) if l < self.n_gaps - 1 else z)
        return acts[-1], _DenseCache(self._version, acts, preacts, w_eff, masks)

    def backward(self, cache, dlogits):
        if cache.version != self._version:
            raise UsageError("stale cache: parameters changed since the forward pass")
        grads = {}
        g = np.ascontiguousarray(dlogits, dtype=self.dtype)
        for l in range(self.n_gaps - 1, -1, -1):
            grads["bias%d" % (l + 1)] = g.sum(axis=0)
            dw = cache.acts[l].T @ g
            if cache.masks is not None:
                dw = dw * cache.masks[l]
            grads["W%d" % l] = dw
            if l > 0:
                g = (g @ cache.w_eff[l].T) * self.dact(cache.preacts[l - 1])
        return grads
