"""Leaky integrate-and-fire networks over the MLP connectivity backends.

A SpikingNetwork wraps a SpatialMLP or DenseMLP backbone: the backbone
supplies connection weights (1/distance with inhibition, or explicit
matrices), this module supplies the dynamics. A static image is presented
as a constant input current for num_steps steps (direct encoding;
Bernoulli rate encoding is available behind the config flag), every
non-input layer is a LIF population with subtraction reset, and training
backpropagates through time with an arctangent pseudo-derivative standing
in for the spike Heaviside.

For gradient checking, forward(smooth=True) replaces the hard spike with
the pseudo-derivative's antiderivative (a soft step in (0, 1)); the
backward pass is then the exact gradient of that relaxed network, which
is what the finite-difference tests verify.
"""

from dataclasses import dataclass

import numpy as np

from spatialnn import kernels
from spatialnn.errors import ConfigError, ShapeError, UsageError
from spatialnn.geometry import inhibition_gradient, inhibition_mask
from spatialnn.mlp import DenseMLP, SpatialMLP, softmax_cross_entropy


@dataclass(frozen=True)
class LIFConfig:
    """Neuron and simulation constants (not learned)."""

    beta: float = 0.95
    threshold: float = 1.0
    num_steps: int = 25
    surrogate_slope: float = 2.0
    loss: str = "membrane"        # "membrane" | "spike-count"
    encoding: str = "constant"    # "constant" | "poisson"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("beta must lie in (0, 1), got %g" % self.beta)
        if not self.threshold > 0:
            raise ConfigError("threshold must be > 0")
        if self.num_steps < 1:
            raise ConfigError("num_steps must be >= 1")
        if not self.surrogate_slope > 0:
            raise ConfigError("surrogate slope must be > 0")
        if self.loss not in ("membrane", "spike-count"):
            raise ConfigError("unknown loss %r" % self.loss)
        if self.encoding not in ("constant", "poisson"):
            raise ConfigError("unknown encoding %r" % self.encoding)


@dataclass
class LIFState:
    """One population's state: membrane potential and last spikes, (batch, n)."""

    membrane: np.ndarray
    spikes: np.ndarray


def lif_step(state, current, cfg):
    """One LIF update: U' = beta*U + I - threshold*S_prev, spike at U' >= threshold."""
    u = cfg.beta * state.membrane + current - cfg.threshold * state.spikes
    s = (u >= cfg.threshold).astype(u.dtype)
    return LIFState(u, s)


def surrogate_spike_gradient(membrane, cfg):
    """Arctangent pseudo-derivative of the spike nonlinearity.

    dS/dU ~= (slope/pi) / (1 + (slope*(U - threshold))^2): positive,
    peaked at the threshold with value slope/pi, symmetric around it.
    """
    x = cfg.surrogate_slope * (np.asarray(membrane) - cfg.threshold)
    return (cfg.surrogate_slope / np.pi) / (1.0 + x * x)


def surrogate_primitive(membrane, cfg):
    """Antiderivative of surrogate_spike_gradient: a soft step in (0, 1)."""
    x = cfg.surrogate_slope * (np.asarray(membrane) - cfg.threshold)
    return np.arctan(x) / np.pi + 0.5


def _smooth_lif_sequence(currents, num_steps, cfg):
    """LIF recursion with the soft step in place of the Heaviside.

    Used only for gradient verification on small instances; the hard path
    goes through kernels.lif_sequence.
    """
    steps = currents.shape[0]
    batch, n = currents.shape[1], currents.shape[2]
    dt = currents.dtype
    mem = np.empty((num_steps, batch, n), dtype=dt)
    spk = np.empty((num_steps, batch, n), dtype=dt)
    u = np.zeros((batch, n), dtype=dt)
    s = np.zeros((batch, n), dtype=dt)
    for t in range(num_steps):
        i_t = currents[t] if steps > 1 else currents[0]
        u = cfg.beta * u + i_t - cfg.threshold * s
        s = surrogate_primitive(u, cfg).astype(dt)
        mem[t] = u
        spk[t] = s
    return mem, spk


@dataclass
class SNNOutputs:
    """Per-step output membranes (T, batch, classes) and summed spike counts."""

    membranes: np.ndarray
    spike_counts: np.ndarray


@dataclass
class _SNNCache:
    version: int
    inputs_seq: list   # per gap: presynaptic activity, (1 or T, batch, n)
    mem: list          # per gap: LIF membranes of the target layer
    spk: list
    w_eff: list        # per gap: weights after prune mask, before inhibition
    inhib: list        # per gap: inhibition mask vector, or None (dense)
    masks: list
    dists: list        # spatial backbones only
    zpairs: list
    smooth: bool


class SpikingNetwork:
    """LIF dynamics over a spatial or dense connectivity backbone."""

    def __init__(self, backbone, cfg=LIFConfig()):
        if not isinstance(backbone, (SpatialMLP, DenseMLP)):
            raise ConfigError("backbone must be a SpatialMLP or DenseMLP")
        self.backbone = backbone
        self.cfg = cfg

    @property
    def layer_sizes(self):
        return self.backbone.spec.layer_sizes if self.is_spatial else self.backbone.layer_sizes

    @property
    def is_spatial(self):
        return isinstance(self.backbone, SpatialMLP)

    @property
    def dtype(self):
        return self.backbone.dtype

    def param_dict(self):
        return self.backbone.param_dict()

    def set_param_dict(self, new_params):
        self.backbone.set_param_dict(new_params)

    def ranking_blocks(self):
        return self.backbone.ranking_blocks()

    def _connectivity(self, masks, pruner):
        """(w_eff, inhib, biases, dists, zpairs, masks) for the current parameters."""
        if self.is_spatial:
            w_raw, dists, zpairs = self.backbone.blocks()
            if pruner is not None:
                masks = pruner.masks_for(w_raw)
            w_eff = w_raw if masks is None else [w * m for w, m in zip(w_raw, masks)]
            spec = self.backbone.spec
            inhib = [inhibition_mask(v, spec.inhibition_steepness) for v in self.backbone.params.inhibition]
            biases = self.backbone.params.biases
        else:
            if pruner is not None:
                masks = pruner.masks_for(self.backbone.ranking_blocks())
            weights = self.backbone.params.weights
            w_eff = weights if masks is None else [w * m for w, m in zip(weights, masks)]
            inhib = [None] * len(w_eff)
            biases = self.backbone.params.biases
            dists, zpairs = None, None
        return w_eff, inhib, biases, dists, zpairs, masks

    def encode(self, x, rng=None):
        """Input drive: (1, batch, n) constant current, or (T, batch, n) Bernoulli spikes."""
        if self.cfg.encoding == "constant":
            return x[None, :, :]
        if rng is None:
            raise ConfigError("poisson encoding needs an rng (see spatialnn.seeding.substream)")
        draws = rng.random((self.cfg.num_steps,) + x.shape)
        return (draws < x).astype(x.dtype)

    def forward(self, x, masks=None, pruner=None, smooth=False, rng=None):
        """Simulate num_steps steps. Returns (SNNOutputs, cache)."""
        x = np.ascontiguousarray(x, dtype=self.dtype)
        n_in = self.layer_sizes[0]
        if x.ndim != 2 or x.shape[1] != n_in:
            raise ShapeError("input must be (batch, %d), got %r" % (n_in, x.shape))
        cfg = self.cfg
        w_eff, inhib, biases, dists, zpairs, masks = self._connectivity(masks, pruner)
        drive = self.encode(x, rng=rng)
        inputs_seq, mems, spks = [], [], []
        prev = drive
        for l, w in enumerate(w_eff):
            inputs_seq.append(prev)
            w_in = w if inhib[l] is None else inhib[l][:, None] * w
            cur = prev @ w_in + biases[l]
            cur = np.ascontiguousarray(cur)
            if smooth:
                mem, spk = _smooth_lif_sequence(cur, cfg.num_steps, cfg)
            else:
                mem, spk = kernels.lif_sequence(cur, cfg.num_steps, cfg.beta, cfg.threshold)
            mems.append(mem)
            spks.append(spk)
            prev = spk
        cache = _SNNCache(self.backbone._version, inputs_seq, mems, spks, w_eff, inhib,
                          masks, dists, zpairs, smooth)
        out = SNNOutputs(membranes=mems[-1], spike_counts=spks[-1].sum(axis=0))
        return out, cache

    def _loss_seeds(self, cache, labels):
        """Loss value plus dL/dU and dL/dS arrays for the output population."""
        cfg = self.cfg
        mem_out = cache.mem[-1]
        steps, batch, n_cls = mem_out.shape
        if cfg.loss == "membrane":
            # Cross-entropy on the membrane at every step, averaged over steps.
            flat = np.ascontiguousarray(mem_out.reshape(steps * batch, n_cls))
            tiled = np.tile(np.asarray(labels), steps)
            loss, dflat = softmax_cross_entropy(flat, tiled)
            d_mem = np.ascontiguousarray(dflat.reshape(steps, batch, n_cls))
            d_spk = np.zeros_like(d_mem)
        else:
            counts = cache.spk[-1].sum(axis=0)
            loss, dcounts = softmax_cross_entropy(counts, np.asarray(labels))
            d_spk = np.ascontiguousarray(np.broadcast_to(dcounts, mem_out.shape))
            d_mem = np.zeros_like(d_spk)
        return loss, d_mem, d_spk

    def loss_and_backward(self, cache, labels):
        """Loss and gradients for every learnable group of the backbone.

        Backpropagation through time uses the arctangent pseudo-derivative;
        on a smooth-mode cache the result is the exact gradient of the
        relaxed forward pass.
        """
        if cache.version != self.backbone._version:
            raise UsageError("stale cache: parameters changed since the forward pass")
        cfg = self.cfg
        loss, d_mem, d_spk = self._loss_seeds(cache, labels)
        grads = {}
        dw_blocks = [None] * len(cache.w_eff)
        for l in range(len(cache.w_eff) - 1, -1, -1):
            d_cur = kernels.lif_backward(d_spk, d_mem, cache.mem[l],
                                         cfg.beta, cfg.threshold, cfg.surrogate_slope)
            grads["bias%d" % (l + 1)] = d_cur.sum(axis=(0, 1))
            prev = cache.inputs_seq[l]
            steps_prev = prev.shape[0]
            n_prev, n_post = cache.w_eff[l].shape
            if steps_prev == 1:
                dsum = d_cur.sum(axis=0)
                dw = prev[0].T @ dsum
                back = dsum @ cache.w_eff[l].T          # summed over steps
                dmask = (back * prev[0]).sum(axis=0)
            else:
                dw = prev.reshape(-1, n_prev).T @ d_cur.reshape(-1, n_post)
                back = d_cur @ cache.w_eff[l].T
                dmask = (back * prev).sum(axis=(0, 1))
            if cache.inhib[l] is not None:
                dw = cache.inhib[l][:, None] * dw
            if cache.masks is not None:
                dw = dw * cache.masks[l]
            dw_blocks[l] = dw
            if self.is_spatial:
                spec = self.backbone.spec
                grads["inhib%d" % l] = inhibition_gradient(self.backbone.params.inhibition[l],
                                                           spec.inhibition_steepness, dmask)
            if l > 0:
                if steps_prev == 1:
                    raise UsageError("constant drive is only valid at the input layer")
                d_spk = back if cache.inhib[l] is None else back * cache.inhib[l]
                d_spk = np.ascontiguousarray(d_spk)
                d_mem = np.zeros_like(cache.mem[l - 1])
        if self.is_spatial:
            grads.update(self.backbone.project_weight_grads(dw_blocks, cache.dists, cache.zpairs))
        else:
            for l, dw in enumerate(dw_blocks):
                grads["W%d" % l] = dw
        return loss, grads


def predict_classes(outputs):
    """Predicted class per sample: argmax of the time-summed output membrane.

    (Summed membranes align with the membrane training loss and break the
    frequent ties that raw spike counts produce at small step counts.)
    """
    return outputs.membranes.sum(axis=0).argmax(axis=1)
