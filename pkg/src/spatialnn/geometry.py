"""Geometry of spatially embedded layers.

Each neuron owns a position in d-dimensional Euclidean space: d-1 free
coordinates plus a layer-axis ("z") coordinate controlled by the z policy.
The weight of a connection is the reciprocal of the distance between its
endpoints, so moving neurons is how the network learns. Excitatory vs.
inhibitory behaviour comes from a per-neuron inhibition value squashed
into (-1, 1) by a steep sigmoid.

All operations here are pure functions over value inputs (thread-safe),
and every gradient is analytic; the test suite checks each one against
central finite differences.
"""

import enum
from dataclasses import dataclass

import numpy as np

from spatialnn import kernels
from spatialnn.errors import ConfigError, InvariantError, ShapeError
from spatialnn.seeding import STREAM_INIT, substream

# Distances are clamped below at this value before inversion, which keeps
# w = 1/d finite when two neurons collide; clamped pairs get zero position
# gradient so the collision is not reinforced.
EPSILON_DIST = 1e-4


class ZPolicy(str, enum.Enum):
    """How the layer-axis coordinate behaves.

    FIXED_UNIT: z is the layer index; adjacent layers are exactly 1 apart.
    LEARNABLE_GAP: one learnable separation scalar per adjacent layer pair.
    FREE_Z: every neuron learns its own z (layer membership is kept for
    connectivity, but layers may interleave spatially).
    """

    FIXED_UNIT = "fixed-unit"
    LEARNABLE_GAP = "learnable-gap"
    FREE_Z = "free-z"


@dataclass(frozen=True)
class EmbeddingSpec:
    """Architecture of a spatially embedded network."""

    layer_sizes: tuple
    dim: int = 3
    z_policy: ZPolicy = ZPolicy.FIXED_UNIT
    inhibition_steepness: float = 25.0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        object.__setattr__(self, "z_policy", ZPolicy(self.z_policy))
        if len(self.layer_sizes) < 2:
            raise ConfigError("need at least 2 layers, got %d" % len(self.layer_sizes))
        if any(n < 1 for n in self.layer_sizes):
            raise ConfigError("layer sizes must be >= 1: %r" % (self.layer_sizes,))
        if self.dim < 2:
            raise ConfigError("embedding dim must be >= 2 (one free coordinate plus the layer axis)")
        if not self.inhibition_steepness > 0:
            raise ConfigError("inhibition steepness must be > 0")

    @property
    def n_layers(self):
        return len(self.layer_sizes)

    @property
    def n_gaps(self):
        return len(self.layer_sizes) - 1


@dataclass
class SpatialParams:
    """Learnable state of a spatially embedded network.

    free_coords[l]: (n_l, d-1) free coordinates of layer l.
    inhibition[l]:  (n_l,) inhibition values for layers 0..N-2.
    biases[l]:      (n_{l+1},) biases of layers 1..N-1 (index by gap l).
    gaps:           (N-1,) layer separations (LEARNABLE_GAP only).
    z_coords[l]:    (n_l,) per-neuron z (FREE_Z only).
    """

    free_coords: list
    inhibition: list
    biases: list
    gaps: np.ndarray = None
    z_coords: list = None

    def param_dict(self):
        """Flat name -> array view of every learnable group, in a fixed order."""
        out = {}
        for l, c in enumerate(self.free_coords):
            out["coords%d" % l] = c
        if self.gaps is not None:
            out["gaps"] = self.gaps
        if self.z_coords is not None:
            for l, z in enumerate(self.z_coords):
                out["z%d" % l] = z
        for l, v in enumerate(self.inhibition):
            out["inhib%d" % l] = v
        for l, b in enumerate(self.biases):
            out["bias%d" % (l + 1)] = b
        return out

    def load_param_dict(self, params):
        """Install arrays from a dict produced by param_dict (same keys/shapes)."""
        for l in range(len(self.free_coords)):
            self.free_coords[l] = params["coords%d" % l]
        if self.gaps is not None:
            self.gaps = params["gaps"]
        if self.z_coords is not None:
            for l in range(len(self.z_coords)):
                self.z_coords[l] = params["z%d" % l]
        for l in range(len(self.inhibition)):
            self.inhibition[l] = params["inhib%d" % l]
        for l in range(len(self.biases)):
            self.biases[l] = params["bias%d" % (l + 1)]

    def n_scalars(self):
        return sum(int(a.size) for a in self.param_dict().values())


def _balanced_inhibition(rng, n, scale=0.1):
    """Uniform inhibition values in (-scale, scale) with paired +-magnitudes.

    Every 1/distance weight is positive, so the sign of a neuron's whole
    fan-out comes from its inhibition value alone; i.i.d. draws leave each
    layer's signed drive with a random O(sqrt(n)) offset that can silence
    the entire next layer for some seeds. Pairing each magnitude with its
    negation keeps the marginal distribution but removes that offset.
    """
    half = rng.uniform(0.0, scale, size=(n + 1) // 2)
    values = np.concatenate([half, -half[: n - (n + 1) // 2]])
    rng.shuffle(values)
    return values


def init_spatial_params(spec, seed=0, dtype=np.float64):
    """Seeded initial parameters.

    Free coordinates are uniform in [0, 1) per component; inhibition values
    uniform in (-0.1, 0.1), sign-balanced per layer; learnable gaps start
    at 1; FREE_Z z-coordinates are uniform in [l, l+1) for layer l; biases
    start at zero.
    """
    rng = substream(seed, STREAM_INIT)
    d_free = spec.dim - 1
    coords = [rng.uniform(0.0, 1.0, size=(n, d_free)).astype(dtype) for n in spec.layer_sizes]
    inhibition = [_balanced_inhibition(rng, n).astype(dtype) for n in spec.layer_sizes[:-1]]
    biases = [np.zeros(n, dtype=dtype) for n in spec.layer_sizes[1:]]
    gaps = None
    z_coords = None
    if spec.z_policy is ZPolicy.LEARNABLE_GAP:
        gaps = np.ones(spec.n_gaps, dtype=dtype)
    elif spec.z_policy is ZPolicy.FREE_Z:
        z_coords = [rng.uniform(float(l), float(l + 1), size=n).astype(dtype)
                    for l, n in enumerate(spec.layer_sizes)]
    return SpatialParams(coords, inhibition, biases, gaps=gaps, z_coords=z_coords)


@dataclass
class ConnectionBlock:
    """Weights and distances of one adjacent-layer connection block."""

    weights: np.ndarray
    distances: np.ndarray

    def validate(self, rtol=1e-12):
        if self.weights.shape != self.distances.shape:
            raise ShapeError("weights %r vs distances %r" % (self.weights.shape, self.distances.shape))
        if np.any(self.distances <= 0) or np.any(self.weights <= 0):
            raise InvariantError("connection block has nonpositive entries")
        if not np.allclose(self.weights * self.distances, 1.0, rtol=rtol, atol=0):
            raise InvariantError("w * d deviates from 1 beyond rtol=%g" % rtol)


def _as_coords(x, name):
    a = np.ascontiguousarray(x)
    if a.ndim != 2:
        raise ShapeError("%s must be 2-D (neurons x free components), got shape %r" % (name, a.shape))
    return a


def _z_vectors(z_sep, n_a, n_b, dtype):
    """Normalize a z separation (scalar gap or per-neuron vectors) to (za, zb)."""
    if isinstance(z_sep, tuple):
        za = np.ascontiguousarray(z_sep[0], dtype=dtype)
        zb = np.ascontiguousarray(z_sep[1], dtype=dtype)
        if za.shape != (n_a,) or zb.shape != (n_b,):
            raise ShapeError("per-neuron z vectors must have shapes (%d,), (%d,); got %r, %r"
                             % (n_a, n_b, za.shape, zb.shape))
        return za, zb
    gap = float(z_sep)
    if not gap > 0:
        raise ConfigError("layer separation must be > 0, got %g" % gap)
    return np.zeros(n_a, dtype=dtype), np.full(n_b, gap, dtype=dtype)


def pairwise_distances(a_coords, b_coords, z_sep, eps=EPSILON_DIST):
    """Distance matrix between two layers.

    d_ij = sqrt(|a_i - b_j|^2 + dz_ij^2), clamped below at eps. z_sep is
    either a positive scalar gap or a (za, zb) tuple of per-neuron z values.
    """
    a = _as_coords(a_coords, "a_coords")
    b = _as_coords(b_coords, "b_coords")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("free-coordinate width mismatch: %d vs %d" % (a.shape[1], b.shape[1]))
    if a.dtype != b.dtype:
        b = b.astype(a.dtype)
    za, zb = _z_vectors(z_sep, a.shape[0], b.shape[0], a.dtype)
    return kernels.pairwise_distances(a, b, za, zb, eps)


def weights_from_distances(distances, eps=EPSILON_DIST):
    """Elementwise w = 1/d. Distances must already be clamped (>= eps)."""
    d = np.asarray(distances)
    if np.any(d <= 0):
        raise InvariantError("nonpositive distance reached weight computation")
    return 1.0 / d


def weight_gradients(a_coords, b_coords, z_sep, upstream, eps=EPSILON_DIST):
    """Gradients of sum(upstream * W) with W = 1/pairwise_distances(...).

    Returns (d_a_coords, d_b_coords, d_z): d_z is a scalar when z_sep is a
    scalar gap, else a (dza, dzb) tuple of per-neuron gradients. Pairs at
    the clamp (d == eps) contribute zero.
    """
    a = _as_coords(a_coords, "a_coords")
    b = _as_coords(b_coords, "b_coords")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("free-coordinate width mismatch: %d vs %d" % (a.shape[1], b.shape[1]))
    up = np.ascontiguousarray(upstream, dtype=a.dtype)
    if up.shape != (a.shape[0], b.shape[0]):
        raise ShapeError("upstream gradient must be (%d, %d), got %r" % (a.shape[0], b.shape[0], up.shape))
    za, zb = _z_vectors(z_sep, a.shape[0], b.shape[0], a.dtype)
    dist = kernels.pairwise_distances(a, b, za, zb, eps)
    da, db, dza, dzb = kernels.weight_input_grads(a, b, za, zb, dist, up, eps)
    if isinstance(z_sep, tuple):
        return da, db, (dza, dzb)
    return da, db, float(dzb.sum())


def inhibition_mask(values, steepness):
    """Squash inhibition values into (-1, 1): m(v) = 2*sigmoid(k*v) - 1.

    Computed as tanh(k*v/2), which is the same function with exact odd
    symmetry. m(0) = 0, m is monotone, and |m| < 1.
    """
    if not steepness > 0:
        raise ConfigError("inhibition steepness must be > 0")
    return np.tanh(0.5 * steepness * np.asarray(values))


def inhibition_gradient(values, steepness, upstream):
    """Gradient of sum(upstream * inhibition_mask(values, steepness))."""
    m = inhibition_mask(values, steepness)
    return np.asarray(upstream) * (0.5 * steepness) * (1.0 - m * m)


def count_params_spatial(spec):
    """Learnable scalar count of a spatially embedded network.

    (d-1) coordinates per neuron, one bias per non-input neuron, one
    inhibition value per non-output neuron, plus the z policy's additions
    (one scalar per gap, or one z per neuron).
    """
    sizes = spec.layer_sizes
    total = (spec.dim - 1) * sum(sizes) + sum(sizes[1:]) + sum(sizes[:-1])
    if spec.z_policy is ZPolicy.LEARNABLE_GAP:
        total += len(sizes) - 1
    elif spec.z_policy is ZPolicy.FREE_Z:
        total += sum(sizes)
    return total


def count_params_dense(layer_sizes):
    """Learnable scalar count of a conventional dense MLP (weights + biases)."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2:
        raise ConfigError("need at least 2 layers")
    return sum(a * b for a, b in zip(sizes[:-1], sizes[1:])) + sum(sizes[1:])
