"""Spatially embedded neural networks.

Neurons carry positions in d-dimensional Euclidean space; the weight of a
connection is the reciprocal of the distance between its endpoints.
Training moves the neurons (plus per-neuron inhibition values and biases)
instead of learning explicit weight matrices, which shrinks the parameter
count from O(n^2) to O(n). Works for plain MLPs and for leaky
integrate-and-fire spiking networks trained with surrogate gradients.
"""

__version__ = "0.1.0"

from spatialnn.adam import AdamState, adam_step
from spatialnn.geometry import (
    EPSILON_DIST,
    ConnectionBlock,
    EmbeddingSpec,
    SpatialParams,
    ZPolicy,
    count_params_dense,
    count_params_spatial,
    inhibition_gradient,
    inhibition_mask,
    init_spatial_params,
    pairwise_distances,
    weight_gradients,
    weights_from_distances,
)
from spatialnn.mlp import DenseMLP, DenseParams, SpatialMLP, init_dense_params, softmax_cross_entropy
from spatialnn.mnist import (
    BatchPlan,
    ImageSet,
    epoch_batches,
    load_image_set,
    normalize_and_flatten,
    parse_idx_images,
    parse_idx_labels,
    serialize_idx_images,
    serialize_idx_labels,
)
from spatialnn.pruning import DynamicPruner, PruneMask, apply_mask, build_mask
from spatialnn.snn import LIFConfig, LIFState, SpikingNetwork, lif_step, predict_classes, surrogate_spike_gradient
