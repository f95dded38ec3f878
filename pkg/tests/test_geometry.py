"""Geometry contracts: distances, weights, inhibition, parameter counts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialnn.errors import ConfigError, InvariantError, ShapeError
from spatialnn.geometry import (
    EPSILON_DIST,
    ConnectionBlock,
    EmbeddingSpec,
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
from tests.conftest import assert_grads_close, central_diff


# -- distances ---------------------------------------------------------------

def test_distance_single_pair_unit_gap():
    d = pairwise_distances(np.array([[0.0, 0.0]]), np.array([[0.0, 0.0]]), 1.0)
    assert d.shape == (1, 1) and d[0, 0] == 1.0


def test_distance_345_triangle():
    d = pairwise_distances(np.array([[0.0, 0.0]]), np.array([[2.0, 2.0]]), 1.0)
    assert abs(d[0, 0] - 3.0) < 1e-15  # 2^2 + 2^2 + 1^2 = 9


def test_distance_random_case_matches_loop_oracle():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 2))
    b = rng.normal(size=(4, 2))
    d = pairwise_distances(a, b, 0.7)
    for i in range(3):
        for j in range(4):
            expect = np.sqrt(((a[i] - b[j]) ** 2).sum() + 0.49)
            assert abs(d[i, j] - expect) <= 1e-12 * expect


def test_distance_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        pairwise_distances(np.zeros((2, 2)), np.zeros((2, 3)), 1.0)


def test_distance_rejects_nonpositive_gap():
    with pytest.raises(ConfigError):
        pairwise_distances(np.zeros((1, 2)), np.ones((1, 2)), 0.0)


def test_distance_per_neuron_z_vectors():
    a = np.zeros((2, 2))
    b = np.zeros((2, 2))
    za = np.array([0.0, 0.5])
    zb = np.array([1.0, 2.0])
    d = pairwise_distances(a, b, (za, zb))
    expect = np.abs(zb[None, :] - za[:, None])
    np.testing.assert_allclose(d, expect, rtol=1e-15)


# -- weights -----------------------------------------------------------------

def test_weights_reciprocal_examples():
    np.testing.assert_array_equal(weights_from_distances(np.array([[1.0]])), [[1.0]])
    np.testing.assert_allclose(weights_from_distances(np.array([[3.0]])), [[1.0 / 3.0]], rtol=1e-15)
    np.testing.assert_allclose(weights_from_distances(np.array([[0.5, 2.0]])), [[2.0, 0.5]], rtol=1e-15)


def test_weights_reject_nonpositive():
    with pytest.raises(InvariantError):
        weights_from_distances(np.array([[1.0, 0.0]]))


def test_reciprocity_invariant_random_blocks():
    rng = np.random.default_rng(5)
    for _ in range(25):
        a = rng.uniform(0, 1, (6, 2))
        b = rng.uniform(0, 1, (5, 2))
        d = pairwise_distances(a, b, float(rng.uniform(0.5, 2.0)))
        w = weights_from_distances(d)
        block = ConnectionBlock(weights=w, distances=d)
        block.validate(rtol=1e-12)
        assert w.max() <= 1.0 / EPSILON_DIST


# -- weight gradients ---------------------------------------------------------

def test_weight_gradient_closed_form_single_pair():
    da, db, dz = weight_gradients(np.array([[0.0, 0.0]]), np.array([[2.0, 2.0]]), 1.0,
                                  np.array([[1.0]]))
    np.testing.assert_allclose(da, [[2.0 / 27.0, 2.0 / 27.0]], rtol=1e-12)
    np.testing.assert_allclose(db, [[-2.0 / 27.0, -2.0 / 27.0]], rtol=1e-12)
    assert abs(dz - (-1.0 / 27.0)) < 1e-12


def test_weight_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1, (3, 2))
    b = rng.uniform(0, 1, (4, 2))
    up = rng.normal(size=(3, 4))
    gap = np.array([0.8])
    da, db, dz = weight_gradients(a, b, float(gap[0]), up)

    def loss():
        d = pairwise_distances(a, b, float(gap[0]))
        return float((up * (1.0 / d)).sum())

    numeric = central_diff(loss, {"a": a, "b": b, "gap": gap}, step=1e-5)
    assert_grads_close({"a": da, "b": db, "gap": np.array([dz])}, numeric, rtol=1e-6)


def test_weight_gradient_free_z_matches_finite_differences():
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 1, (3, 2))
    b = rng.uniform(0, 1, (4, 2))
    za = rng.uniform(0.0, 1.0, 3)
    zb = rng.uniform(1.0, 2.0, 4)
    up = rng.normal(size=(3, 4))
    da, db, (dza, dzb) = weight_gradients(a, b, (za, zb), up)

    def loss():
        d = pairwise_distances(a, b, (za, zb))
        return float((up * (1.0 / d)).sum())

    numeric = central_diff(loss, {"a": a, "b": b, "za": za, "zb": zb}, step=1e-5)
    assert_grads_close({"a": da, "b": db, "za": dza, "zb": dzb}, numeric, rtol=1e-6)


def test_weight_gradient_zero_upstream():
    a = np.random.default_rng(0).uniform(0, 1, (3, 2))
    da, db, dz = weight_gradients(a, a + 0.3, 1.0, np.zeros((3, 3)))
    assert not da.any() and not db.any() and dz == 0.0


def test_weight_gradient_antisymmetric_when_layers_coincide():
    # identical free coordinates in both layers, symmetric upstream
    a = np.random.default_rng(1).uniform(0, 1, (4, 2))
    da, db, _ = weight_gradients(a, a.copy(), 1.0, np.ones((4, 4)))
    np.testing.assert_allclose(da, -db, rtol=1e-12, atol=1e-15)


# -- inhibition ---------------------------------------------------------------

def test_inhibition_mask_values():
    assert inhibition_mask(np.array([0.0]), 25.0)[0] == 0.0
    assert inhibition_mask(np.array([10.0]), 25.0)[0] == pytest.approx(1.0, abs=1e-12)
    assert inhibition_mask(np.array([-10.0]), 25.0)[0] == pytest.approx(-1.0, abs=1e-12)
    # independent evaluation of 2*sigmoid(5) - 1
    expect = 2.0 / (1.0 + np.exp(-5.0)) - 1.0
    assert inhibition_mask(np.array([0.2]), 25.0)[0] == pytest.approx(expect, rel=1e-12)
    assert expect == pytest.approx(0.98661, abs=5e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 100))
def test_inhibition_mask_odd_bounded_monotone(v, k):
    m = float(inhibition_mask(np.array([v]), k)[0])
    m_neg = float(inhibition_mask(np.array([-v]), k)[0])
    assert -1.0 < m < 1.0
    assert m == -m_neg
    m_up = float(inhibition_mask(np.array([v + 1e-3]), k)[0])
    assert m_up >= m


def test_inhibition_gradient_values():
    assert inhibition_gradient(np.array([0.0]), 25.0, np.array([1.0]))[0] == pytest.approx(12.5)
    sat = inhibition_gradient(np.array([5.0]), 25.0, np.array([3.0]))[0]
    assert abs(sat) < 1e-20


def test_inhibition_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    v = rng.normal(0, 0.2, size=6)
    up = rng.normal(size=6)
    analytic = inhibition_gradient(v, 25.0, up)

    def loss():
        return float((up * inhibition_mask(v, 25.0)).sum())

    numeric = central_diff(loss, {"v": v}, step=1e-6)
    assert_grads_close({"v": analytic}, numeric, rtol=1e-6)


# -- parameter counts ----------------------------------------------------------

@pytest.mark.parametrize("policy,expect", [
    (ZPolicy.FIXED_UNIT, 10574),
    (ZPolicy.LEARNABLE_GAP, 10576),
    (ZPolicy.FREE_Z, 13416),
])
def test_spatial_parameter_counts(policy, expect):
    spec = EmbeddingSpec((784, 2048, 10), dim=3, z_policy=policy)
    assert count_params_spatial(spec) == expect
    params = init_spatial_params(spec)
    assert params.n_scalars() == expect


@pytest.mark.parametrize("sizes,expect", [
    ((784, 14, 10), 11140),
    ((784, 2048, 10), 1628170),
    ((784, 17, 10), 13525),
])
def test_dense_parameter_counts(sizes, expect):
    assert count_params_dense(sizes) == expect


# -- isometry invariance --------------------------------------------------------

def test_weights_invariant_under_common_rotation_translation():
    rng = np.random.default_rng(21)
    spec = EmbeddingSpec((5, 6, 4), dim=4, z_policy=ZPolicy.LEARNABLE_GAP)
    params = init_spatial_params(spec, seed=3)
    # random orthogonal matrix in the free-coordinate subspace
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    shift = rng.normal(size=3)
    blocks_before, blocks_after = [], []
    for l in range(spec.n_gaps):
        d = pairwise_distances(params.free_coords[l], params.free_coords[l + 1], 1.0)
        blocks_before.append(weights_from_distances(d))
    moved = [c @ q + shift for c in params.free_coords]
    for l in range(spec.n_gaps):
        d = pairwise_distances(moved[l], moved[l + 1], 1.0)
        blocks_after.append(weights_from_distances(d))
    for w0, w1 in zip(blocks_before, blocks_after):
        np.testing.assert_allclose(w0, w1, rtol=0, atol=1e-10)


# -- spec validation -------------------------------------------------------------

def test_embedding_spec_validation():
    with pytest.raises(ConfigError):
        EmbeddingSpec((784,))
    with pytest.raises(ConfigError):
        EmbeddingSpec((784, 0, 10))
    with pytest.raises(ConfigError):
        EmbeddingSpec((784, 10), dim=1)
    with pytest.raises(ConfigError):
        EmbeddingSpec((784, 10), inhibition_steepness=0.0)


def test_balanced_inhibition_init_properties():
    spec = EmbeddingSpec((100, 33, 10))
    params = init_spatial_params(spec, seed=0)
    for v in params.inhibition:
        assert np.abs(v).max() < 0.1
        # antithetic pairing: layer sum is (near-)zero by construction
        assert abs(v.sum()) < 0.1
    assert all(np.all((c >= 0) & (c < 1)) for c in params.free_coords)
