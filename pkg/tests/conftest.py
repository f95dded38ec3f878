"""Shared fixtures: synthetic datasets, real-MNIST discovery, FD helpers."""

import os

import numpy as np
import pytest

import spatialnn.mnist as M
from spatialnn.mnist import serialize_idx_images, serialize_idx_labels

# Opt-in full-budget experiment runs (hours): SPATIALNN_FULL=1.
RUN_FULL = os.environ.get("SPATIALNN_FULL", "") == "1"

full_profile = pytest.mark.skipif(
    not RUN_FULL, reason="full experiment profile is opt-in: set SPATIALNN_FULL=1 (hours of CPU)")


def find_mnist_dir():
    """Directory holding the four real MNIST IDX files, or None."""
    candidates = []
    env = os.environ.get("SPATIALNN_MNIST_DIR")
    if env:
        candidates.append(env)
    here = os.path.dirname(os.path.abspath(__file__))
    candidates.append(os.path.join(os.path.dirname(here), "data", "mnist"))
    for cand in candidates:
        try:
            from spatialnn.train import _data_path

            for split, kind in M.STANDARD_FILES:
                _data_path(cand, split, kind)
            return cand
        except Exception:
            continue
    return None


MNIST_DIR = find_mnist_dir()

needs_mnist = pytest.mark.skipif(
    MNIST_DIR is None,
    reason="real MNIST IDX files not found: set SPATIALNN_MNIST_DIR or populate data/mnist/")


def make_synthetic_arrays(n, seed, side=28):
    """MNIST-statistics synthetic task: sparse class prototypes + jitter."""
    proto_rng = np.random.default_rng(2024)
    protos = (proto_rng.random((10, side, side)) < 0.20) * proto_rng.uniform(0.5, 1.0, (10, side, side))
    r = np.random.default_rng(seed)
    labels = r.integers(0, 10, size=n).astype(np.uint8)
    imgs = protos[labels] * r.uniform(0.7, 1.0, (n, side, side))
    imgs += (r.random((n, side, side)) < 0.02) * r.uniform(0.3, 1.0, (n, side, side))
    return (np.clip(imgs, 0, 1.0) * 255).astype(np.uint8), labels


def make_synthetic_set(n, seed):
    raw, labels = make_synthetic_arrays(n, seed)
    return M.ImageSet(M.normalize_and_flatten(raw), labels.astype(np.int64))


@pytest.fixture(scope="session")
def synthetic_sets():
    """(train, test) ImageSets on the synthetic task."""
    return make_synthetic_set(3000, 1), make_synthetic_set(800, 2)


@pytest.fixture(scope="session")
def synthetic_data_dir(tmp_path_factory):
    """Directory of synthetic IDX files laid out like the real dataset."""
    root = tmp_path_factory.mktemp("idxdata")
    for prefix, n, seed in (("train", 3000, 1), ("t10k", 800, 2)):
        raw, labels = make_synthetic_arrays(n, seed)
        (root / ("%s-images-idx3-ubyte" % prefix)).write_bytes(serialize_idx_images(raw))
        (root / ("%s-labels-idx1-ubyte" % prefix)).write_bytes(serialize_idx_labels(labels))
    return str(root)


def central_diff(loss_fn, params, step=1e-5):
    """Central finite differences of loss_fn() w.r.t. every scalar in params.

    params: dict of arrays mutated in place (restored afterwards). The oracle
    is deliberately independent of any backward-pass code.
    """
    out = {}
    for key, p in params.items():
        flat = p.ravel()
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_fn()
            flat[i] = orig - step
            lm = loss_fn()
            flat[i] = orig
            g[i] = (lp - lm) / (2 * step)
        out[key] = g.reshape(p.shape)
    return out


def assert_grads_close(analytic, numeric, rtol, atol=1e-8):
    for key in numeric:
        a = np.asarray(analytic[key]).ravel()
        n = numeric[key].ravel()
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), atol)
        rel = np.abs(a - n) / denom
        worst = float(rel.max()) if rel.size else 0.0
        assert worst < rtol, "group %r: worst rel err %g (rtol %g)" % (key, worst, rtol)
