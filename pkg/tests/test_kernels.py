"""Backend agreement and kernel-level contracts."""

import numpy as np
import pytest

from spatialnn import kernels
from spatialnn.kernels import _pykernels

try:
    from spatialnn.kernels import _ckernels
except ImportError:
    _ckernels = None

needs_compiled = pytest.mark.skipif(_ckernels is None, reason="compiled kernel backend not built")


def _random_block(rng, na=9, nb=7, k=2, dtype=np.float64):
    a = rng.uniform(0, 1, (na, k)).astype(dtype)
    b = rng.uniform(0, 1, (nb, k)).astype(dtype)
    za = np.zeros(na, dtype=dtype)
    zb = np.ones(nb, dtype=dtype)
    return a, b, za, zb


def test_pairwise_matches_per_pair_loop_oracle():
    rng = np.random.default_rng(0)
    a, b, za, zb = _random_block(rng, 3, 4)
    d = kernels.pairwise_distances(a, b, za, zb, 1e-4)
    for i in range(3):
        for j in range(4):
            expect = np.sqrt(((a[i] - b[j]) ** 2).sum() + (zb[j] - za[i]) ** 2)
            assert abs(d[i, j] - expect) <= 1e-12 * expect


def test_pairwise_clamps_at_eps():
    a = np.zeros((1, 2))
    d = kernels.pairwise_distances(a, a.copy(), np.zeros(1), np.zeros(1), 1e-4)
    assert d[0, 0] == 1e-4


def test_weight_grads_zero_at_clamped_pairs():
    a = np.zeros((1, 2))
    za = np.zeros(1)
    dist = kernels.pairwise_distances(a, a.copy(), za, za.copy(), 1e-4)
    da, db, dza, dzb = kernels.weight_input_grads(a, a.copy(), za, za.copy(), dist,
                                                  np.ones((1, 1)), 1e-4)
    assert not da.any() and not db.any() and not dza.any() and not dzb.any()


def test_lif_sequence_matches_explicit_loop():
    rng = np.random.default_rng(3)
    cur = rng.normal(0.4, 0.5, size=(6, 2, 3))
    mem, spk = kernels.lif_sequence(np.ascontiguousarray(cur), 6, 0.9, 1.0)
    u = np.zeros((2, 3))
    s = np.zeros((2, 3))
    for t in range(6):
        u = 0.9 * u + cur[t] - 1.0 * s
        s = (u >= 1.0).astype(float)
        np.testing.assert_allclose(mem[t], u, rtol=0, atol=1e-14)
        np.testing.assert_array_equal(spk[t], s)


def test_lif_sequence_broadcasts_constant_current():
    cur = np.full((1, 2, 3), 0.3)
    mem, spk = kernels.lif_sequence(cur, 5, 0.95, 1.0)
    tiled = np.repeat(cur, 5, axis=0)
    mem2, spk2 = kernels.lif_sequence(np.ascontiguousarray(tiled), 5, 0.95, 1.0)
    assert np.array_equal(mem, mem2) and np.array_equal(spk, spk2)


def test_lif_backward_zero_upstream_gives_zero():
    rng = np.random.default_rng(1)
    mem = rng.normal(size=(4, 2, 3))
    zeros = np.zeros_like(mem)
    out = kernels.lif_backward(zeros, zeros.copy(), mem, 0.95, 1.0, 2.0)
    assert not out.any()


@needs_compiled
@pytest.mark.parametrize("dtype,tol", [(np.float64, 1e-12), (np.float32, 1e-5)])
def test_backends_agree(dtype, tol):
    rng = np.random.default_rng(7)
    a, b, za, zb = _random_block(rng, 11, 8, 3, dtype)
    d_c = _ckernels.pairwise_distances(a, b, za, zb, 1e-4)
    d_p = _pykernels.pairwise_distances(a, b, za, zb, 1e-4)
    assert d_c.dtype == dtype and d_p.dtype == dtype
    np.testing.assert_allclose(d_c, d_p, rtol=tol, atol=0)

    dw = rng.normal(size=(11, 8)).astype(dtype)
    for g_c, g_p in zip(_ckernels.weight_input_grads(a, b, za, zb, d_c, dw, 1e-4),
                        _pykernels.weight_input_grads(a, b, za, zb, d_p, dw, 1e-4)):
        np.testing.assert_allclose(g_c, g_p, rtol=tol, atol=tol * 1e-3)

    cur = rng.normal(0.3, 0.6, size=(7, 4, 5)).astype(dtype)
    mem_c, spk_c = _ckernels.lif_sequence(cur, 7, 0.95, 1.0)
    mem_p, spk_p = _pykernels.lif_sequence(cur, 7, 0.95, 1.0)
    np.testing.assert_allclose(mem_c, mem_p, rtol=tol, atol=0)
    np.testing.assert_array_equal(spk_c, spk_p)

    dspk = rng.normal(size=cur.shape).astype(dtype)
    dmem = rng.normal(size=cur.shape).astype(dtype)
    b_c = _ckernels.lif_backward(dspk, dmem, mem_c, 0.95, 1.0, 2.0)
    b_p = _pykernels.lif_backward(dspk, dmem, mem_p, 0.95, 1.0, 2.0)
    np.testing.assert_allclose(b_c, b_p, rtol=tol, atol=tol * 1e-3)


def test_env_var_forces_numpy_backend():
    import os
    import subprocess
    import sys

    env = dict(os.environ, SPATIALNN_PURE_PYTHON="1")
    code = "from spatialnn import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy", out.stderr
