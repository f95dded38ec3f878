"""Numpy implementations of the hot kernels (fallback backend).

Semantics match spatialnn.kernels._ckernels exactly up to floating-point
reduction order; agreement between the two backends is asserted in
tests/test_kernels.py and their speed is compared by
benchmarks/bench_kernels.py. Within one backend all reductions have a
fixed order, so results are bitwise reproducible for a fixed build.
"""

import numpy as np


def pairwise_distances(a, b, za, zb, eps):
    """Euclidean distances between two point sets, clamped below at eps.

    a: (n_a, k) free coordinates, b: (n_b, k); za, zb: layer-axis
    coordinate per point, shapes (n_a,) and (n_b,). Returns (n_a, n_b).
    """
    diff = a[:, None, :] - b[None, :, :]
    sq = np.einsum("ijc,ijc->ij", diff, diff)
    dz = zb[None, :] - za[:, None]
    d = np.sqrt(sq + dz * dz)
    np.maximum(d, d.dtype.type(eps), out=d)
    return d


def weight_input_grads(a, b, za, zb, dist, dw, eps):
    """Backpropagate dL/dW through w = 1/d to the distance inputs.

    dist must come from pairwise_distances on the same points; pairs that
    were clamped there (dist == eps) carry zero gradient. Returns
    (da, db, dza, dzb) with the shapes of (a, b, za, zb).

    Derivation: w = 1/d with d^2 = |a_i - b_j|^2 + (zb_j - za_i)^2 gives
    dw/da_ic = -(a_ic - b_jc)/d^3 and dw/dza_i = (zb_j - za_i)/d^3.
    """
    zero = dist.dtype.type(0)
    h = np.where(dist > eps, dw / (dist * dist * dist), zero)
    row = h.sum(axis=1)
    col = h.sum(axis=0)
    da = h @ b - a * row[:, None]
    db = h.T @ a - b * col[:, None]
    dz = zb[None, :] - za[:, None]
    hz = h * dz
    dza = hz.sum(axis=1)
    dzb = -hz.sum(axis=0)
    return da, db, dza, dzb


def lif_sequence(currents, num_steps, beta, threshold):
    """Leaky integrate-and-fire dynamics over a current sequence.

    currents: (T, batch, n) per-step input current, or (1, batch, n) to
    hold one current constant for all num_steps steps. Update per step:

        U_t = beta * U_{t-1} + I_t - threshold * S_{t-1}   (subtraction reset)
        S_t = 1 if U_t >= threshold else 0

    with U_0 = S_0 = 0. Returns (mem, spk), each (T, batch, n); mem[t] is
    the potential U_t that the threshold comparison saw.
    """
    steps, batch, n = currents.shape[0], currents.shape[1], currents.shape[2]
    dt = currents.dtype
    mem = np.empty((num_steps, batch, n), dtype=dt)
    spk = np.empty((num_steps, batch, n), dtype=dt)
    u = np.zeros((batch, n), dtype=dt)
    s = np.zeros((batch, n), dtype=dt)
    for t in range(num_steps):
        i_t = currents[t] if steps > 1 else currents[0]
        u = beta * u + i_t - threshold * s
        s = (u >= threshold).astype(dt)
        mem[t] = u
        spk[t] = s
    return mem, spk


def lif_backward(d_spk, d_mem, mem, beta, threshold, slope):
    """Backpropagation through time for one LIF population.

    d_spk[t] is dL/dS_t arriving from outside the population (next layer's
    currents or a spike-count loss); d_mem[t] is dL/dU_t arriving directly
    (membrane loss). mem holds the forward potentials. The spike Heaviside
    is replaced by the arctangent pseudo-derivative of the given slope:

        dS/dU ~= (slope/pi) / (1 + (slope * (U - threshold))^2)

    Returns d_cur, shape of mem, where d_cur[t] = dL/dI_t. Because U_t
    enters U_{t+1} with factor beta and S_t enters U_{t+1} with factor
    -threshold, the reverse recursion is

        dU_t = d_mem[t] + beta * dU_{t+1} + (d_spk[t] - threshold * dU_{t+1}) * g(U_t)
    """
    steps = mem.shape[0]
    d_cur = np.empty_like(mem)
    carry = np.zeros(mem.shape[1:], dtype=mem.dtype)
    scale = float(slope) / np.pi
    for t in range(steps - 1, -1, -1):
        x = slope * (mem[t] - threshold)
        g = scale / (1.0 + x * x)
        carry = d_mem[t] + beta * carry + (d_spk[t] - threshold * carry) * g
        d_cur[t] = carry
    return d_cur
