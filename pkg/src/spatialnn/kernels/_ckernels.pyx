# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled kernel backend. Same contracts as _pykernels (the import-time
# fallback); keep the two in lockstep. Inner loops accumulate in double
# regardless of the array dtype, with a fixed reduction order.
import numpy as np

cimport cython
from libc.math cimport sqrt

ctypedef fused real:
    float
    double


def pairwise_distances(real[:, ::1] a, real[:, ::1] b, real[::1] za, real[::1] zb, double eps):
    """Euclidean distances between two point sets, clamped below at eps."""
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], k = a.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double s, diff, dz, d
    if real is float:
        out = np.empty((na, nb), dtype=np.float32)
    else:
        out = np.empty((na, nb), dtype=np.float64)
    cdef real[:, ::1] o = out
    for i in range(na):
        for j in range(nb):
            s = 0.0
            for c in range(k):
                diff = a[i, c] - b[j, c]
                s += diff * diff
            dz = zb[j] - za[i]
            s += dz * dz
            d = sqrt(s)
            if d < eps:
                d = eps
            o[i, j] = <real> d
    return out


def weight_input_grads(real[:, ::1] a, real[:, ::1] b, real[::1] za, real[::1] zb,
                       real[:, ::1] dist, real[:, ::1] dw, double eps):
    """Backpropagate dL/dW through w = 1/d to the distance inputs.

    Clamped pairs (dist == eps) carry zero gradient. Returns (da, db, dza, dzb).
    """
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], k = a.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double d, g, diff, dz
    if real is float:
        ftype = np.float32
    else:
        ftype = np.float64
    da_np = np.zeros((na, k), dtype=ftype)
    db_np = np.zeros((nb, k), dtype=ftype)
    dza_np = np.zeros(na, dtype=ftype)
    dzb_np = np.zeros(nb, dtype=ftype)
    cdef real[:, ::1] da = da_np
    cdef real[:, ::1] db = db_np
    cdef real[::1] dza = dza_np
    cdef real[::1] dzb = dzb_np
    for i in range(na):
        for j in range(nb):
            d = dist[i, j]
            if d <= eps:
                continue
            g = dw[i, j] / (d * d * d)
            for c in range(k):
                diff = a[i, c] - b[j, c]
                da[i, c] -= <real> (g * diff)
                db[j, c] += <real> (g * diff)
            dz = zb[j] - za[i]
            dza[i] += <real> (g * dz)
            dzb[j] -= <real> (g * dz)
    return da_np, db_np, dza_np, dzb_np


def lif_sequence(real[:, :, ::1] currents, Py_ssize_t num_steps, double beta, double threshold):
    """Leaky integrate-and-fire dynamics over a current sequence.

    currents is (T, batch, n), or (1, batch, n) to hold one current
    constant. U_t = beta*U_{t-1} + I_t - threshold*S_{t-1}; S_t = [U_t >= threshold].
    Returns (mem, spk) of shape (num_steps, batch, n).
    """
    cdef Py_ssize_t steps = currents.shape[0]
    cdef Py_ssize_t batch = currents.shape[1], n = currents.shape[2]
    cdef Py_ssize_t t, bi, ni, src
    cdef double u
    if real is float:
        ftype = np.float32
    else:
        ftype = np.float64
    mem_np = np.empty((num_steps, batch, n), dtype=ftype)
    spk_np = np.empty((num_steps, batch, n), dtype=ftype)
    cdef real[:, :, ::1] mem = mem_np
    cdef real[:, :, ::1] spk = spk_np
    # t outermost: every inner sweep is contiguous in the t-major arrays.
    for t in range(num_steps):
        src = t if steps > 1 else 0
        if t == 0:
            for bi in range(batch):
                for ni in range(n):
                    u = currents[src, bi, ni]
                    mem[0, bi, ni] = <real> u
                    spk[0, bi, ni] = 1.0 if u >= threshold else 0.0
        else:
            for bi in range(batch):
                for ni in range(n):
                    u = beta * mem[t - 1, bi, ni] + currents[src, bi, ni] \
                        - threshold * spk[t - 1, bi, ni]
                    mem[t, bi, ni] = <real> u
                    spk[t, bi, ni] = 1.0 if u >= threshold else 0.0
    return mem_np, spk_np


def lif_backward(real[:, :, ::1] d_spk, real[:, :, ::1] d_mem, real[:, :, ::1] mem,
                 double beta, double threshold, double slope):
    """Backpropagation through time for one LIF population.

    Arctangent pseudo-derivative g(U) = (slope/pi)/(1 + (slope*(U-threshold))^2)
    stands in for the spike Heaviside. Returns d_cur[t] = dL/dI_t via

        dU_t = d_mem[t] + beta*dU_{t+1} + (d_spk[t] - threshold*dU_{t+1}) * g(U_t)
    """
    cdef Py_ssize_t steps = mem.shape[0], batch = mem.shape[1], n = mem.shape[2]
    cdef Py_ssize_t t, bi, ni
    cdef double carry, x, g
    cdef double pi = 3.14159265358979323846
    cdef double scale = slope / pi
    if real is float:
        ftype = np.float32
    else:
        ftype = np.float64
    out_np = np.empty((steps, batch, n), dtype=ftype)
    cdef real[:, :, ::1] out = out_np
    # t outermost (reversed); out[t+1] carries dU_{t+1}, sweeps stay contiguous.
    for t in range(steps - 1, -1, -1):
        for bi in range(batch):
            for ni in range(n):
                x = slope * (mem[t, bi, ni] - threshold)
                g = scale / (1.0 + x * x)
                carry = 0.0 if t == steps - 1 else out[t + 1, bi, ni]
                out[t, bi, ni] = <real> (d_mem[t, bi, ni] + beta * carry
                                         + (d_spk[t, bi, ni] - threshold * carry) * g)
    return out_np
