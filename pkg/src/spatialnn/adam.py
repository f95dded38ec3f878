"""Adam over heterogeneous parameter bundles.

Parameters and gradients travel as dicts of arrays (coordinates, gaps,
z values, inhibition values, biases, dense weights all side by side).
One AdamState spans every group of a model; there are no per-group
learning rates. The update is the standard bias-corrected rule:

    m_t = b1*m + (1-b1)*g          m_hat = m_t / (1 - b1^t)
    v_t = b2*v + (1-b2)*g^2        v_hat = v_t / (1 - b2^t)
    p  -= lr * m_hat / (sqrt(v_hat) + eps)

adam_step is pure: it returns fresh parameter arrays and a fresh state,
and identical inputs give bitwise identical outputs.
"""

from dataclasses import dataclass, replace

import numpy as np

from spatialnn.errors import NonFiniteGradientError, ShapeError


@dataclass(frozen=True)
class AdamState:
    t: int
    m: dict
    v: dict
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def init(params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        m = {k: np.zeros_like(a) for k, a in params.items()}
        v = {k: np.zeros_like(a) for k, a in params.items()}
        return AdamState(t=0, m=m, v=v, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params, grads, state):
    """One Adam step over every parameter group.

    Raises NonFiniteGradientError naming the offending group if any
    gradient entry is NaN or infinite. Returns (new_params, new_state).
    """
    if set(params) != set(grads):
        raise ShapeError("parameter groups %r != gradient groups %r" % (sorted(params), sorted(grads)))
    t = state.t + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for key in params:
        p, g = params[key], grads[key]
        if p.shape != g.shape:
            raise ShapeError("gradient for %r has shape %r, parameter has %r" % (key, g.shape, p.shape))
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError("non-finite gradient in parameter group %r" % key)
        m = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[key] + (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_params[key] = p - update
        new_m[key] = m
        new_v[key] = v
    return new_params, replace(state, t=t, m=new_m, v=new_v)
