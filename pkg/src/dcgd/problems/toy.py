"""Two-parameter bi-objective with a curved Pareto set and flat clamped regions.

Derivatives at the kinks of ``max`` come from the active branch, with ties
going to the first argument (the one that is not the constant).
"""
from __future__ import annotations

import numpy as np

CLAMP = 5e-6


def _clamped_log(a):
    """``log(max(a, CLAMP)) + 6`` and its derivative with respect to ``a``."""
    active = a >= CLAMP
    m = np.where(active, a, CLAMP)
    return np.log(m) + 6.0, np.where(active, 1.0 / m, 0.0)


def toy_losses(theta):
    """``(L1, L2, grad L1, grad L2)``; ``theta`` has shape ``(..., 2)``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape[-1] != 2:
        raise ValueError("theta must have a trailing axis of length 2")
    t1, t2 = theta[..., 0], theta[..., 1]
    zero = np.zeros_like(t1)

    th = np.tanh(-t2)
    dth = -(1.0 - th * th)  # d tanh(-t2) / d t2
    f1, df1_da = _clamped_log(0.5 * (-t1 - 7.0) - th)
    f2, df2_da = _clamped_log(0.5 * (-t1 + 3.0) - th + 2.0)
    # a = 0.5(-t1 + const) - tanh(-t2): da/dt1 = -0.5, da/dt2 = -dth
    grad_f1 = np.stack([-0.5 * df1_da, -dth * df1_da], axis=-1)
    grad_f2 = np.stack([-0.5 * df2_da, -dth * df2_da], axis=-1)

    q = 0.1 * (-t2 - 8.0) ** 2
    g1 = ((-t1 + 7.0) ** 2 + q) / 10.0 - 20.0
    g2 = ((-t1 - 7.0) ** 2 + q) / 10.0 - 20.0
    dq = -0.2 * (-t2 - 8.0) / 10.0
    grad_g1 = np.stack([-0.2 * (-t1 + 7.0), dq + zero], axis=-1)
    grad_g2 = np.stack([-0.2 * (-t1 - 7.0), dq + zero], axis=-1)

    h = np.tanh(0.5 * t2)
    dh = 0.5 * (1.0 - h * h)
    c1 = np.maximum(h, 0.0)
    c2 = np.maximum(-h, 0.0)
    grad_c1 = np.stack([zero, np.where(h >= 0.0, dh, 0.0)], axis=-1)
    grad_c2 = np.stack([zero, np.where(-h >= 0.0, -dh, 0.0)], axis=-1)

    e = lambda a: a[..., None]
    L1 = 2.0 * c1 * f1 + c2 * g1
    L2 = c1 * f2 + c2 * g2
    G1 = 2.0 * (e(c1) * grad_f1 + e(f1) * grad_c1) + e(c2) * grad_g1 + e(g1) * grad_c2
    G2 = e(c1) * grad_f2 + e(f2) * grad_c1 + e(c2) * grad_g2 + e(g2) * grad_c2
    return L1, L2, G1, G2
