"""Compiled single-pass kernels for the fused jet activation.

Arrays are packed jets flattened to ``(channels, M)``: row 0 is the primal,
rows ``1..k`` first tangents, rows ``k+1..2k`` second tangents.  The
transcendental part (tanh, or the logistic for swish) is evaluated by
numpy beforehand, which vectorizes it far better than a scalar loop.
"""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

TANH, SWISH = 0, 1


def _derivs(act, z, a):
    if act == TANH:
        f = a
        s = 1.0 - f * f
        return f, s, -2.0 * f * s, -2.0 * s * (1.0 - 3.0 * f * f)
    sg = a
    d = sg * (1.0 - sg)
    q = 1.0 - 2.0 * sg
    return z * sg, sg + z * d, d * (2.0 + z * q), d * (q * (3.0 + z * q) - 2.0 * z * d)


def _forward(act, sv, base, k, has2, out):
    m = sv.shape[1]
    for j in range(m):
        f, s, c, _ = _derivs(act, sv[0, j], base[j])
        out[0, j] = f
        for d in range(k):
            z1 = sv[1 + d, j]
            out[1 + d, j] = s * z1
            a2 = c * z1 * z1
            if has2:
                a2 += s * sv[1 + k + d, j]
            out[1 + k + d, j] = a2


def _backward(act, sv, base, k, has2, g, gs):
    m = sv.shape[1]
    for j in range(m):
        _, s, c, t = _derivs(act, sv[0, j], base[j])
        gz = g[0, j] * s
        for d in range(k):
            z1 = sv[1 + d, j]
            g1 = g[1 + d, j]
            g2 = g[1 + k + d, j]
            w2 = t * z1 * z1
            if has2:
                w2 += c * sv[1 + k + d, j]
                gs[1 + k + d, j] = g2 * s
            gz += g1 * z1 * c + g2 * w2
            gs[1 + d, j] = g1 * s + 2.0 * c * g2 * z1
        gs[0, j] = gz


if numba is not None:
    _derivs = numba.njit(cache=True, inline="always")(_derivs)
    _forward = numba.njit(cache=True)(_forward)
    _backward = numba.njit(cache=True)(_backward)
    AVAILABLE = True
else:  # pragma: no cover
    AVAILABLE = False


def base_values(act: int, z: np.ndarray) -> np.ndarray:
    """tanh(z) for tanh, the logistic of z for swish."""
    if act == TANH:
        return np.tanh(z)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activation_forward(act: int, sv: np.ndarray, base: np.ndarray, k: int, has2: bool) -> np.ndarray:
    shape = sv.shape[1:]
    flat = np.ascontiguousarray(sv.reshape(sv.shape[0], -1))
    out = np.empty((1 + 2 * k, flat.shape[1]))
    _forward(act, flat, np.ascontiguousarray(base).reshape(-1), k, has2, out)
    return out.reshape((1 + 2 * k,) + shape)


def activation_backward(act: int, sv: np.ndarray, base: np.ndarray, k: int, has2: bool,
                        g: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(sv.reshape(sv.shape[0], -1))
    gflat = np.ascontiguousarray(g.reshape(g.shape[0], -1))
    gs = np.empty_like(flat)
    _backward(act, flat, np.ascontiguousarray(base).reshape(-1), k, has2, gflat, gs)
    return gs.reshape(sv.shape)
