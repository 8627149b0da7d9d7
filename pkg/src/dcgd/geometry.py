"""Dual-cone geometry for a pair of loss gradients.

Every function works on the last axis and broadcasts over any leading
axes, so a batch of gradient pairs can be processed in one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONE_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid input to a geometric operation."""


def _dot(u, v):
    return np.einsum("...i,...i->...", u, v)


def _norm(u):
    n = np.sqrt(_dot(u, u))
    # squares under/overflow outside ~1e+-150; rescale by max|u| only there
    risky = ~((n > 1e-150) & (n < 1e150))
    if not np.any(risky):
        return n
    s = np.max(np.abs(u), axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = u / s[..., None]
        scaled = s * np.sqrt(_dot(w, w))
    return np.where(risky & (s > 0), scaled, n)


@dataclass(frozen=True)
class GradientPair:
    """Residual-loss and boundary-loss gradients with their derived geometry."""

    grad_r: np.ndarray
    grad_b: np.ndarray
    norm_r: np.ndarray
    norm_b: np.ndarray
    dot: np.ndarray
    cos_phi: np.ndarray  # NaN where either norm is zero
    ratio_r: np.ndarray  # NaN where norm_b is zero

    @property
    def total(self) -> np.ndarray:
        return self.grad_r + self.grad_b

    @property
    def defined(self) -> np.ndarray:
        """True where both norms are positive, i.e. the angle exists."""
        return (self.norm_r > 0) & (self.norm_b > 0)

    @property
    def dim(self) -> int:
        return self.grad_r.shape[-1]


def gradient_pair(grad_r, grad_b) -> GradientPair:
    grad_r = np.asarray(grad_r, dtype=np.float64)
    grad_b = np.asarray(grad_b, dtype=np.float64)
    if grad_r.shape != grad_b.shape:
        raise GeometryError(f"dimension mismatch: {grad_r.shape} vs {grad_b.shape}")
    if grad_r.ndim == 0:
        raise GeometryError("gradients must be vectors")
    if not (np.all(np.isfinite(grad_r)) and np.all(np.isfinite(grad_b))):
        raise GeometryError("gradients contain NaN or Inf")
    norm_r = _norm(grad_r)
    norm_b = _norm(grad_b)
    dot = _dot(grad_r, grad_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = norm_r * norm_b
        cos_phi = np.where(denom > 0, dot / np.where(denom > 0, denom, 1.0), np.nan)
        cos_phi = np.clip(cos_phi, -1.0, 1.0)
        ratio_r = np.where(norm_b > 0, norm_r / np.where(norm_b > 0, norm_b, 1.0), np.nan)
    return GradientPair(grad_r, grad_b, norm_r, norm_b, dot, cos_phi, ratio_r)


def in_dual_cone(v, gp: GradientPair, tol: float = CONE_TOL):
    """Membership of ``v`` in the dual cone spanned by the two gradient rays."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != gp.dim:
        raise GeometryError("vector and gradients differ in dimension")
    nv = _norm(v)
    ok_r = _dot(v, gp.grad_r) >= -tol * nv * gp.norm_r
    ok_b = _dot(v, gp.grad_b) >= -tol * nv * gp.norm_b
    return ok_r & ok_b


def theorem1_membership(gp: GradientPair):
    """Whether ``grad_r + grad_b`` lies in the dual cone.

    Decided from the angle and magnitude ratio alone: either the gradients do
    not conflict, or they do and ``-cos(phi) <= R <= -1/cos(phi)``.
    """
    if not np.all(gp.defined):
        raise GeometryError("angle undefined for a zero-norm gradient")
    c = gp.cos_phi
    R = gp.ratio_r
    with np.errstate(divide="ignore"):
        upper = np.where(c < 0, -1.0 / np.where(c < 0, c, -1.0), np.inf)
    return (c >= 0) | ((c < 0) & (-c <= R) & (R <= upper))


def project_orthogonal(v, w):
    """Component of ``v`` orthogonal to ``w``."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    ww = _dot(w, w)
    if np.any(ww == 0):
        raise GeometryError("cannot project onto the complement of a zero vector")
    return v - (_dot(v, w) / ww)[..., None] * w


def conic_combination(c1, c2, gp: GradientPair):
    """``c1 * (grad L perp grad_r) + c2 * (grad L perp grad_b)`` with ``grad L = grad_r + grad_b``."""
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    if np.any(c1 < 0) or np.any(c2 < 0):
        raise GeometryError("conic coefficients must be nonnegative")
    if not np.all(gp.defined):
        raise GeometryError("conic combination needs two nonzero gradients")
    total = gp.total
    p_r = project_orthogonal(total, gp.grad_r)
    p_b = project_orthogonal(total, gp.grad_b)
    return c1[..., None] * p_r + c2[..., None] * p_b


def center_direction(gp: GradientPair):
    """Sum of the two unit gradients (the angle bisector).

    Antiparallel gradients give the zero vector; callers treat that as a
    Pareto stop.
    """
    if not np.all(gp.defined):
        raise GeometryError("bisector undefined for a zero-norm gradient")
    return gp.grad_b / gp.norm_b[..., None] + gp.grad_r / gp.norm_r[..., None]


def min_norm_weight(gp: GradientPair):
    """Weight ``a`` in [0, 1] minimizing ``|a*grad_r + (1-a)*grad_b|``."""
    diff = gp.grad_r - gp.grad_b
    dd = _dot(diff, diff)
    num = _dot(gp.grad_b - gp.grad_r, gp.grad_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(dd > 0, num / np.where(dd > 0, dd, 1.0), 0.5)
    return np.clip(a, 0.0, 1.0)


def pareto_measure(gp: GradientPair):
    """Smallest norm over convex combinations of the two gradients; zero at Pareto-stationary points."""
    a = min_norm_weight(gp)[..., None]
    return _norm(a * gp.grad_r + (1.0 - a) * gp.grad_b)
