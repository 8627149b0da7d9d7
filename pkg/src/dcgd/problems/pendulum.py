"""Double pendulum posed as a two-output PINN on a time interval."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dcgd import autodiff as ad
from dcgd.problems import reference as refsol
from dcgd.problems.base import PinnProblem
from dcgd.problems.pdes import uniform_box


@dataclass(frozen=True)
class PendulumParams:
    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    g: float = 9.81
    theta0: float = 5.0 * np.pi / 6.0  # 150 degrees for both arms
    t_end: float = 1.0


def accelerations(th1, th2, w1, w2, p: PendulumParams):
    """Angular accelerations ``(f1, f2)``.

    Written term for term as the benchmark states them.  Note that this
    ``f1`` is the negative of the textbook expression for the first arm
    while ``f2`` agrees with it; the reference integrates the same system,
    so the PINN and its oracle stay consistent.
    Works on arrays and on taped values alike.
    """
    d = th1 - th2
    sd = ad.sin(d)
    s2d = ad.sin(2.0 * d)
    den = p.m1 + p.m2 * (sd * sd)
    f1 = (p.m2 * p.l1 * (w1 * w1) * s2d + 2.0 * p.m2 * p.l2 * (w2 * w2) * sd
          + 2.0 * p.g * p.m2 * ad.cos(th2) * sd + 2.0 * p.g * p.m1 * ad.sin(th1)) / (2.0 * p.l1 * den)
    f2 = (p.m2 * p.l2 * (w2 * w2) * s2d + 2.0 * (p.m1 + p.m2) * p.l1 * (w1 * w1) * sd
          + 2.0 * p.g * (p.m1 + p.m2) * ad.cos(th1) * sd) / (2.0 * p.l2 * den)
    return f1, f2


def first_order_rhs(p: PendulumParams):
    """``y' = F(t, y)`` for the state ``y = (th1, th2, w1, w2)`` (last axis)."""
    def rhs(t, y):
        th1, th2, w1, w2 = (y[..., i] for i in range(4))
        f1, f2 = accelerations(th1, th2, w1, w2, p)
        return np.stack([w1, w2, f1, f2], axis=-1)
    return rhs


def pendulum_reference(t, p: PendulumParams, h: float = 1e-4) -> np.ndarray:
    """Angles ``(th1, th2)`` at times ``t`` from RK4 with step ``h``."""
    y0 = np.array([p.theta0, p.theta0, 0.0, 0.0])
    return refsol.rk4_solve(first_order_rhs(p), y0, t, h)[:, :2]


def _residual(p: PendulumParams):
    def residual(model, t):
        y = model(ad.seed_inputs(t, (0,)))
        dy, ddy = ad.input_derivatives(y, 0)
        col = lambda a, i: ad.getitem(a, (slice(None), slice(i, i + 1)))
        f1, f2 = accelerations(col(y.primal, 0), col(y.primal, 1), col(dy, 0), col(dy, 1), p)
        return ad.concat0([col(ddy, 0) - f1, col(ddy, 1) - f2])
    return residual


def _boundary(p: PendulumParams):
    def boundary(model, tb):
        y = model(ad.seed_inputs(tb, (0,)))
        dy, _ = ad.input_derivatives(y, 0)
        return ad.concat0([y.primal - p.theta0, dy])
    return boundary


def double_pendulum(params: PendulumParams | None = None) -> PinnProblem:
    p = params or PendulumParams()

    def reference(x):
        x = np.asarray(x, dtype=np.float64)
        key = f"pendulum-{p.m1:g}-{p.m2:g}-{p.l1:g}-{p.l2:g}-{p.g:g}-{p.theta0:.17g}"
        return refsol.cached(key, x, lambda q: pendulum_reference(q[:, 0], p), ["t", "theta1", "theta2"])

    return PinnProblem(
        name="double_pendulum", input_dim=1, output_dim=2,
        residual=_residual(p),
        boundary=_boundary(p),
        sample_domain=lambda rng, n: uniform_box(rng, n, (0.0,), (p.t_end,)),
        # the initial instant is the whole boundary; repeated copies would not change the loss
        sample_boundary=lambda rng, n: np.zeros((1, 1)),
        reference=reference,
        test_points=lambda: np.linspace(0.0, p.t_end, 1024)[:, None],
        hidden=(30,) * 6,
        activation="swish",
        meta={"params": p},
    )
