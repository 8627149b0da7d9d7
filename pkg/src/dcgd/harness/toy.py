"""Batched runs on the two-parameter toy objective."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dcgd import geometry as geo
from dcgd import optimizers as opt
from dcgd.problems import toy_losses

PARETO_TOL = 1e-3
BOX = (-10.0, 10.0)


def grid_starts(grid_n: int, box=BOX) -> np.ndarray:
    if grid_n < 1:
        raise ValueError("grid_n must be at least 1")
    axis = np.linspace(box[0], box[1], grid_n)
    mesh = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def random_start(seed: int, box=BOX) -> np.ndarray:
    return np.random.default_rng(seed).uniform(box[0], box[1], size=2)


@dataclass
class ToyResult:
    starts: np.ndarray
    final: np.ndarray
    pareto: np.ndarray  # final pareto_measure per start
    stopped_at: np.ndarray  # step of a stop rule, -1 if none fired

    @property
    def failures(self) -> np.ndarray:
        return self.starts[self.pareto >= PARETO_TOL]


def run_toy(starts, steps: int, optimizer: str = "dcgd-gd", variant: str = "center",
            lr: float = 2e-3, stopping: opt.StoppingConfig = opt.StoppingConfig()) -> ToyResult:
    """Run every start independently (vectorized) for ``steps`` steps at a constant rate.

    ``optimizer`` is ``dcgd-gd`` (plain steps along g_dual), ``dcgd``
    (Adam on g_dual), ``adam`` or ``gd``.  A start whose update hits a stop
    rule is frozen from then on.
    """
    theta = np.array(starts, dtype=np.float64, ndmin=2)
    n = len(theta)
    state = opt.OptimizerState(lr, decay_steps=0)
    state.adam_m = np.zeros_like(theta)
    state.adam_v = np.zeros_like(theta)
    active = np.ones(n, dtype=bool)
    stopped_at = np.full(n, -1)
    for k in range(steps):
        _, _, g1, g2 = toy_losses(theta)
        gp = geo.gradient_pair(g1, g2)
        if optimizer in ("dcgd", "dcgd-gd"):
            upd = opt.dual_update(gp, variant, stopping)
            newly = active & upd.stopped
            stopped_at[newly] = k
            active &= ~upd.stopped
            g = upd.g_dual
        elif optimizer in ("adam", "gd"):
            g = gp.total
        else:
            raise KeyError(f"unsupported toy optimizer {optimizer!r}")
        if not np.any(active):
            break
        if optimizer in ("dcgd-gd", "gd"):
            new = theta - lr * g
        else:
            # per-start Adam moments; frozen starts keep theirs untouched
            m_old, v_old = state.adam_m.copy(), state.adam_v.copy()
            new = opt.step_adam(theta, g, state)
            state.adam_m = np.where(active[:, None], state.adam_m, m_old)
            state.adam_v = np.where(active[:, None], state.adam_v, v_old)
        theta = np.where(active[:, None], new, theta)
    _, _, g1, g2 = toy_losses(theta)
    pm = geo.pareto_measure(geo.gradient_pair(g1, g2))
    return ToyResult(np.array(starts, dtype=np.float64, ndmin=2), theta, pm, stopped_at)


def toy_convergence_map(grid_n: int, steps: int, variant: str = "center", lr: float = 2e-3,
                        optimizer: str = "dcgd-gd", starts=None) -> np.ndarray:
    """Starts (of a ``grid_n`` x ``grid_n`` grid on [-10, 10]^2 unless given)
    whose final pareto_measure is at least 1e-3."""
    if starts is None:
        starts = grid_starts(grid_n)
    return run_toy(starts, steps, optimizer, variant, lr).failures


def descent_trace(start, steps: int = 10_000, lr: float = 1e-4, variant: str = "center",
                  stopping: opt.StoppingConfig = opt.StoppingConfig()):
    """Plain-step DCGD from one start.

    Returns ``(totals, stopped)``: ``totals[k]`` is ``L1 + L2`` before step k
    (and after the last step at the end); ``stopped[k]`` flags a stop rule at
    step k (no step taken).
    """
    theta = np.asarray(start, dtype=np.float64)
    totals, stopped = [], []
    for _ in range(steps):
        L1, L2, g1, g2 = toy_losses(theta)
        totals.append(float(L1 + L2))
        upd = opt.dual_update(geo.gradient_pair(g1, g2), variant, stopping)
        stopped.append(bool(upd.stopped))
        if not upd.stopped:
            theta = theta - lr * upd.g_dual
    L1, L2, _, _ = toy_losses(theta)
    totals.append(float(L1 + L2))
    return np.array(totals), np.array(stopped)
