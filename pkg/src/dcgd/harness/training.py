"""Training loop with per-step geometry recording."""
from __future__ import annotations

import logging
import math
import time

import numpy as np

from dcgd import geometry as geo
from dcgd import network as nw
from dcgd import optimizers as opt
from dcgd.harness.config import ExperimentConfig
from dcgd.harness.records import RunRecord
from dcgd.problems import PinnProblem, get_problem, loss_pair, relative_l2

log = logging.getLogger(__name__)

DCGD_OPTIMIZERS = {"dcgd", "dcgd-gd", "dcgd-lra"}


def step_seed(seed: int, step: int) -> np.random.SeedSequence:
    """Sampling stream for one step; shared by every optimizer at the same seed."""
    return np.random.SeedSequence([int(seed), int(step)])


def _cos(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    return float(u @ v / (nu * nv)) if nu > 0 and nv > 0 else math.nan


def direction(name: str, variant: str, gp: geo.GradientPair, cfg: opt.StoppingConfig):
    """Raw update direction for an optimizer id, plus the DualUpdate for DCGD ids."""
    if name in DCGD_OPTIMIZERS:
        upd = opt.dual_update(gp, variant, cfg)
        return upd.g_dual, upd
    if name in ("adam", "gd"):
        return gp.total, None
    if name == "pcgrad":
        return opt.pcgrad_update(gp), None
    if name == "mgda":
        return opt.mgda_update(gp), None
    raise KeyError(f"unknown optimizer {name!r}")


def geometry_row(step: int, loss_r: float, loss_b: float, gp: geo.GradientPair, g: np.ndarray,
                 upd: opt.DualUpdate | None) -> dict:
    total = gp.total
    cos_r, cos_b = _cos(g, gp.grad_r), _cos(g, gp.grad_b)
    tn = float(np.linalg.norm(total))
    if upd is not None:
        cond_i, m_lower = (float(v) for v in opt.verify_conditions(upd, gp))
        ratio = float(upd.cond_ii_ratio)
        branch = upd.branch_name()
    else:
        cond_i = float(2.0 * total @ g - g @ g)
        ratio = float(np.linalg.norm(g)) / tn if tn > 0 else math.nan
        m_lower, branch = math.nan, "-"
    return {
        "step": step, "loss_r": loss_r, "loss_b": loss_b, "loss_total": loss_r + loss_b,
        "grad_norm": tn, "cos_phi": float(gp.cos_phi), "ratio_r": float(gp.ratio_r),
        "cos_phi_max": min(cos_r, cos_b) if not (math.isnan(cos_r) or math.isnan(cos_b)) else math.nan,
        "membership": bool(geo.in_dual_cone(g, gp)), "cond_i": cond_i, "cond_ii_ratio": ratio,
        "m_lower": m_lower, "step_cos_max": math.nan, "branch": branch,
    }


def _nan_row(step: int, loss_r: float, loss_b: float) -> dict:
    nan = math.nan
    return {"step": step, "loss_r": loss_r, "loss_b": loss_b, "loss_total": loss_r + loss_b,
            "grad_norm": nan, "cos_phi": nan, "ratio_r": nan, "cos_phi_max": nan, "membership": False,
            "cond_i": nan, "cond_ii_ratio": nan, "m_lower": nan, "step_cos_max": nan, "branch": "NaN"}


class Trainer:
    """One training trial: a problem, a network, an optimizer id."""

    def __init__(self, problem: PinnProblem, params: nw.MlpParams, optimizer: str = "dcgd",
                 variant: str = "center", lr: float = 1e-3, n_r: int = 1280, n_b: int = 128,
                 seed: int = 0, decay_rate: float = 0.9, decay_steps: int = 1000,
                 stopping: opt.StoppingConfig = opt.StoppingConfig(), checkpoint_every: int = 100):
        if optimizer not in opt.OPTIMIZERS:
            raise KeyError(f"unknown optimizer {optimizer!r}")
        self.problem = problem
        self.params = params.copy()
        self.optimizer = optimizer
        self.variant = variant
        self.n_r, self.n_b, self.seed = n_r, n_b, seed
        self.stopping = stopping
        self.checkpoint_every = checkpoint_every
        self.state = opt.OptimizerState(lr, decay_rate=decay_rate, decay_steps=decay_steps)
        self._test = None

    def test_error(self) -> float:
        if self._test is None:
            pts = self.problem.test_points()
            self._test = (pts, np.asarray(self.problem.reference(pts)))
        pts, ref = self._test
        return relative_l2(nw.predict(self.params, pts), ref)

    def _apply(self, g: np.ndarray) -> None:
        use_gd = self.optimizer in ("gd", "dcgd-gd")
        step = opt.step_gd if use_gd else opt.step_adam
        self.params.vector = step(self.params.vector, g, self.state)

    def run(self, epochs: int, evaluate: bool = True) -> RunRecord:
        rec = RunRecord(seed=self.seed, stop_reason="max_epochs")
        t0 = time.perf_counter()
        for k in range(epochs + 1):
            lp = loss_pair(self.problem, self.params, self.n_r, self.n_b, step_seed(self.seed, k))
            finite = (math.isfinite(lp.loss_r) and math.isfinite(lp.loss_b)
                      and np.all(np.isfinite(lp.grad_r)) and np.all(np.isfinite(lp.grad_b)))
            if not finite:
                rec.append(_nan_row(k, lp.loss_r, lp.loss_b))
                rec.stop_reason = "nan_loss"
                log.warning("non-finite loss at step %d; trial aborted", k)
                break
            grad_r, grad_b = lp.grad_r, lp.grad_b
            if self.optimizer == "dcgd-lra":
                opt.lra_weight_update(grad_r, grad_b, self.state)
                w_r, w_b = self.state.balancer_weights
                grad_r, grad_b = w_r * grad_r, w_b * grad_b
            gp = geo.gradient_pair(grad_r, grad_b)
            g, upd = direction(self.optimizer, self.variant, gp, self.stopping)
            rec.append(geometry_row(k, lp.loss_r, lp.loss_b, gp, g, upd))
            if evaluate and (k % self.checkpoint_every == 0 or k == epochs):
                rec.checkpoints.append((k, self.test_error()))
            if upd is not None and bool(upd.stopped):
                rec.stop_reason = upd.branch_name()
                if evaluate and rec.checkpoints[-1][0] != k:
                    rec.checkpoints.append((k, self.test_error()))
                break
            if k == epochs:
                break
            before = self.params.vector
            self._apply(g)
            # diagnostic only: the preconditioned step need not stay in the cone
            delta = before - self.params.vector
            rec.rows[-1]["step_cos_max"] = float(np.fmin(_cos(delta, gp.grad_r), _cos(delta, gp.grad_b)))
        rec.wall_time = time.perf_counter() - t0
        if rec.checkpoints:
            errs = [e for _, e in rec.checkpoints]
            rec.relative_l2 = float(np.nanmin(errs)) if np.any(np.isfinite(errs)) else math.nan
            rec.final_relative_l2 = errs[-1]
        return rec


def build_trainer(cfg: ExperimentConfig, seed: int) -> Trainer:
    problem = get_problem(cfg.problem)
    params = nw.glorot_init(problem.network_config(seed, cfg.hidden))
    return Trainer(problem, params, cfg.optimizer, cfg.variant, cfg.lr, cfg.n_r, cfg.n_b, seed,
                   cfg.decay_rate, cfg.decay_steps, checkpoint_every=cfg.checkpoint_every)


def run_training(cfg: ExperimentConfig, seed: int | None = None) -> RunRecord:
    """One trial of ``cfg`` (at ``cfg.seed`` unless ``seed`` is given)."""
    seed = cfg.seed if seed is None else seed
    rec = build_trainer(cfg, seed).run(cfg.epochs)
    log.info("%s/%s seed %d: best rel-L2 %.3e (%s, %.1fs)", cfg.problem, cfg.optimizer, seed,
             rec.relative_l2, rec.stop_reason, rec.wall_time)
    return rec


def run_trials(cfg: ExperimentConfig) -> list[RunRecord]:
    return [run_training(cfg, s) for s in cfg.trial_seeds()]


def trial_summary(records: list[RunRecord]) -> dict:
    errs = np.array([r.relative_l2 for r in records], dtype=np.float64)
    return {"n": int(errs.size), "mean": float(errs.mean()), "std": float(errs.std()),
            "min": float(errs.min()), "max": float(errs.max())}
