"""Dual-cone update rules, baselines, and the parameter-update steps.

The update rules act on a :class:`~dcgd.geometry.GradientPair` and are
vectorized over leading axes, so a batch of independent pairs (for
instance one per start of the toy problem) is handled in one call.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from dcgd import geometry as geo
from dcgd.geometry import CONE_TOL, GradientPair, _dot, _norm


class Branch(IntEnum):
    PassThrough = 0
    ProjectOntoRPerp = 1
    ProjectOntoBPerp = 2
    Average = 3
    Center = 4
    ParetoStop = 5
    GradStop = 6


STOP_BRANCHES = (Branch.ParetoStop, Branch.GradStop)


class Stop(IntEnum):
    Continue = 0
    ParetoStop = 1
    GradStop = 2


@dataclass(frozen=True)
class StoppingConfig:
    conflict_threshold: float = 1e-8  # alpha: stop when phi > pi - alpha
    grad_threshold: float = 1e-12  # epsilon: stop when |grad L| < epsilon

    def __post_init__(self):
        if not (self.conflict_threshold > 0 and self.grad_threshold > 0):
            raise ValueError("stopping thresholds must be positive")


@dataclass(frozen=True)
class DualUpdate:
    g_dual: np.ndarray
    branch: np.ndarray  # Branch codes, one per pair
    cond_i: np.ndarray  # 2<grad L, g> - |g|^2
    cond_ii_ratio: np.ndarray  # |g| / |grad L|, NaN when grad L = 0

    @property
    def stopped(self) -> np.ndarray:
        return np.isin(self.branch, [int(b) for b in STOP_BRANCHES])

    def branch_name(self) -> str:
        return Branch(int(self.branch)).name


def antiparallel_gap(gp: GradientPair) -> np.ndarray:
    """``pi - phi``, computed from the bisector length ``|r/|r| + b/|b|| = 2 sin((pi - phi)/2)``.

    Near phi = pi the cosine is flat: cos(pi - 1e-8) rounds to -1, so a
    cosine comparison cannot resolve the stopping margin.  The bisector
    length keeps full relative accuracy there.  NaN where a norm is zero.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        u = gp.grad_r / gp.norm_r[..., None] + gp.grad_b / gp.norm_b[..., None]
        gap = 2.0 * np.arcsin(np.clip(0.5 * _norm(u), 0.0, 1.0))
    return np.where(gp.defined, gap, np.nan)


def stopping_check(gp: GradientPair, cfg: StoppingConfig = StoppingConfig()) -> np.ndarray:
    """``Stop`` codes: ``ParetoStop`` for nearly antiparallel gradients, else
    ``GradStop`` for a vanishing total gradient (both norms zero included).

    Antiparallel pairs of equal length have ``grad L = 0`` too; the angle test
    comes first so they are reported as Pareto-stationary.
    """
    total_norm = _norm(gp.total)
    grad_stop = (total_norm < cfg.grad_threshold) | ((gp.norm_r == 0) & (gp.norm_b == 0))
    pareto = gp.defined & (antiparallel_gap(gp) < cfg.conflict_threshold)
    return np.where(pareto, int(Stop.ParetoStop), np.where(grad_stop, int(Stop.GradStop), int(Stop.Continue)))


def _safe(x):
    return np.where(x > 0, x, 1.0)


def _finish(gp: GradientPair, g: np.ndarray, branch: np.ndarray) -> DualUpdate:
    total = gp.total
    tn = _norm(total)
    stop = np.isin(branch, [int(b) for b in STOP_BRANCHES])
    g = np.where(stop[..., None], 0.0, g)
    cond_i = 2.0 * _dot(total, g) - _dot(g, g)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(tn > 0, _norm(g) / _safe(tn), np.nan)
    return DualUpdate(g, np.asarray(branch), cond_i, ratio)


def _prelude(gp: GradientPair, cfg: StoppingConfig):
    """Stop handling shared by every variant.

    Returns the initial branch array: stop codes, ``PassThrough`` for pairs
    with exactly one zero gradient (the other one is used as is), and -1
    for pairs the variant still has to decide.
    """
    stop = stopping_check(gp, cfg)
    branch = np.full(stop.shape, -1)
    branch = np.where(stop == Stop.GradStop, int(Branch.GradStop), branch)
    branch = np.where(stop == Stop.ParetoStop, int(Branch.ParetoStop), branch)
    one_zero = (branch < 0) & ~gp.defined
    branch = np.where(one_zero, int(Branch.PassThrough), branch)
    return branch


def _projections(gp: GradientPair):
    total = gp.total
    p_r = total - (_dot(total, gp.grad_r) / _safe(gp.norm_r ** 2))[..., None] * gp.grad_r
    p_b = total - (_dot(total, gp.grad_b) / _safe(gp.norm_b ** 2))[..., None] * gp.grad_b
    return p_r, p_b


def _conflicts(gp: GradientPair, tol: float):
    total = gp.total
    tn = _norm(total)
    conf_r = _dot(total, gp.grad_r) < -tol * tn * gp.norm_r
    conf_b = _dot(total, gp.grad_b) < -tol * tn * gp.norm_b
    return conf_r, conf_b


def dcgd_projection(gp: GradientPair, cfg: StoppingConfig = StoppingConfig(), tol: float = CONE_TOL) -> DualUpdate:
    """Keep ``grad L`` if it is in the dual cone, else drop its component along
    the gradient it conflicts with."""
    branch = _prelude(gp, cfg)
    open_ = branch < 0
    conf_r, conf_b = _conflicts(gp, tol)
    if np.any(open_ & conf_r & conf_b):
        raise ArithmeticError("grad L conflicts with both gradients, which would make |grad L|^2 negative")
    p_r, p_b = _projections(gp)
    branch = np.where(open_ & conf_r, int(Branch.ProjectOntoRPerp), branch)
    branch = np.where(open_ & conf_b, int(Branch.ProjectOntoBPerp), branch)
    branch = np.where(branch < 0, int(Branch.PassThrough), branch)
    g = np.where((branch == Branch.ProjectOntoRPerp)[..., None], p_r,
                 np.where((branch == Branch.ProjectOntoBPerp)[..., None], p_b, gp.total))
    return _finish(gp, g, branch)


def dcgd_average(gp: GradientPair, cfg: StoppingConfig = StoppingConfig(), tol: float = CONE_TOL) -> DualUpdate:
    """Keep ``grad L`` if it is in the dual cone, else average its two orthogonal projections."""
    branch = _prelude(gp, cfg)
    open_ = branch < 0
    conf_r, conf_b = _conflicts(gp, tol)
    p_r, p_b = _projections(gp)
    branch = np.where(open_ & (conf_r | conf_b), int(Branch.Average), branch)
    branch = np.where(branch < 0, int(Branch.PassThrough), branch)
    g = np.where((branch == Branch.Average)[..., None], 0.5 * (p_r + p_b), gp.total)
    return _finish(gp, g, branch)


def dcgd_center(gp: GradientPair, cfg: StoppingConfig = StoppingConfig(), tol: float = CONE_TOL) -> DualUpdate:
    """Project ``grad L`` onto the bisector of the two gradients, in or out of the cone."""
    branch = _prelude(gp, cfg)
    gc = gp.grad_r / _safe(gp.norm_r)[..., None] + gp.grad_b / _safe(gp.norm_b)[..., None]
    gcc = _dot(gc, gc)
    branch = np.where((branch < 0) & (gcc == 0), int(Branch.ParetoStop), branch)
    branch = np.where(branch < 0, int(Branch.Center), branch)
    g = np.where((branch == Branch.Center)[..., None],
                 (_dot(gc, gp.total) / _safe(gcc))[..., None] * gc, gp.total)
    return _finish(gp, g, branch)


VARIANTS = {"projection": dcgd_projection, "average": dcgd_average, "center": dcgd_center}


def dual_update(gp: GradientPair, variant: str = "center", cfg: StoppingConfig = StoppingConfig()) -> DualUpdate:
    try:
        rule = VARIANTS[variant]
    except KeyError:
        raise KeyError(f"unknown DCGD variant {variant!r}") from None
    return rule(gp, cfg)


def verify_conditions(update: DualUpdate, gp: GradientPair):
    """``(cond_i, m_lower)``: the descent condition value and the branch's
    guaranteed lower bound on ``|g_dual| / |grad L|``.

    Center: cos(phi/2); a projection: sin(phi); the average: sin(phi)/2;
    pass-through: 1.  NaN for stopped pairs and for ``grad L = 0``.
    """
    with np.errstate(invalid="ignore"):
        c = gp.cos_phi
        sin_phi = np.sqrt(np.clip(1.0 - c * c, 0.0, 1.0))
        half = np.sqrt(np.clip(0.5 * (1.0 + c), 0.0, 1.0))
    b = update.branch
    m = np.select(
        [b == Branch.PassThrough, b == Branch.Center,
         (b == Branch.ProjectOntoRPerp) | (b == Branch.ProjectOntoBPerp), b == Branch.Average],
        [np.ones_like(sin_phi), half, sin_phi, 0.5 * sin_phi],
        default=np.nan,
    )
    m = np.where(np.isnan(update.cond_ii_ratio), np.nan, m)
    return update.cond_i, m


# --- baselines -------------------------------------------------------------

def pcgrad_update(gp: GradientPair) -> np.ndarray:
    """Project-conflicting-gradients: each gradient loses its component along
    the other when they conflict, and the two are averaged."""
    r, b = gp.grad_r, gp.grad_b
    rb = gp.dot
    r_p = r - (rb / _safe(gp.norm_b ** 2))[..., None] * b
    b_p = b - (rb / _safe(gp.norm_r ** 2))[..., None] * r
    conflict = gp.defined & (rb < 0)
    return np.where(conflict[..., None], 0.5 * (r_p + b_p), r + b)


def mgda_update(gp: GradientPair) -> np.ndarray:
    """Minimum-norm point of the segment between the two gradients."""
    gamma = geo.min_norm_weight(gp)[..., None]
    return gamma * gp.grad_r + (1.0 - gamma) * gp.grad_b


def nash_direction(gp: GradientPair) -> np.ndarray:
    if not np.all(gp.defined):
        raise geo.GeometryError("direction undefined for a zero-norm gradient")
    if np.any(gp.cos_phi <= -1.0):
        raise geo.GeometryError("scaling undefined for antiparallel gradients")
    scale = np.sqrt(1.0 / (1.0 + gp.cos_phi))
    return scale[..., None] * geo.center_direction(gp)


# --- steps -----------------------------------------------------------------

@dataclass
class OptimizerState:
    """Mutable training state owned by one run."""

    learning_rate: float
    decay_rate: float = 0.9
    decay_steps: int = 1000
    step_count: int = 0
    adam_m: np.ndarray | None = None
    adam_v: np.ndarray | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    balancer_weights: tuple[float, float] = (1.0, 1.0)
    balancer_rate: float = 0.1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")

    @property
    def current_lr(self) -> float:
        """Staircase exponential decay: ``lr * rate ** floor(step / decay_steps)``."""
        if self.decay_steps <= 0 or self.decay_rate == 1.0:
            return self.learning_rate
        return self.learning_rate * self.decay_rate ** (self.step_count // self.decay_steps)


def step_gd(params: np.ndarray, g: np.ndarray, state: OptimizerState) -> np.ndarray:
    """``theta - lr * g`` with the decayed rate; advances the step counter."""
    out = params - state.current_lr * g
    state.step_count += 1
    return out


def step_adam(params: np.ndarray, g: np.ndarray, state: OptimizerState) -> np.ndarray:
    """Bias-corrected Adam step on an arbitrary direction ``g``."""
    if state.adam_m is None:
        state.adam_m = np.zeros_like(params)
        state.adam_v = np.zeros_like(params)
    k = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    state.adam_m = b1 * state.adam_m + (1.0 - b1) * g
    state.adam_v = b2 * state.adam_v + (1.0 - b2) * (g * g)
    m_hat = state.adam_m / (1.0 - b1 ** k)
    v_hat = state.adam_v / (1.0 - b2 ** k)
    out = params - state.current_lr * m_hat / (np.sqrt(v_hat) + state.eps)
    state.step_count = k
    return out


def step_dcgd_adam(params: np.ndarray, gp: GradientPair, state: OptimizerState,
                   variant: str = "center", cfg: StoppingConfig = StoppingConfig()):
    """Adam driven by the dual-cone direction.  Returns ``(params, update)``;
    a stopped update leaves the parameters and moments untouched."""
    upd = dual_update(gp, variant, cfg)
    if np.any(upd.stopped):
        return params, upd
    return step_adam(params, upd.g_dual, state), upd


def lra_weight_update(grad_r: np.ndarray, grad_b: np.ndarray, state: OptimizerState) -> tuple[float, float]:
    """Learning-rate-annealing weights: ``w_b`` tracks max|grad_r| / mean|grad_b|
    by an exponential moving average; ``w_r`` stays 1."""
    w_r, w_b = state.balancer_weights
    mean_b = float(np.mean(np.abs(grad_b)))
    if mean_b > 0:
        w_hat = float(np.max(np.abs(grad_r))) / mean_b
        a = state.balancer_rate
        w_b = (1.0 - a) * w_b + a * w_hat
    state.balancer_weights = (1.0, w_b)
    return state.balancer_weights


def loss_balanced_step(params: np.ndarray, grad_r: np.ndarray, grad_b: np.ndarray, state: OptimizerState,
                       variant: str = "center", use_adam: bool = True,
                       cfg: StoppingConfig = StoppingConfig(), update_weights: bool = True):
    """Rescale the loss gradients by the balancer weights, then take a DCGD step.

    Returns ``(params, update, gradient_pair)``; the pair is the rescaled one.
    """
    if update_weights:
        lra_weight_update(grad_r, grad_b, state)
    w_r, w_b = state.balancer_weights
    gp = geo.gradient_pair(w_r * grad_r, w_b * grad_b)
    if use_adam:
        new, upd = step_dcgd_adam(params, gp, state, variant, cfg)
    else:
        upd = dual_update(gp, variant, cfg)
        new = params if np.any(upd.stopped) else step_gd(params, upd.g_dual, state)
    return new, upd, gp


OPTIMIZERS = ("adam", "gd", "dcgd", "dcgd-gd", "dcgd-lra", "pcgrad", "mgda")
