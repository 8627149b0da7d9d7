"""Problem container and the residual/boundary loss pair."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dcgd import autodiff as ad
from dcgd import network as nw

# model(x) maps an (N, d) array or a seeded jet to an (N, m) output.
Model = Callable


@dataclass(frozen=True)
class PinnProblem:
    """A PDE or ODE posed as residual and boundary operators on a model.

    ``residual(model, x)`` and ``boundary(model, xb)`` return residual
    arrays (plain, or taped when the model is); the losses are their mean
    squares.  ``exact`` is the known solution written as a model, when
    there is one.
    """

    name: str
    input_dim: int
    output_dim: int
    residual: Callable
    boundary: Callable
    sample_domain: Callable[[np.random.Generator, int], np.ndarray]
    sample_boundary: Callable[[np.random.Generator, int], np.ndarray]
    reference: Callable[[np.ndarray], np.ndarray]
    test_points: Callable[[], np.ndarray]
    exact: Callable | None = None
    weights: tuple[float, float] = (1.0, 1.0)
    hidden: tuple[int, ...] = (50, 50, 50)
    activation: str = "tanh"
    meta: dict = field(default_factory=dict)

    def network_config(self, seed: int = 0, hidden=None) -> nw.MlpConfig:
        widths = (self.input_dim, *(hidden or self.hidden), self.output_dim)
        return nw.MlpConfig(widths, self.activation, seed)


@dataclass(frozen=True)
class LossPair:
    loss_r: float
    loss_b: float
    grad_r: np.ndarray
    grad_b: np.ndarray


def sample_batches(problem: PinnProblem, n_r: int, n_b: int, seed):
    """Collocation and boundary points, one independent stream each."""
    if n_r < 1 or n_b < 1:
        raise ValueError("batch sizes must be at least 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    dom, bnd = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(2))
    return problem.sample_domain(dom, n_r), problem.sample_boundary(bnd, n_b)


def _mse(r):
    r = ad.reshape(r, (-1,)) if isinstance(r, ad.Var) else np.ravel(r)
    return ad.mean(r * r)


def evaluate_losses(problem: PinnProblem, model: Model, x_r, x_b) -> tuple[float, float]:
    """Mean-squared residual and boundary losses of an arbitrary model."""
    lr = _mse(problem.residual(model, x_r))
    lb = _mse(problem.boundary(model, x_b))
    return float(ad._val(lr)), float(ad._val(lb))


def _taped_loss(problem, op, config, vector, x):
    tape = ad.Tape()
    theta = tape.variable(vector)
    loss = _mse(op(lambda z: nw.forward(config, theta, z), x))
    if not isinstance(loss, ad.Var):
        return float(loss), np.zeros_like(vector)
    return float(loss.value), ad.backward(loss, theta)


def loss_pair_at(problem: PinnProblem, params: nw.MlpParams, x_r, x_b) -> LossPair:
    """Losses and their parameter gradients on given point sets.

    The problem weights scale each loss (and its gradient).
    """
    wr, wb = problem.weights
    lr, gr = _taped_loss(problem, problem.residual, params.config, params.vector, x_r)
    lb, gb = _taped_loss(problem, problem.boundary, params.config, params.vector, x_b)
    return LossPair(wr * lr, wb * lb, wr * gr, wb * gb)


def loss_pair(problem: PinnProblem, params: nw.MlpParams, n_r: int, n_b: int, seed) -> LossPair:
    x_r, x_b = sample_batches(problem, n_r, n_b, seed)
    return loss_pair_at(problem, params, x_r, x_b)


def relative_l2(pred, ref) -> float:
    pred = np.ravel(np.asarray(pred, dtype=np.float64))
    ref = np.ravel(np.asarray(ref, dtype=np.float64))
    if pred.shape != ref.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {ref.size}")
    den = np.linalg.norm(ref)
    if den == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(pred - ref) / den)


def model_error(problem: PinnProblem, params: nw.MlpParams, points=None, ref=None) -> float:
    """Relative L2 of the network against the reference on the test set."""
    if points is None:
        points = problem.test_points()
    if ref is None:
        ref = problem.reference(points)
    return relative_l2(nw.predict(params, points), ref)
