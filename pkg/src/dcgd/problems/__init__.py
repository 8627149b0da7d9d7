from dcgd.problems.base import (
    LossPair,
    PinnProblem,
    evaluate_losses,
    loss_pair,
    loss_pair_at,
    model_error,
    relative_l2,
    sample_batches,
)
from dcgd.problems.pdes import burgers, helmholtz2d, klein_gordon, poisson1d
from dcgd.problems.pendulum import PendulumParams, double_pendulum
from dcgd.problems.toy import toy_losses

PROBLEMS = {
    "helmholtz2d": helmholtz2d,
    "burgers": burgers,
    "klein_gordon": klein_gordon,
    "poisson1d": poisson1d,
    "double_pendulum": double_pendulum,
}


def get_problem(name: str) -> PinnProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


__all__ = [
    "LossPair", "PinnProblem", "PendulumParams", "PROBLEMS", "burgers", "double_pendulum",
    "evaluate_losses", "get_problem", "helmholtz2d", "klein_gordon", "loss_pair", "loss_pair_at",
    "model_error", "poisson1d", "relative_l2", "sample_batches", "toy_losses",
]
