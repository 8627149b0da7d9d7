"""Dual cone gradient descent for physics-informed neural networks."""
from dcgd.geometry import GradientPair, gradient_pair, in_dual_cone, pareto_measure
from dcgd.optimizers import (
    Branch,
    DualUpdate,
    StoppingConfig,
    dcgd_average,
    dcgd_center,
    dcgd_projection,
    dual_update,
)

__version__ = "0.1.0"

__all__ = [
    "Branch", "DualUpdate", "GradientPair", "StoppingConfig", "dcgd_average", "dcgd_center",
    "dcgd_projection", "dual_update", "gradient_pair", "in_dual_cone", "pareto_measure",
]
