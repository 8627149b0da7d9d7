"""scikit-learn style wrapper around one training trial."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from dcgd import network as nw
from dcgd.harness.training import Trainer
from dcgd.problems import get_problem


class PinnSolver(RegressorMixin, BaseEstimator):
    """Fit a PINN to one of the registered problems.

    The problem supplies its own collocation and boundary samples, so
    ``fit`` takes no data; ``X``/``y`` are accepted for pipeline
    compatibility and ignored.  After fitting, ``predict`` evaluates the
    network, ``record_`` holds the per-step geometry and ``params_`` the
    trained parameters.
    """

    def __init__(self, problem="helmholtz2d", optimizer="dcgd", variant="center", epochs=1000,
                 lr=1e-3, n_r=1280, n_b=128, hidden=None, seed=0, decay_rate=0.9,
                 decay_steps=1000, checkpoint_every=100):
        self.problem = problem
        self.optimizer = optimizer
        self.variant = variant
        self.epochs = epochs
        self.lr = lr
        self.n_r = n_r
        self.n_b = n_b
        self.hidden = hidden
        self.seed = seed
        self.decay_rate = decay_rate
        self.decay_steps = decay_steps
        self.checkpoint_every = checkpoint_every

    def fit(self, X=None, y=None):
        if int(self.epochs) < 0:
            raise ValueError("epochs must be nonnegative")
        problem = get_problem(self.problem)
        hidden = None if self.hidden is None else tuple(self.hidden)
        params = nw.glorot_init(problem.network_config(int(self.seed), hidden))
        trainer = Trainer(problem, params, self.optimizer, self.variant, float(self.lr),
                          int(self.n_r), int(self.n_b), int(self.seed), self.decay_rate,
                          int(self.decay_steps), checkpoint_every=int(self.checkpoint_every))
        self.record_ = trainer.run(int(self.epochs))
        self.params_ = trainer.params
        self.problem_ = problem
        self.n_features_in_ = problem.input_dim
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, the problem has {self.n_features_in_}")
        out = nw.predict(self.params_, X)
        return out[:, 0] if out.shape[1] == 1 else out

    def relative_error(self) -> float:
        """Relative L2 error of the fitted network on the problem's test set."""
        check_is_fitted(self, "params_")
        from dcgd.problems import model_error
        return model_error(self.problem_, self.params_)
