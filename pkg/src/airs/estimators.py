"""scikit-learn style wrappers around the scheme solvers.

``fit`` takes an instance (object, mapping or JSON path) and solves for the
scheme; ``predict`` maps cost multipliers ``h(t)`` to the actions agents with
those multipliers would take under the fitted scheme.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .airs_solver import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_airs
from .schemes import best_response, linear_best_response, solve_linear
from .validation import check_instance, check_max_iter, check_multipliers, check_tolerance


class OptimalAIRS(BaseEstimator):
    """Budget-optimal anonymous independent reward scheme.

    Attributes set by ``fit``: ``instance_``, ``solution_``, ``scheme_``,
    ``actions_``, ``lambda_``, ``gross_`` and ``spend_``.
    """

    def __init__(self, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        inst = check_instance(X)
        sol = solve_airs(inst, check_tolerance(self.tol), check_max_iter(self.max_iter))
        self.instance_ = inst
        self.solution_ = sol
        self.scheme_ = sol.scheme
        self.actions_ = sol.actions
        self.lambda_ = sol.lam
        self.gross_ = sol.gross
        self.spend_ = sol.spend
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        h = check_multipliers(X)
        c = self.instance_.cost
        return np.array([best_response(self.scheme_, hk, c)[0] for hk in h])

    def score(self, X=None, y=None) -> float:
        """Gross product of the fitted instance."""
        check_is_fitted(self, "solution_")
        return self.gross_


class LinearRewardScheme(BaseEstimator):
    """Budget-exhausting linear scheme ``R(x) = p x``.

    Attributes set by ``fit``: ``instance_``, ``solution_``, ``price_``,
    ``actions_``, ``gross_`` and ``spend_``.
    """

    def __init__(self, tol: float = DEFAULT_TOL, max_iter: int = 500):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        inst = check_instance(X)
        sol = solve_linear(inst, check_tolerance(self.tol), check_max_iter(self.max_iter))
        self.instance_ = inst
        self.solution_ = sol
        self.price_ = sol.price
        self.actions_ = sol.actions
        self.gross_ = sol.gross
        self.spend_ = sol.spend
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        h = check_multipliers(X)
        c = self.instance_.cost
        return np.array([linear_best_response(self.price_, hk, c) for hk in h])

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "solution_")
        return self.gross_
