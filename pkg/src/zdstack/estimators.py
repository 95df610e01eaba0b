"""Estimator-style wrappers around the solvers.

``fit`` takes a game (a ``StageGame`` or a (2, 2, 2) array stacking the
defender and attacker payoff matrices).  ``predict`` maps attacker
strategies to the defender's long-run utility; ``transform`` returns both
players' utilities.  Parameters follow the scikit-learn conventions, so
``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .game import StageGame, batch_utilities, check_stubborn, mixture_strategy
from .response import CLIP_EPS, best_response, solve_sse
from .validation import InputDomainError, check_lambda, check_strategy
from .zd import construct_zd, named_zd

__all__ = [
    "as_game",
    "check_attackers",
    "StackelbergDefender",
    "ZDDefender",
    "BoundedlyRationalAttacker",
]


def as_game(X) -> StageGame:
    """Coerce ``X`` to a ``StageGame``."""
    if isinstance(X, StageGame):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.shape != (2, 2, 2):
        raise InputDomainError(f"expected a StageGame or an array of shape (2, 2, 2), got {arr.shape}")
    return StageGame(arr[0], arr[1])


def check_attackers(X) -> np.ndarray:
    """Attacker strategies as an (n, 4) array of probabilities."""
    arr = np.atleast_2d(np.asarray(X, dtype=float))
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise InputDomainError(f"attacker strategies must have shape (n, 4), got {arr.shape}")
    for row in arr:
        check_strategy(row, "attacker strategy")
    return arr


class _DefenderMixin:
    def transform(self, X) -> np.ndarray:
        """(n, 2) array of (U_d, U_a) against each attacker strategy."""
        check_is_fitted(self, "strategy_")
        u_d, u_a = batch_utilities(self.game_, self.strategy_, check_attackers(X))
        return np.column_stack([u_d, u_a])

    def predict(self, X) -> np.ndarray:
        return self.transform(X)[:, 0]

    def best_response(self):
        check_is_fitted(self, "strategy_")
        return best_response(self.game_, self.strategy_)


class StackelbergDefender(_DefenderMixin, BaseEstimator):
    """Defender committing to the strong Stackelberg strategy."""

    def __init__(self, coarse_step: float = 0.1, refine_rounds: int = 6, clip_eps: float = CLIP_EPS):
        self.coarse_step = coarse_step
        self.refine_rounds = refine_rounds
        self.clip_eps = clip_eps

    def fit(self, X, y=None):
        self.game_ = as_game(X)
        self.result_ = solve_sse(
            self.game_, self.coarse_step, self.refine_rounds, clip_eps=self.clip_eps
        )
        self.strategy_ = self.result_.pi_d_sse
        self.value_ = self.result_.u_d_sse
        return self


class ZDDefender(_DefenderMixin, BaseEstimator):
    """Defender playing a zero-determinant strategy.

    Give either a named construction in ``which`` or explicit ``relation``
    coefficients (eta, beta, gamma); the latter wins when set.
    """

    def __init__(self, which: str = "thm4", relation=None, k1=None, k2=None):
        self.which = which
        self.relation = relation
        self.k1 = k1
        self.k2 = k2

    def fit(self, X, y=None):
        self.game_ = as_game(X)
        if self.relation is not None:
            eta, beta, gamma = (float(v) for v in self.relation)
            self.strategy_, self.params_ = construct_zd(self.game_, eta, beta, gamma)
        else:
            self.strategy_, self.params_ = named_zd(self.game_, self.which, k1=self.k1, k2=self.k2)
        return self


class BoundedlyRationalAttacker(BaseEstimator):
    """Attacker best-responding with probability ``lam`` and stubborn otherwise.

    ``fit(X, defender)`` takes the game and a fixed defender strategy;
    ``predict`` returns the resulting (U_d, U_a).
    """

    def __init__(self, lam: float = 1.0, stubborn=(1.0, 0.5, 1.0, 0.5)):
        self.lam = lam
        self.stubborn = stubborn

    def fit(self, X, defender):
        lam = check_lambda(self.lam)
        self.game_ = as_game(X)
        self.defender_ = check_strategy(defender, "defender")
        self.br_ = best_response(self.game_, self.defender_).policy
        self.strategy_ = mixture_strategy(self.br_, check_stubborn(self.stubborn), lam)
        return self

    def predict(self, X=None) -> np.ndarray:
        check_is_fitted(self, "strategy_")
        u_d, u_a = batch_utilities(self.game_, self.defender_, self.strategy_)
        return np.array([float(u_d), float(u_a)])
