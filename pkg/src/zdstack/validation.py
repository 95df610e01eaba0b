"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import numpy as np

__all__ = [
    "InputDomainError",
    "AssumptionError",
    "FeasibilityError",
    "CaseMismatchError",
    "DegenerateError",
    "check_strategy",
    "check_lambda",
    "check_payoff_matrix",
    "check_f_vector",
]

PROB_TOL = 1e-12


class InputDomainError(ValueError):
    """An argument lies outside its mathematical domain."""


class AssumptionError(ValueError):
    """The stage game violates a standing assumption required by an analysis."""


class FeasibilityError(ValueError):
    """A linear payoff relation cannot be enforced by any defender strategy."""


class CaseMismatchError(ValueError):
    """A theorem-specific construction was requested outside its case."""


class DegenerateError(ArithmeticError):
    """A quantity needed as a divisor vanished."""


def check_strategy(p, name: str = "strategy") -> np.ndarray:
    """Return ``p`` as a float array of four action-1 probabilities.

    Values within ``PROB_TOL`` of [0, 1] are clipped onto the interval.
    """
    arr = np.asarray(p, dtype=float)
    if arr.shape != (4,):
        raise InputDomainError(f"{name} must have shape (4,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputDomainError(f"{name} has non-finite entries: {arr}")
    if np.any(arr < -PROB_TOL) or np.any(arr > 1 + PROB_TOL):
        raise InputDomainError(f"{name} has entries outside [0, 1]: {arr}")
    return np.clip(arr, 0.0, 1.0)


def check_lambda(lam: float, lo: float = 0.0, hi: float = 1.0) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < lo or lam > hi:
        raise InputDomainError(f"lambda must lie in [{lo}, {hi}], got {lam}")
    return lam


def check_payoff_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.shape != (2, 2):
        raise InputDomainError(f"{name} must be 2x2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputDomainError(f"{name} has non-finite entries")
    return arr


def check_f_vector(f) -> np.ndarray:
    arr = np.asarray(f, dtype=float)
    if arr.shape[-1] != 4:
        raise InputDomainError(f"payoff vector must have 4 entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputDomainError("payoff vector has non-finite entries")
    return arr
