"""Zero-determinant defender strategies.

A ZD strategy with parameters (eta, beta, gamma) makes the long-run
utilities satisfy ``eta * U_d + beta * U_a + gamma = 0`` whatever the
attacker does.  Writing ``v = eta * S^d + beta * S^a + gamma`` the strategy is
``phi * v + (1, 1, 0, 0)``, so it exists exactly when ``v`` is non-positive
on states 11, 12 and non-negative on 21, 22 (branch 1) or the reverse
(branch 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .game import DETERMINISTIC_POLICIES, HAT_PI, StageGame, batch_utilities
from .validation import (
    CaseMismatchError,
    FeasibilityError,
    InputDomainError,
    check_strategy,
)

__all__ = [
    "FEAS_TOL",
    "NAMED_CONSTRUCTIONS",
    "ZDParameters",
    "Feasibility",
    "ExistenceReport",
    "relation_vector",
    "relation_feasible",
    "zd_exists",
    "existence_report",
    "construct_zd",
    "named_zd",
    "named_relation",
    "theorem1_relations",
    "admissible_k1",
    "admissible_k2",
    "verify_enforcement",
]

FEAS_TOL = 1e-12
NAMED_CONSTRUCTIONS = (
    "thm2",
    "thm2-case1",
    "thm2-case2",
    "thm2-case3",
    "thm3",
    "thm4",
    "thm5",
)


@dataclass(frozen=True)
class ZDParameters:
    """Relation coefficients plus the multiplier ``phi`` used to build the strategy.

    ``phi`` is the signed scale in ``pi_d(1) = phi * v + (1, 1, 0, 0)``;
    it equals ``+-1 / max|v|`` and is 0 only when ``v`` vanishes.
    """

    eta: float
    beta: float
    gamma: float
    phi: float = 0.0
    branch: int = 0

    def __post_init__(self):
        if self.eta == 0 and self.beta == 0 and self.gamma == 0:
            raise InputDomainError("(eta, beta, gamma) = (0, 0, 0) is not a linear relation")

    def residual(self, u_d, u_a):
        return self.eta * np.asarray(u_d) + self.beta * np.asarray(u_a) + self.gamma


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    branch: Optional[int]  # 1 or 2 when feasible

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True)
class ExistenceReport:
    exists: bool
    cross_21: float
    cross_22: float
    message: str


def relation_vector(game: StageGame, eta: float, beta: float, gamma: float) -> np.ndarray:
    return eta * game.s_d + beta * game.s_a + gamma


def _check_relation(eta, beta, gamma):
    vals = np.array([eta, beta, gamma], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InputDomainError("relation coefficients must be finite")
    if not vals.any():
        raise InputDomainError("(eta, beta, gamma) = (0, 0, 0) is not a linear relation")
    return vals


def relation_feasible(
    game: StageGame, eta: float, beta: float, gamma: float, *, check_assumption: bool = True
) -> Feasibility:
    """Whether some defender strategy enforces the relation, and on which branch."""
    if check_assumption:
        game.require_assumption1()
    vals = _check_relation(eta, beta, gamma)
    v = relation_vector(game, *(vals / np.abs(vals).max()))
    top, bottom = v[:2], v[2:]
    if np.all(top <= FEAS_TOL) and np.all(bottom >= -FEAS_TOL):
        return Feasibility(True, 1)
    if np.all(top >= -FEAS_TOL) and np.all(bottom <= FEAS_TOL):
        return Feasibility(True, 2)
    return Feasibility(False, None)


def construct_zd(
    game: StageGame, eta: float, beta: float, gamma: float, *, check_assumption: bool = True
) -> tuple[np.ndarray, ZDParameters]:
    """Build the ZD strategy enforcing ``eta U_d + beta U_a + gamma = 0``.

    The relation is scaled to unit max-norm before the tolerance-based
    checks.  ``|phi| = 1 / max|v|`` pushes at least one component onto the boundary
    of [0, 1].  If all four payoff points lie on the relation line the
    strategy is (1, 1, 0, 0) and ``phi`` is 0.
    """
    feas = relation_feasible(game, eta, beta, gamma, check_assumption=check_assumption)
    if not feas:
        v = relation_vector(game, eta, beta, gamma)
        raise FeasibilityError(
            f"relation ({eta}, {beta}, {gamma}) is not enforceable: v = {v} "
            "has no sign split between states 11,12 and 21,22"
        )
    norm = float(np.abs([eta, beta, gamma]).max())
    v = relation_vector(game, eta / norm, beta / norm, gamma / norm)
    scale = float(np.max(np.abs(v)))
    if scale <= FEAS_TOL:
        return HAT_PI.copy(), ZDParameters(float(eta), float(beta), float(gamma), 0.0, feas.branch)
    sign = 1.0 if feas.branch == 1 else -1.0
    p = np.clip(sign / scale * v + HAT_PI, 0.0, 1.0)
    with np.errstate(over="ignore"):
        phi = sign / (scale * norm)
    return p, ZDParameters(float(eta), float(beta), float(gamma), phi, feas.branch)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def existence_report(game: StageGame) -> ExistenceReport:
    """Half-plane test: do P21 and P22 lie weakly on one side of the line P11-P12?"""
    p11, p12 = game.point("11"), game.point("12")
    c21 = _cross(p11, p12, game.point("21"))
    c22 = _cross(p11, p12, game.point("22"))
    opposite = (c21 > FEAS_TOL and c22 < -FEAS_TOL) or (c21 < -FEAS_TOL and c22 > FEAS_TOL)
    if opposite:
        msg = (
            f"payoff points (U21^d, U21^a)={game.point('21')} and (U22^d, U22^a)={game.point('22')} "
            f"lie on opposite sides of the line through {p11} and {p12}"
        )
    else:
        msg = "P21 and P22 lie weakly on one side of the line through P11 and P12"
    return ExistenceReport(not opposite, c21, c22, msg)


def zd_exists(game: StageGame) -> bool:
    game.require_assumption1()
    return existence_report(game).exists


def _slope(p, q) -> float:
    return (q[1] - p[1]) / (q[0] - p[0])


def _line_through(point, k) -> tuple[float, float, float]:
    """(eta, beta, gamma) for the line U_a - point_a = k (U_d - point_d)."""
    return -k, 1.0, k * point[0] - point[1]


def admissible_k1(game: StageGame) -> tuple[float, float]:
    """Slopes k for which the line through P11 with slope k is enforceable.

    The stated range [0, (U11^a - U21^a) / (U11^d - U21^d)] is intersected
    with the constraint that keeps P22 on the P21 side.
    """
    d, a = game.u_d, game.u_a
    hi = (a[0, 0] - a[1, 0]) / (d[0, 0] - d[1, 0])
    if d[0, 0] > d[1, 1]:
        hi = min(hi, (a[0, 0] - a[1, 1]) / (d[0, 0] - d[1, 1]))
    return 0.0, float(hi)


def admissible_k2(game: StageGame) -> tuple[float, float]:
    p11, p12, p22 = game.point("11"), game.point("12"), game.point("22")
    return float(_slope(p12, p22)), float(_slope(p12, p11))


def _case_flags(game: StageGame) -> dict:
    d, a = game.u_d, game.u_a
    return {
        "U11^d >= U22^d": bool(d[0, 0] >= d[1, 1]),
        "U11^a >= U21^a": bool(a[0, 0] >= a[1, 0]),
    }


def _require(cond: bool, text: str, which: str):
    if not cond:
        raise CaseMismatchError(f"{which} requires {text}")


def _thm2_case(game: StageGame) -> str:
    f = _case_flags(game)
    if not f["U11^a >= U21^a"]:
        return "thm2-case3"
    return "thm2-case1" if f["U11^d >= U22^d"] else "thm2-case2"


def named_relation(
    game: StageGame, which: str, *, k1: Optional[float] = None, k2: Optional[float] = None
) -> tuple[float, float, float]:
    """Relation coefficients of a named construction, checking its case conditions."""
    if which not in NAMED_CONSTRUCTIONS:
        raise InputDomainError(f"unknown construction {which!r}; choose from {NAMED_CONSTRUCTIONS}")
    game.require_assumption1()
    flags = _case_flags(game)
    p11, p12, p21 = game.point("11"), game.point("12"), game.point("21")

    if which == "thm2":
        which = _thm2_case(game)
    if which == "thm4":
        which = "thm2-case1" if all(flags.values()) else "thm3"

    if which == "thm2-case1":
        _require(flags["U11^d >= U22^d"], "U11^d >= U22^d", which)
        _require(flags["U11^a >= U21^a"], "U11^a >= U21^a", which)
        lo, hi = admissible_k1(game)
        if hi < lo:
            raise CaseMismatchError(f"{which}: empty slope interval [{lo}, {hi}]")
        k = 0.5 * (lo + hi) if k1 is None else float(k1)
        return _line_through(p11, k)
    if which == "thm2-case2":
        _require(not flags["U11^d >= U22^d"], "U11^d < U22^d", which)
        _require(flags["U11^a >= U21^a"], "U11^a >= U21^a", which)
        return 0.0, 1.0, -float(game.u_a[1, 0])
    if which == "thm2-case3":
        _require(not flags["U11^a >= U21^a"], "U11^a < U21^a", which)
        lo, hi = admissible_k2(game)
        if hi < lo:
            raise CaseMismatchError(f"{which}: empty slope interval [{lo}, {hi}]")
        k = 0.5 * (lo + hi) if k2 is None else float(k2)
        return _line_through(p12, k)
    k = _slope(p11, p12)
    if which == "thm3":
        return _line_through(p12, k)
    # thm5: the line through P21 parallel to P11-P12
    return _line_through(p21, k)


def named_zd(
    game: StageGame, which: str, *, k1: Optional[float] = None, k2: Optional[float] = None
) -> tuple[np.ndarray, ZDParameters]:
    """One of the named constructions ``thm2``, ``thm2-case1..3``, ``thm3``, ``thm4``, ``thm5``.

    ``thm2`` and ``thm4`` dispatch on the payoff orderings.  Free slopes
    default to the midpoint of their admissible interval.
    """
    eta, beta, gamma = named_relation(game, which, k1=k1, k2=k2)
    return construct_zd(game, eta, beta, gamma)


def theorem1_relations(game: StageGame) -> list[tuple[float, float, float]]:
    """Candidate relations for the existence argument: the lines P11-P12 and P11-P21."""
    p11, p12, p21 = game.point("11"), game.point("12"), game.point("21")
    return [_line_through(p12, _slope(p11, p12)), _line_through(p11, _slope(p11, p21))]


def verify_enforcement(
    game: StageGame,
    zd,
    params: ZDParameters,
    n_samples: int = 1000,
    seed: int = 0,
    *,
    include_deterministic: bool = True,
) -> float:
    """Largest |eta U_d + beta U_a + gamma| over seeded random attackers.

    Attackers are uniform on [0, 1]^4; the 16 deterministic policies are
    appended unless ``include_deterministic`` is False.
    """
    if int(n_samples) < 1:
        raise InputDomainError("n_samples must be at least 1")
    p = check_strategy(zd, "zd")
    attackers = np.random.default_rng(seed).random((int(n_samples), 4))
    if include_deterministic:
        attackers = np.vstack([attackers, DETERMINISTIC_POLICIES])
    u_d, u_a = batch_utilities(game, p, attackers)
    return float(np.max(np.abs(params.residual(u_d, u_a))))
