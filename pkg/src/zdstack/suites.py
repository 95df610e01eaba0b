"""Invariant checks bundled as a self-test.

Each check draws seeded random inputs, reports its worst residual and the
input that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import remainder_g
from .game import (
    DETERMINISTIC_POLICIES,
    StageGame,
    batch_utilities,
    check_stubborn,
    long_run_utilities,
    press_dyson_cofactors,
)
from .response import best_response_batch, best_response_certificate
from .validation import CaseMismatchError, FeasibilityError
from .zd import NAMED_CONSTRUCTIONS, named_zd

__all__ = [
    "CheckResult",
    "TOLERANCES",
    "check_route_agreement",
    "check_zd_enforcement",
    "check_br_certificate",
    "check_bilinearity",
    "check_g_bound",
    "run_all",
]

TOLERANCES = {
    "route-agreement": 1e-9,
    "zd-enforcement": 1e-9,
    "br-certificate": 1e-9,
    "bilinearity": 1e-10,
    "g-bound": 1e-9,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    witness: str = ""


def _fmt(*arrays) -> str:
    return " | ".join(np.array2string(np.asarray(a), precision=6, separator=",") for a in arrays)


def _result(name: str, residual: float, witness: str) -> CheckResult:
    tol = TOLERANCES[name.split("[")[0]]
    return CheckResult(name, float(residual), tol, bool(residual <= tol), witness)


def check_route_agreement(game: StageGame, n: int = 1000, seed: int = 0) -> CheckResult:
    """Determinant route against the stationary route on fully mixed pairs."""
    rng = np.random.default_rng(seed)
    pairs = rng.uniform(0.01, 0.99, size=(n, 2, 4))
    worst, witness = 0.0, ""
    for p, q in pairs:
        a = long_run_utilities(game, p, q, route="determinant")
        b = long_run_utilities(game, p, q, route="stationary")
        r = max(abs(a.u_d - b.u_d), abs(a.u_a - b.u_a))
        if r >= worst:
            worst, witness = r, _fmt(p, q)
    return _result("route-agreement", worst, witness)


def check_zd_enforcement(game: StageGame, n: int = 1000, seed: int = 0) -> list[CheckResult]:
    """Every applicable named construction against random and deterministic attackers."""
    attackers = np.vstack([np.random.default_rng(seed).random((n, 4)), DETERMINISTIC_POLICIES])
    out = []
    for which in NAMED_CONSTRUCTIONS:
        try:
            zd, params = named_zd(game, which)
        except (CaseMismatchError, FeasibilityError):
            continue
        u_d, u_a = batch_utilities(game, zd, attackers)
        res = np.abs(params.residual(u_d, u_a))
        i = int(np.argmax(res))
        out.append(_result(f"zd-enforcement[{which}]", res[i], f"zd={_fmt(zd)} attacker={_fmt(attackers[i])}"))
    return out


def check_br_certificate(game: StageGame, n: int = 100, seed: int = 0, grid_step: float = 0.1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, witness = -np.inf, ""
    for p in rng.random((n, 4)):
        c = best_response_certificate(game, p, grid_step)
        if c >= worst:
            worst, witness = c, _fmt(p)
    return _result("br-certificate", max(worst, 0.0), witness)


def check_bilinearity(game: StageGame, n: int = 1000, seed: int = 0) -> CheckResult:
    """D(p, lam q1 + (1-lam) q2, f) against its quadratic expansion in lam."""
    rng = np.random.default_rng(seed)
    p, q1, q2 = rng.random((3, n, 4))
    lam = rng.random((n, 1))
    f = np.stack([np.ones(4), game.s_d, game.s_a], axis=-1)
    mix = lam * q1 + (1 - lam) * q2
    direct = press_dyson_cofactors(p, mix) @ f
    expanded = (
        lam**2 * (press_dyson_cofactors(p, q1) @ f)
        + (1 - lam) ** 2 * (press_dyson_cofactors(p, q2) @ f)
        + lam * (1 - lam) * ((press_dyson_cofactors(p, q1, q2) + press_dyson_cofactors(p, q2, q1)) @ f)
    )
    res = np.abs(direct - expanded).max(axis=-1)
    i = int(np.argmax(res))
    return _result("bilinearity", res[i], _fmt(p[i], q1[i], q2[i], lam[i]))


def check_g_bound(game: StageGame, stubborn, n: int = 1000, seed: int = 0) -> CheckResult:
    """|g(lam)| <= B lam (1 - lam) with B from the same strategy pair."""
    st = check_stubborn(stubborn)
    rng = np.random.default_rng(seed)
    s, z = rng.random((2, n, 4))
    lam = rng.random(n)
    br_s = DETERMINISTIC_POLICIES[best_response_batch(game, s)[0]]
    br_z = DETERMINISTIC_POLICIES[best_response_batch(game, z)[0]]
    g, _, (b1, b2, b3) = remainder_g(game, s, z, st, lam, br_s, br_z)
    bound = np.maximum(np.maximum(b1, b2), 0.5 * b3) * lam * (1 - lam)
    excess = np.abs(g) - bound
    i = int(np.argmax(excess))
    return _result("g-bound", max(float(excess[i]), 0.0), _fmt(s[i], z[i], lam[i]))


def run_all(game: StageGame, stubborn, seed: int = 0) -> list[CheckResult]:
    """All checks in a fixed order; the caller gates on the standing assumptions."""
    return [
        check_route_agreement(game, seed=seed),
        *check_zd_enforcement(game, seed=seed),
        check_br_certificate(game, seed=seed),
        check_bilinearity(game, seed=seed),
        check_g_bound(game, stubborn, seed=seed),
    ]
