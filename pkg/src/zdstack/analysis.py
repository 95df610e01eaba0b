"""ZD versus SSE defenders against a boundedly rational attacker.

The attacker plays ``lam * BR(pi_d) + (1 - lam) * stubborn``.  Because the
determinant is quadratic in the attacker strategy, the cross-multiplied
utility gap

    Delta(lam) = D(sse, mix, S^d) D(zd, mix, 1) - D(zd, mix, S^d) D(sse, mix, 1)

is a quartic in ``lam``.  Its interior Bernstein terms form the remainder
``g`` and the constants ``B1, B2, B3`` bound them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .game import (
    DETERMINISTIC_POLICIES,
    StageGame,
    batch_utilities,
    check_stubborn,
    mixture_strategy,
    press_dyson_cofactors,
    stubborn_utilities,
)
from .response import SSEResult, best_response, best_response_batch
from .validation import DegenerateError, InputDomainError, check_lambda, check_strategy

__all__ = [
    "C_TOL",
    "C_FLAG_TOL",
    "AnalysisConstants",
    "RegimeReport",
    "DecompositionTerms",
    "j_value",
    "c_value",
    "d_one",
    "a_constant",
    "decomposition",
    "remainder_g",
    "compute_constants",
    "gamma_membership",
    "h_bound",
    "corollary_check",
    "compare_zd_sse",
]

C_TOL = 1e-12
C_FLAG_TOL = 1e-6


@dataclass(frozen=True)
class AnalysisConstants:
    """Constants entering the regime inequalities.

    ``b1``, ``b2``, ``b3`` are the magnitudes of the lam^3(1-lam),
    lam(1-lam)^3 and lam^2(1-lam)^2 terms of ``g``; ``b1_printed`` and
    ``b3_printed`` keep the alternative expressions without cross terms.
    ``certified`` marks constants maximised over a perturbation sweep.
    """

    a_const: float
    b1: float
    b2: float
    b3: float
    b_const: float
    d_one: float
    b1_printed: float = float("nan")
    b3_printed: float = float("nan")
    certified: bool = False


@dataclass(frozen=True)
class RegimeReport:
    lam: float
    in_gamma1: bool
    in_gamma2: bool
    h_bound: Optional[float]
    u_d_zd: float
    u_d_sse_mix: float
    gap: float
    in_gamma1_nominal: bool = False
    in_gamma2_nominal: bool = False
    h_nominal: Optional[float] = None
    c_value: float = float("nan")
    c_flag: bool = False


@dataclass(frozen=True)
class DecompositionTerms:
    """Per-strategy determinants: pure BR (``a``), pure stubborn (``b``) and J."""

    a_one: np.ndarray
    a_s: np.ndarray
    b_one: np.ndarray
    b_s: np.ndarray
    j_one: np.ndarray
    j_s: np.ndarray


def _det(p, q1, q2, f) -> np.ndarray:
    return press_dyson_cofactors(p, q1, q2) @ np.asarray(f, dtype=float)


def j_value(pi_d, br, pi_a, f) -> float:
    """J(pi_d, pi_a, f) = D(pi_d, BR, pi_a, f) + D(pi_d, pi_a, BR, f)."""
    return float(_det(pi_d, br, pi_a, f) + _det(pi_d, pi_a, br, f))


def c_value(zd, br_zd, sse, br_sse, stubborn, lam: float) -> float:
    """C = D(zd, mix_zd, 1) * D(sse, mix_sse, 1)."""
    one = np.ones(4)
    mz = lam * np.asarray(br_zd) + (1 - lam) * np.asarray(stubborn)
    ms = lam * np.asarray(br_sse) + (1 - lam) * np.asarray(stubborn)
    return float(_det(zd, mz, mz, one) * _det(sse, ms, ms, one))


def d_one() -> float:
    """max D(pi_d, pi_a1, pi_a2, 1) over all strategy triples.

    The determinant is affine in each of the twelve probabilities, so the
    maximum is attained on the 4096 deterministic triples.
    """
    pol = DETERMINISTIC_POLICIES
    p = pol[:, None, None, :]
    q1 = pol[None, :, None, :]
    q2 = pol[None, None, :, :]
    return float(press_dyson_cofactors(p, q1, q2).sum(axis=-1).max())


def a_constant(game: StageGame, pi_sse) -> float:
    """U11^d minus the stubborn-attacker value of ``pi_sse`` (0 when absorbed at 11)."""
    r = stubborn_utilities(game, pi_sse)
    return 0.0 if r.degenerate else float(game.u_d[0, 0] - r.u_d)


def decomposition(game: StageGame, pi_d, stubborn, br=None) -> DecompositionTerms:
    """Determinant pieces of D(pi_d, lam*BR + (1-lam)*stubborn, f) for f in {1, S^d}.

    Vectorised over a stack of defender strategies; ``br`` defaults to the
    best response of each.
    """
    p = np.asarray(pi_d, dtype=float)
    if br is None:
        br = DETERMINISTIC_POLICIES[best_response_batch(game, p)[0]]
    br = np.broadcast_to(np.asarray(br, dtype=float), p.shape)
    st = np.broadcast_to(np.asarray(stubborn, dtype=float), p.shape)
    f = np.stack([np.ones(4), game.s_d], axis=-1)  # (4, 2)
    a = press_dyson_cofactors(p, br) @ f
    b = press_dyson_cofactors(p, st) @ f
    j = (press_dyson_cofactors(p, br, st) + press_dyson_cofactors(p, st, br)) @ f
    return DecompositionTerms(a[..., 0], a[..., 1], b[..., 0], b[..., 1], j[..., 0], j[..., 1])


def _bernstein(x_b, x_j, x_a):
    """Degree-2 Bernstein coefficients of lam^2 a + (1-lam)^2 b + lam(1-lam) j."""
    return x_b, 0.5 * x_j, x_a


def _terms(sse: DecompositionTerms, zd: DecompositionTerms):
    """Coefficients T_k of lam^k (1-lam)^(4-k) in Delta(lam), k = 0..4.

    Broadcasts ``sse`` terms against ``zd`` terms.
    """
    s_s = _bernstein(sse.b_s, sse.j_s, sse.a_s)
    s_1 = _bernstein(sse.b_one, sse.j_one, sse.a_one)
    z_s = _bernstein(zd.b_s, zd.j_s, zd.a_s)
    z_1 = _bernstein(zd.b_one, zd.j_one, zd.a_one)
    binom = (1.0, 2.0, 1.0)
    out = []
    for k in range(5):
        acc = 0.0
        for i in range(3):
            j = k - i
            if 0 <= j <= 2:
                w = binom[i] * binom[j]
                acc = acc + w * (s_s[i] * z_1[j] - z_s[i] * s_1[j])
        out.append(acc)
    return out


def remainder_g(game: StageGame, sse_pi, zd_pi, stubborn, lam, br_sse=None, br_zd=None):
    """The remainder g(lam) = lam^4 Delta(1) + (1-lam)^4 Delta(0) - Delta(lam).

    Returns ``(g, Delta(lam), (B1, B2, B3))`` for the given pair; computed
    from the exact quartic, so it includes every cross term.
    """
    lam = np.asarray(lam, dtype=float)
    t = _terms(decomposition(game, sse_pi, stubborn, br_sse), decomposition(game, zd_pi, stubborn, br_zd))
    mu = 1.0 - lam
    delta = sum(t[k] * lam**k * mu ** (4 - k) for k in range(5))
    g = t[4] * lam**4 + t[0] * mu**4 - delta
    return g, delta, (abs(t[3]), abs(t[1]), abs(t[2]))


def _printed_b(sse: DecompositionTerms, zd: DecompositionTerms):
    b1p = 0.5 * np.maximum(
        np.abs(zd.a_s * sse.j_one - sse.a_s * zd.j_one),
        np.abs(zd.a_s * sse.j_s - sse.a_s * zd.j_s),
    )
    b3p = np.abs(zd.j_s * sse.j_one - sse.j_s * zd.j_one)
    return b1p, b3p


def _perturbations(center: np.ndarray, step: float) -> np.ndarray:
    offs = np.array(sorted({-step, -step / 2, 0.0, step / 2, step}))
    pts = np.array([center + np.array(d) for d in product(offs, repeat=4)])
    return np.unique(np.clip(pts, 0.0, 1.0), axis=0)


def compute_constants(
    game: StageGame,
    sse: SSEResult,
    zd,
    stubborn,
    max_grid_step: Optional[float] = 0.1,
) -> AnalysisConstants:
    """Constants A, B1-B3, B and D(1).

    With ``max_grid_step=None`` the B constants are evaluated at the given
    SSE and ZD strategies only (nominal).  Otherwise each strategy is also
    perturbed on the grid {0, +-step/2, +-step}^4 and the maxima over all
    pairs are taken (certified).
    """
    st = check_stubborn(stubborn)
    zd = check_strategy(zd, "zd")
    ps = sse.pi_d_sse
    if max_grid_step is None:
        s_pts, z_pts = ps[None, :], zd[None, :]
    else:
        step = float(max_grid_step)
        if not 0.0 < step <= 0.5:
            raise InputDomainError(f"max_grid_step must lie in (0, 0.5], got {step}")
        s_pts, z_pts = _perturbations(ps, step), _perturbations(zd, step)
    s_terms = decomposition(game, s_pts, st)
    z_terms = decomposition(game, z_pts, st)
    # pair every SSE perturbation with every ZD perturbation
    s_b = DecompositionTerms(*[x[:, None] for x in vars(s_terms).values()])
    z_b = DecompositionTerms(*[x[None, :] for x in vars(z_terms).values()])
    t = _terms(s_b, z_b)
    b1, b2, b3 = (float(np.max(np.abs(t[k]))) for k in (3, 1, 2))
    b1p, b3p = (float(np.max(x)) for x in _printed_b(s_b, z_b))
    return AnalysisConstants(
        a_const=a_constant(game, ps),
        b1=b1,
        b2=b2,
        b3=b3,
        b_const=max(b1, b2, 0.5 * b3),
        d_one=d_one(),
        b1_printed=b1p,
        b3_printed=b3p,
        certified=max_grid_step is not None,
    )


def _gamma_polys(constants: AnalysisConstants, u_d_sse: float, u12_d: float, lam: float):
    mu = 1.0 - lam
    a, b, d1 = constants.a_const, constants.b_const, constants.d_one
    g1 = (u_d_sse - u12_d) * d1 * lam**4 - a * mu**4 - b * lam * mu
    g2 = (u12_d - u_d_sse) * d1 * lam**4 + a * mu**4 - b * lam * mu
    return g1, g2


def gamma_membership(
    constants: AnalysisConstants, u_d_sse: float, u12_d: float, lam: float
) -> tuple[bool, bool]:
    """Membership of ``lam`` in the two regime sets, by the quartic inequalities."""
    lam = check_lambda(lam)
    g1, g2 = _gamma_polys(constants, u_d_sse, u12_d, lam)
    return bool(g1 >= 0.0), bool(g2 >= 0.0)


def _br_pair(game, sse_pi, zd):
    return best_response(game, sse_pi).policy, best_response(game, zd).policy


def h_bound(
    game: StageGame,
    sse: SSEResult,
    zd,
    stubborn,
    lam: float,
    constants: Optional[AnalysisConstants] = None,
) -> float:
    """Upper bound H on the SSE-minus-ZD gap at ``lam``.

    Raises ``DegenerateError`` when |C(lam)| < 1e-12.
    """
    lam = check_lambda(lam)
    st = check_stubborn(stubborn)
    zd = check_strategy(zd, "zd")
    if constants is None:
        constants = compute_constants(game, sse, zd, st)
    br_s, br_z = _br_pair(game, sse.pi_d_sse, zd)
    return _h(constants, game, sse, zd, br_z, br_s, st, lam)


def _h(constants, game, sse, zd, br_z, br_s, st, lam):
    c_lam = c_value(zd, br_z, sse.pi_d_sse, br_s, st, lam)
    if abs(c_lam) < C_TOL:
        raise DegenerateError(f"C({lam}) = {c_lam:.3e} is too close to zero for the bound")
    c_one = c_value(zd, br_z, sse.pi_d_sse, br_s, st, 1.0)
    u12_d = float(game.u_d[0, 1])
    mu = 1.0 - lam
    num = (
        (sse.u_d_sse - u12_d) * c_one * lam**4
        - constants.a_const * mu**4
        + constants.b_const * lam * mu
    )
    return float(num / c_lam)


def corollary_check(
    constants: AnalysisConstants,
    game: StageGame,
    sse: SSEResult,
    lam: float,
    which: str,
    *,
    alternate: bool = False,
) -> bool:
    """Sufficient conditions ``cor1`` (lam in [1/2, 1]) and ``cor2`` (lam in [0, 1/2]).

    ``cor2`` compares with U12^a as printed; ``alternate=True`` uses U12^d.
    """
    lam = float(lam)
    u_sse = sse.u_d_sse
    b, d1 = constants.b_const, constants.d_one
    if which == "cor1":
        check_lambda(lam, 0.5, 1.0)
        p = sse.pi_d_sse
        leave, enter = 1.0 - p[0], p[2]
        lhs = 4.0 * (game.u_d[0, 0] - game.u_d[1, 0]) * leave * (1.0 - lam) ** 4
        rhs = (0.25 * (u_sse - game.u_d[0, 1]) * d1 - b) * (leave + enter)
        return bool(lhs <= rhs)
    if which == "cor2":
        check_lambda(lam, 0.0, 0.5)
        u12 = game.u_d[0, 1] if alternate else game.u_a[0, 1]
        return bool(4.0 * (u_sse - u12) * d1 * lam**4 <= 0.25 * constants.a_const - b)
    raise InputDomainError(f"which must be 'cor1' or 'cor2', got {which!r}")


def compare_zd_sse(
    game: StageGame,
    sse: SSEResult,
    zd,
    stubborn,
    lambda_grid: Sequence[float],
    *,
    constants: Optional[AnalysisConstants] = None,
    nominal: Optional[AnalysisConstants] = None,
) -> list[RegimeReport]:
    """Regime report for every ``lam`` in ``lambda_grid``.

    Membership and H use the certified constants; the nominal (point)
    versions are reported alongside.
    """
    st = check_stubborn(stubborn)
    zd = check_strategy(zd, "zd")
    lams = [check_lambda(x) for x in lambda_grid]
    if not lams:
        return []
    if constants is None:
        constants = compute_constants(game, sse, zd, st)
    if nominal is None:
        nominal = compute_constants(game, sse, zd, st, max_grid_step=None)
    br_s, br_z = _br_pair(game, sse.pi_d_sse, zd)
    mix_z = np.array([mixture_strategy(br_z, st, x) for x in lams])
    mix_s = np.array([mixture_strategy(br_s, st, x) for x in lams])
    u_zd, _ = batch_utilities(game, zd, mix_z)
    u_ss, _ = batch_utilities(game, sse.pi_d_sse, mix_s)
    u12_d = float(game.u_d[0, 1])
    out = []
    for lam, uz, us in zip(lams, u_zd, u_ss):
        g1, g2 = gamma_membership(constants, sse.u_d_sse, u12_d, lam)
        n1, n2 = gamma_membership(nominal, sse.u_d_sse, u12_d, lam)
        c_lam = c_value(zd, br_z, sse.pi_d_sse, br_s, st, lam)
        h = hn = None
        if abs(c_lam) >= C_TOL:
            h = _h(constants, game, sse, zd, br_z, br_s, st, lam)
            hn = _h(nominal, game, sse, zd, br_z, br_s, st, lam)
        out.append(
            RegimeReport(
                lam=lam,
                in_gamma1=g1,
                in_gamma2=g2,
                h_bound=h,
                u_d_zd=float(uz),
                u_d_sse_mix=float(us),
                gap=float(us - uz),
                in_gamma1_nominal=n1,
                in_gamma2_nominal=n2,
                h_nominal=hn,
                c_value=c_lam,
                c_flag=abs(c_lam) < C_FLAG_TOL,
            )
        )
    return out
