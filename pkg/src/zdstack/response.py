"""Attacker best responses and the strong Stackelberg equilibrium."""

from __future__ import annotations

from dataclasses import dataclass, field

import cma
import numpy as np

from .game import DETERMINISTIC_POLICIES, StageGame, batch_utilities
from .validation import CaseMismatchError, InputDomainError, check_strategy

__all__ = [
    "TIE_TOL",
    "CLIP_EPS",
    "POLISH_EPS",
    "BestResponseResult",
    "SSEResult",
    "policy_values",
    "best_response",
    "best_response_batch",
    "best_response_certificate",
    "defender_value_under_br",
    "solve_sse",
    "stage_candidates",
    "sse_value_case2",
]

TIE_TOL = 1e-9
INCUMBENT_TOL = 1e-12
CLIP_EPS = 1e-6
POLISH_EPS = 1e-9


@dataclass(frozen=True)
class BestResponseResult:
    policy: np.ndarray
    attacker_value: float
    defender_value: float
    tied_set: list = field(default_factory=list)
    index: int = -1


@dataclass(frozen=True)
class SSEResult:
    pi_d_sse: np.ndarray
    pi_a_sse: np.ndarray
    u_d_sse: float
    u_a_sse: float
    solver_trace: list = field(default_factory=list)


def policy_values(game: StageGame, pi_d) -> tuple[np.ndarray, np.ndarray]:
    """Defender and attacker values of all 16 deterministic attacker policies.

    ``pi_d`` may be a stack of strategies of shape (..., 4); the result then
    has shape (..., 16).
    """
    p = np.asarray(pi_d, dtype=float)[..., None, :]
    return batch_utilities(game, p, DETERMINISTIC_POLICIES)


def _select(u_d: np.ndarray, u_a: np.ndarray) -> np.ndarray:
    """Index of the best response along the last axis, ties to the defender."""
    best_a = u_a.max(axis=-1, keepdims=True)
    tied = u_a >= best_a - TIE_TOL
    return np.argmax(np.where(tied, u_d, -np.inf), axis=-1)


def best_response_batch(game: StageGame, pi_d) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best-response policy index, defender value and attacker value per strategy."""
    u_d, u_a = policy_values(game, pi_d)
    idx = _select(u_d, u_a)
    take = lambda arr: np.take_along_axis(arr, idx[..., None], axis=-1)[..., 0]
    return idx, take(u_d), take(u_a)


def best_response(game: StageGame, pi_d) -> BestResponseResult:
    """Attacker best response by enumerating the 16 deterministic policies.

    Policies within ``TIE_TOL`` of the best attacker value form the tied set;
    the one giving the defender the most is returned.
    """
    p = check_strategy(pi_d, "pi_d")
    u_d, u_a = policy_values(game, p)
    idx = int(_select(u_d, u_a))
    tied = np.flatnonzero(u_a >= u_a.max() - TIE_TOL)
    return BestResponseResult(
        policy=DETERMINISTIC_POLICIES[idx].copy(),
        attacker_value=float(u_a[idx]),
        defender_value=float(u_d[idx]),
        tied_set=[DETERMINISTIC_POLICIES[i].copy() for i in tied],
        index=idx,
    )


def best_response_certificate(game: StageGame, pi_d, grid_step: float = 0.1) -> float:
    """Largest gain a gridded stochastic attacker gets over the best response.

    Should be at most rounding noise, since a deterministic policy is
    optimal in an average-reward MDP.
    """
    grid_step = float(grid_step)
    if not 0.0 < grid_step <= 0.5:
        raise InputDomainError(f"grid_step must lie in (0, 0.5], got {grid_step}")
    p = check_strategy(pi_d, "pi_d")
    br = best_response(game, p)
    n = int(round(1.0 / grid_step))
    axis = np.unique(np.clip(np.append(np.arange(n + 1) * grid_step, 1.0), 0.0, 1.0))
    grid = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 4)
    _, u_a = batch_utilities(game, p, grid)
    return float(np.max(u_a) - br.attacker_value)


def defender_value_under_br(game: StageGame, pi_d) -> np.ndarray:
    """U_d(pi_d, BR(pi_d)) for a stack of defender strategies."""
    return best_response_batch(game, pi_d)[1]


def _axis(center: float, step: float, half: int, lo: float, hi: float) -> np.ndarray:
    pts = center + step * np.arange(-half, half + 1)
    return np.unique(np.clip(pts, lo, hi))


def _grid(axes) -> np.ndarray:
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)


def _best_index(values: np.ndarray, points: np.ndarray) -> int:
    """Argmax of ``values``; near-ties resolved by the lexicographically smallest point."""
    top = values.max()
    cand = np.flatnonzero(values >= top - INCUMBENT_TOL)
    order = np.lexsort(points[cand].T[::-1])
    return int(cand[order[0]])


def stage_candidates(game: StageGame) -> np.ndarray:
    """State-independent strategies from the one-shot game.

    The pure commitments plus, when it lies in [0, 1], the mix that makes
    the attacker indifferent between the two targets.
    """
    a = game.u_a
    out = [np.ones(4), np.zeros(4)]
    den = (a[0, 0] - a[1, 0]) - (a[0, 1] - a[1, 1])
    if den != 0.0:
        q = (a[1, 1] - a[1, 0]) / den
        if 0.0 <= q <= 1.0:
            out.append(np.full(4, q))
    return np.array(out)


def _class_starts(game: StageGame, points: np.ndarray, n: int) -> np.ndarray:
    """Best grid point of each best-response class, best classes first.

    Every attacker policy carves out the region where it is the best
    response; starting once per region keeps the search from collapsing
    onto a single basin when several regions tie on the grid.
    """
    idx, u_d, _ = best_response_batch(game, points)
    starts, vals = [], []
    for a in np.unique(idx):
        m = np.flatnonzero(idx == a)
        j = m[_best_index(u_d[m], points[m])]
        starts.append(points[j])
        vals.append(u_d[j])
    order = np.lexsort((np.arange(len(vals)), -np.asarray(vals)))
    return np.array(starts)[order[:n]]


def _cma_polish(game, start, lo, seed, max_evals, popsize):
    """CMA-ES on the logit of the strategy, maximising the defender value.

    The logit map lets the search creep towards faces and corners of the
    cube, where equilibria of these games often sit.
    """
    bound = float(np.log(hi_over_lo(lo)))
    x0 = np.clip(np.log(start / (1.0 - start)), -bound, bound)
    es = cma.CMAEvolutionStrategy(
        x0,
        1.0,
        {
            "bounds": [-bound, bound],
            "seed": int(seed) + 1,
            "verbose": -9,
            "popsize": popsize,
            "maxfevals": max_evals,
            "tolfun": 1e-14,
            "tolx": 1e-12,
        },
    )
    best_p, best_v = start, float(defender_value_under_br(game, start[None])[0])
    while not es.stop():
        xs = np.array(es.ask())
        pts = 1.0 / (1.0 + np.exp(-xs))
        vals = defender_value_under_br(game, pts)
        es.tell(list(xs), (-vals).tolist())
        j = int(np.argmax(vals))
        if vals[j] > best_v + INCUMBENT_TOL:
            best_p, best_v = pts[j].copy(), float(vals[j])
    return best_p, best_v


def hi_over_lo(lo: float) -> float:
    return (1.0 - lo) / lo


def solve_sse(
    game: StageGame,
    coarse_step: float = 0.1,
    refine_rounds: int = 6,
    *,
    clip_eps: float = CLIP_EPS,
    extra_candidates=None,
    n_starts: int = 6,
    max_evals: int = 8000,
    seed: int = 0,
) -> SSEResult:
    """Strong Stackelberg equilibrium by grid search with local refinement.

    The coarse grid covers [clip_eps, 1 - clip_eps]^4.  Grid points are
    grouped by the attacker's best response; the best point of each of the
    ``n_starts`` best groups is refined by ``refine_rounds`` rounds
    of a 5^4 neighbourhood search (step halved every round) and then
    polished by a seeded CMA-ES run in logit coordinates, which follows
    curved ridges towards the boundary of the cube; the polish may move to
    within ``POLISH_EPS`` of the faces.  ``extra_candidates`` (for example ZD
    strategies, which often sit on the boundary of the cube) and the
    state-independent strategies from ``stage_candidates`` are evaluated
    unclipped and compete with the refined points.
    """
    game.require_assumption1()
    coarse_step = float(coarse_step)
    if not 0.0 < coarse_step <= 0.5:
        raise InputDomainError(f"coarse_step must lie in (0, 0.5], got {coarse_step}")
    if int(refine_rounds) < 0:
        raise InputDomainError("refine_rounds must be non-negative")
    if int(n_starts) < 1:
        raise InputDomainError("n_starts must be at least 1")
    lo, hi = clip_eps, 1.0 - clip_eps
    n = int(round(1.0 / coarse_step))
    axis = np.unique(np.clip(np.append(np.arange(n + 1) * coarse_step, 1.0), lo, hi))
    grid = _grid([axis] * 4)
    grid_vals = defender_value_under_br(game, grid)
    extras = [stage_candidates(game)]
    if extra_candidates is not None:
        extras.append(np.clip(np.atleast_2d(np.asarray(extra_candidates, dtype=float)), 0.0, 1.0))
    extra = np.vstack(extras)
    extra_vals = defender_value_under_br(game, extra)
    trace = [{"round": 0, "step": coarse_step, "points": len(grid) + len(extra),
              "value": float(max(grid_vals.max(), extra_vals.max()))}]

    starts = _class_starts(game, grid, int(n_starts))
    cands, vals = [extra], [extra_vals]
    for k, p0 in enumerate(starts):
        best_p, best_v = p0.copy(), float(defender_value_under_br(game, p0[None])[0])
        step = coarse_step
        for _ in range(int(refine_rounds)):
            step /= 2.0
            local = _grid([_axis(c, step, 2, lo, hi) for c in best_p])
            lv = defender_value_under_br(game, local)
            j = _best_index(lv, local)
            if lv[j] > best_v + INCUMBENT_TOL:
                best_p, best_v = local[j].copy(), float(lv[j])
        if max_evals > 0:
            cp, cv = _cma_polish(game, best_p, min(lo, POLISH_EPS), seed + k, int(max_evals), 32)
            if cv > best_v + INCUMBENT_TOL:
                best_p, best_v = cp, cv
        trace.append({"round": k + 1, "start": p0.tolist(), "value": best_v})
        cands.append(best_p[None])
        vals.append(np.array([best_v]))
    points, values = np.vstack(cands), np.concatenate(vals)
    i = _best_index(values, points)
    br = best_response(game, points[i])
    return SSEResult(
        pi_d_sse=points[i].copy(),
        pi_a_sse=br.policy,
        u_d_sse=br.defender_value,
        u_a_sse=br.attacker_value,
        solver_trace=trace,
    )


def sse_value_case2(game: StageGame) -> float:
    """Closed-form SSE defender value when U11^d < U22^d and U11^a >= U21^a."""
    d, a = game.u_d, game.u_a
    if not d[0, 0] < d[1, 1]:
        raise CaseMismatchError("sse_value_case2 requires U11^d < U22^d")
    if not a[0, 0] >= a[1, 0]:
        raise CaseMismatchError("sse_value_case2 requires U11^a >= U21^a")
    return float((a[1, 0] - a[0, 0]) * (d[1, 1] - d[0, 0]) / (a[1, 1] - a[0, 0]) + d[0, 0])
