"""Stage game, memory-one strategies and long-run average utilities.

States are the previous joint action ``(d, a)`` and are always ordered
``11, 12, 21, 22``.  A memory-one strategy is a length-4 array holding the
probability of playing action 1 in each state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .validation import (
    PROB_TOL,
    AssumptionError,
    InputDomainError,
    check_f_vector,
    check_lambda,
    check_payoff_matrix,
    check_strategy,
)

__all__ = [
    "STATES",
    "ROUTES",
    "DET_SWITCH",
    "PERTURB_EPS",
    "DETERMINISTIC_POLICIES",
    "HAT_PI",
    "StageGame",
    "MarkovChain",
    "UtilityPair",
    "build_chain",
    "closed_classes",
    "stationary_distribution",
    "press_dyson_matrix",
    "press_dyson_det",
    "press_dyson_cofactors",
    "long_run_utilities",
    "batch_utilities",
    "perturbed_utilities",
    "stubborn_utilities",
    "check_stubborn",
    "mixture_strategy",
]

STATES = ("11", "12", "21", "22")
ROUTES = ("stationary", "determinant", "stubborn-closed-form", "perturbed-limit")

# |D(pi_d, pi_a, 1)| at or below this switches away from the determinant ratio.
DET_SWITCH = 1e-9
PERTURB_EPS = 1e-8
# outflows below this count as zero in state reduction; keeps the
# back-substitution finite when probabilities are subnormal
GTH_FLOOR = 1e-100

# All 16 deterministic memory-one policies as action-1 probabilities, in
# lexicographic order of (a(11), a(12), a(21), a(22)) with action 1 first.
DETERMINISTIC_POLICIES = np.array(
    [[1.0 if a == 1 else 0.0 for a in acts] for acts in product((1, 2), repeat=4)]
)

HAT_PI = np.array([1.0, 1.0, 0.0, 0.0])
_ROW_SHIFT_D = HAT_PI  # column 2 of the Press-Dyson matrix subtracts [1,1,0,0]
_ROW_SHIFT_A = np.array([1.0, 0.0, 1.0, 0.0])  # column 3 subtracts [1,0,1,0]
_E11 = np.array([1.0, 0.0, 0.0, 0.0])
_COF_SIGN = np.array([-1.0, 1.0, -1.0, 1.0])


@dataclass(frozen=True)
class StageGame:
    """Two-target stage game.

    ``u_d[i, j]`` and ``u_a[i, j]`` are the defender's and attacker's payoffs
    when the defender protects target ``i + 1`` and the attacker hits
    target ``j + 1``.
    """

    u_d: np.ndarray
    u_a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_d", check_payoff_matrix(self.u_d, "u_d"))
        object.__setattr__(self, "u_a", check_payoff_matrix(self.u_a, "u_a"))
        self.u_d.setflags(write=False)
        self.u_a.setflags(write=False)

    @classmethod
    def from_vectors(cls, s_d, s_a) -> "StageGame":
        return cls(np.reshape(s_d, (2, 2)), np.reshape(s_a, (2, 2)))

    @property
    def s_d(self) -> np.ndarray:
        """Defender payoffs in state order (U11, U12, U21, U22)."""
        return self.u_d.ravel()

    @property
    def s_a(self) -> np.ndarray:
        return self.u_a.ravel()

    def point(self, state: str) -> tuple[float, float]:
        """Payoff pair (U_d, U_a) of a joint action such as ``"21"``."""
        i, j = int(state[0]) - 1, int(state[1]) - 1
        return float(self.u_d[i, j]), float(self.u_a[i, j])

    def assumption1_violations(self) -> list[str]:
        d, a = self.u_d, self.u_a
        out = []
        if not min(d[0, 0], d[1, 1]) > max(d[0, 1], d[1, 0]):
            out.append("min{U11^d, U22^d} > max{U12^d, U21^d}")
        if not a[0, 0] < a[0, 1]:
            out.append("U11^a < U12^a")
        if not a[1, 1] < a[1, 0]:
            out.append("U22^a < U21^a")
        return out

    @property
    def satisfies_assumption1(self) -> bool:
        return not self.assumption1_violations()

    def require_assumption1(self) -> None:
        bad = self.assumption1_violations()
        if bad:
            raise AssumptionError("stage game violates: " + "; ".join(bad))


@dataclass(frozen=True)
class MarkovChain:
    """Row-stochastic state transition matrix, optionally with its generators."""

    m: np.ndarray
    pi_d: Optional[np.ndarray] = None
    pi_a: Optional[np.ndarray] = None


@dataclass(frozen=True)
class UtilityPair:
    u_d: float
    u_a: float
    route: str
    degenerate: bool = field(default=False)


def build_chain(pi_d, pi_a) -> MarkovChain:
    """Transition matrix induced by a pair of memory-one strategies."""
    p = check_strategy(pi_d, "pi_d")
    q = check_strategy(pi_a, "pi_a")
    pd = np.stack([p, 1.0 - p], axis=1)  # (state, defender action)
    pa = np.stack([q, 1.0 - q], axis=1)
    m = (pd[:, :, None] * pa[:, None, :]).reshape(4, 4)
    return MarkovChain(m=m, pi_d=p, pi_a=q)


def closed_classes(m: np.ndarray) -> list[tuple[int, ...]]:
    """Recurrent (closed communicating) classes of a chain, from its support."""
    adj = np.asarray(m) > 0.0
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    out = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        leaves = adj[members][:, labels != c].any()
        if not leaves:
            out.append(tuple(int(i) for i in members))
    return out


def _gth(m: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman state reduction for a chain with one closed class.

    Subtraction-free, so it stays accurate for nearly decomposable chains.
    """
    a = np.array(m, dtype=float)
    n = a.shape[0]
    pivots = np.zeros(n)
    start = 0
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if s <= GTH_FLOOR:
            # k is absorbing in the censored chain on {0..k}; lower states are transient
            start = k
            break
        pivots[k] = s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k]) / s
    v = np.zeros(n)
    v[start] = 1.0
    for j in range(start + 1, n):
        v[j] = v[:j] @ a[:j, j] / pivots[j]
    return v / v.sum()


def _mix_uniform(p: np.ndarray, eps: float) -> np.ndarray:
    return (1.0 - eps) * p + 0.5 * eps


def stationary_distribution(chain: MarkovChain, *, with_route: bool = False):
    """Long-run state distribution of ``chain``.

    Chains with a single closed class are solved directly.  Otherwise the
    result is the small-noise limit: each generating strategy is mixed with
    the uniform strategy at rate ``PERTURB_EPS`` (or the matrix itself with
    the uniform matrix when no generators are attached), and the limit is
    taken by Richardson extrapolation from ``eps`` and ``2 * eps``.
    """
    m = np.asarray(chain.m, dtype=float)
    if len(closed_classes(m)) == 1:
        v, route = _gth(m), "stationary"
    else:
        def solve(eps):
            if chain.pi_d is not None and chain.pi_a is not None:
                mm = build_chain(_mix_uniform(chain.pi_d, eps), _mix_uniform(chain.pi_a, eps)).m
            else:
                mm = (1.0 - eps) * m + eps / 4.0
            return _gth(mm)

        v = 2.0 * solve(PERTURB_EPS) - solve(2.0 * PERTURB_EPS)
        v = np.clip(v, 0.0, None)
        v /= v.sum()
        route = "perturbed-limit"
    return (v, route) if with_route else v


def press_dyson_matrix(pi_d, pi_a1, pi_a2, f) -> np.ndarray:
    """The 4x4 matrix whose determinant is D(pi_d, pi_a1, pi_a2, f).

    ``pi_a2`` enters the first column through the joint probability and
    ``pi_a1`` the third column on its own.
    """
    p = check_strategy(pi_d, "pi_d")
    q1 = check_strategy(pi_a1, "pi_a1")
    q2 = check_strategy(pi_a2, "pi_a2")
    f = check_f_vector(f)
    return np.column_stack([p * q2 - _E11, p - _ROW_SHIFT_D, q1 - _ROW_SHIFT_A, f])


def press_dyson_det(pi_d, pi_a1, pi_a2=None, f=None) -> float:
    """D(pi_d, pi_a1, pi_a2, f).

    Called as ``press_dyson_det(pi_d, pi_a, f=f)`` it evaluates the
    two-strategy form D(pi_d, pi_a, f) = D(pi_d, pi_a, pi_a, f).
    """
    if f is None:
        raise TypeError("press_dyson_det requires f")
    if pi_a2 is None:
        pi_a2 = pi_a1
    return float(np.linalg.det(press_dyson_matrix(pi_d, pi_a1, pi_a2, f)))


def _det3(a: np.ndarray) -> np.ndarray:
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


_MINOR_ROWS = np.array([[r for r in range(4) if r != i] for i in range(4)])


def press_dyson_cofactors(pi_d, pi_a1, pi_a2=None) -> np.ndarray:
    """Cofactors of the f-column, so that D(..., f) = cofactors @ f.

    Broadcasts over leading dimensions; inputs are not validated.
    """
    p = np.asarray(pi_d, dtype=float)
    q1 = np.asarray(pi_a1, dtype=float)
    q2 = q1 if pi_a2 is None else np.asarray(pi_a2, dtype=float)
    p, q1, q2 = np.broadcast_arrays(p, q1, q2)
    cols = np.stack([p * q2 - _E11, p - _ROW_SHIFT_D, q1 - _ROW_SHIFT_A], axis=-1)
    minors = cols[..., _MINOR_ROWS, :]  # (..., 4, 3, 3)
    return _COF_SIGN * _det3(minors)


def perturbed_utilities(game: StageGame, pi_d, pi_a, eps: float = PERTURB_EPS) -> UtilityPair:
    """Small-noise limit of the utilities, both strategies mixed with uniform."""
    p = check_strategy(pi_d, "pi_d")
    q = check_strategy(pi_a, "pi_a")

    def at(e):
        v = _gth(build_chain(_mix_uniform(p, e), _mix_uniform(q, e)).m)
        return v @ game.s_d, v @ game.s_a

    (d1, a1), (d2, a2) = at(eps), at(2.0 * eps)
    return UtilityPair(2.0 * d1 - d2, 2.0 * a1 - a2, "perturbed-limit")


def long_run_utilities(game: StageGame, pi_d, pi_a, route: str = "auto") -> UtilityPair:
    """Long-run average utilities of both players.

    ``route="auto"`` uses the determinant ratio when |D(pi_d, pi_a, 1)|
    exceeds ``DET_SWITCH`` and the stationary distribution (or its
    small-noise limit for chains with several closed classes) otherwise.
    ``"determinant"`` and ``"stationary"`` force a route; a forced
    stationary route still falls back to the limit when it must.
    """
    p = check_strategy(pi_d, "pi_d")
    q = check_strategy(pi_a, "pi_a")
    if route not in ("auto", "determinant", "stationary"):
        raise InputDomainError(f"unknown route {route!r}")
    if route != "stationary":
        cof = press_dyson_cofactors(p, q)
        d1 = cof.sum()
        if route == "determinant" or abs(d1) > DET_SWITCH:
            return UtilityPair(float(cof @ game.s_d / d1), float(cof @ game.s_a / d1), "determinant")
    chain = build_chain(p, q)
    if len(closed_classes(chain.m)) == 1:
        v = _gth(chain.m)
        return UtilityPair(float(v @ game.s_d), float(v @ game.s_a), "stationary")
    return perturbed_utilities(game, p, q)


def _chain_batch(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    pd = np.stack([p, 1.0 - p], axis=-1)
    pa = np.stack([q, 1.0 - q], axis=-1)
    m = pd[..., :, :, None] * pa[..., :, None, :]
    return m.reshape(m.shape[:-2] + (4,))


def _unichain_batch(m: np.ndarray) -> np.ndarray:
    """True where the chain has exactly one closed class."""
    adj = (m > 0.0) | np.eye(4, dtype=bool)
    reach = adj.copy()
    for _ in range(2):
        reach = (reach.astype(np.int8) @ reach.astype(np.int8)) > 0
    mutual = reach & np.swapaxes(reach, -1, -2)
    # a state is recurrent when everything it reaches can reach it back
    recurrent = np.all(~reach | mutual, axis=-1)
    rep = np.argmax(mutual, axis=-1)
    rep = np.where(recurrent, rep, -1)
    first = np.max(rep, axis=-1, keepdims=True)
    return np.all((rep == -1) | (rep == first), axis=-1)


def _gth_batch(m: np.ndarray) -> np.ndarray:
    """``_gth`` vectorised over leading dimensions."""
    a = np.array(m, dtype=float)
    batch = a.shape[:-2]
    pivots = np.ones(batch + (4,))
    start = np.zeros(batch, dtype=int)
    live = np.ones(batch, dtype=bool)
    for k in range(3, 0, -1):
        s = a[..., k, :k].sum(axis=-1)
        stop = live & (s <= GTH_FLOOR)
        start = np.where(stop, k, start)
        live = live & ~stop
        safe = np.where(live, s, 1.0)
        pivots[..., k] = safe
        upd = a[..., :k, k, None] * a[..., k, None, :k] / safe[..., None, None]
        a[..., :k, :k] += np.where(live[..., None, None], upd, 0.0)
    v = np.zeros(batch + (4,))
    v[..., 0] = (start == 0).astype(float)
    for j in range(1, 4):
        val = np.einsum("...i,...i->...", v[..., :j], a[..., :j, j]) / pivots[..., j]
        v[..., j] = np.where(start == j, 1.0, np.where(start < j, val, 0.0))
    return v / v.sum(axis=-1, keepdims=True)


def batch_utilities(game: StageGame, pi_d, pi_a) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``long_run_utilities`` over broadcast stacks of strategies.

    Follows the same routing as the scalar function; inputs are assumed
    valid.
    """
    p, q = np.broadcast_arrays(np.asarray(pi_d, float), np.asarray(pi_a, float))
    cof = press_dyson_cofactors(p, q)
    d1 = cof.sum(axis=-1)
    small = np.abs(d1) <= DET_SWITCH
    safe = np.where(small, 1.0, d1)
    u_d = (cof @ game.s_d) / safe
    u_a = (cof @ game.s_a) / safe
    if small.any():
        ps, qs = p[small], q[small]
        n = len(ps)
        m = _chain_batch(ps, qs)
        uni = _unichain_batch(m)
        stacked = np.concatenate(
            [
                m,
                _chain_batch(_mix_uniform(ps, PERTURB_EPS), _mix_uniform(qs, PERTURB_EPS)),
                _chain_batch(_mix_uniform(ps, 2 * PERTURB_EPS), _mix_uniform(qs, 2 * PERTURB_EPS)),
            ]
        )
        vs = _gth_batch(stacked)
        v = np.where(uni[:, None], vs[:n], 2.0 * vs[n : 2 * n] - vs[2 * n :])
        u_d[small] = v @ game.s_d
        u_a[small] = v @ game.s_a
    return u_d, u_a


def check_stubborn(stubborn) -> np.ndarray:
    s = check_strategy(stubborn, "stubborn")
    if abs(s[0] - 1.0) > PROB_TOL or abs(s[2] - 1.0) > PROB_TOL:
        raise InputDomainError(
            f"stubborn strategy must attack target 1 in states 11 and 21, got {s}"
        )
    return s


def stubborn_utilities(game: StageGame, pi_d, stubborn=None) -> UtilityPair:
    """Closed-form utilities against an attacker that keeps hitting target 1.

    Only the defender's behaviour in states 11 and 21 matters.  When the
    defender never leaves state 11 and never leaves state 21 the weights are
    undefined and the pair (U11^d, U11^a) is returned, flagged degenerate.
    """
    p = check_strategy(pi_d, "pi_d")
    if stubborn is not None:
        check_stubborn(stubborn)
    leave_11 = 1.0 - p[0]  # pi_d(2|11)
    enter_11 = p[2]  # pi_d(1|21)
    denom = leave_11 + enter_11
    if denom <= 0.0:
        return UtilityPair(
            float(game.u_d[0, 0]), float(game.u_a[0, 0]), "stubborn-closed-form", degenerate=True
        )
    w11, w21 = enter_11 / denom, leave_11 / denom
    return UtilityPair(
        float(w11 * game.u_d[0, 0] + w21 * game.u_d[1, 0]),
        float(w11 * game.u_a[0, 0] + w21 * game.u_a[1, 0]),
        "stubborn-closed-form",
    )


def mixture_strategy(br, stubborn, lam: float) -> np.ndarray:
    """Boundedly rational attacker: lam * br + (1 - lam) * stubborn."""
    lam = check_lambda(lam)
    return lam * check_strategy(br, "br") + (1.0 - lam) * check_strategy(stubborn, "stubborn")
