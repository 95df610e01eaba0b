"""Learning attackers in the repeated game: fictitious play and average-reward Q-learning.

Randomness comes from two Philox streams per run, one for the defender and
one for the attacker, each seeded by ``SeedSequence([seed, role])``.  Every
stage consumes exactly one defender draw and two attacker draws, so the
streams stay aligned whatever branch the attacker takes.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .game import DETERMINISTIC_POLICIES, StageGame, check_stubborn
from .response import best_response_batch
from .validation import InputDomainError, check_lambda, check_strategy

__all__ = [
    "LEARNERS",
    "EXPLORATION_MODES",
    "GENERATOR",
    "SimulationConfig",
    "Trajectory",
    "SweepRow",
    "make_streams",
    "cell_seed",
    "log_indices",
    "run_fictitious_play",
    "run_q_learning",
    "simulate",
    "sweep_lambda",
]

LEARNERS = ("fictitious-play", "q-learning")
EXPLORATION_MODES = ("stubborn", "uniform")
GENERATOR = "numpy.random.Philox keyed by SeedSequence([seed, role]); role 0 defender, 1 attacker"
_FULL_LOG = 1000
_LOG_EVERY = 100


@dataclass(frozen=True)
class SimulationConfig:
    """Settings for one learning run.

    ``exploration="stubborn"`` plays the stubborn action when not greedy;
    ``"uniform"`` picks a uniformly random action instead.  Fictitious play
    recomputes its best response at most every ``br_refresh`` stages
    (1 means whenever the estimate changes).
    """

    horizon: int = 100_000
    seed: int = 0
    lam: float = 0.5
    stubborn: tuple = (1.0, 0.5, 1.0, 0.5)
    learner: str = "fictitious-play"
    eps1: float = 0.1
    eps2: float = 0.01
    exploration: str = "stubborn"
    initial_state: int = 0
    br_refresh: int = 1

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise InputDomainError("horizon must be at least 1")
        check_lambda(self.lam)
        check_stubborn(self.stubborn)
        if self.learner not in LEARNERS:
            raise InputDomainError(f"learner must be one of {LEARNERS}, got {self.learner!r}")
        for name in ("eps1", "eps2"):
            v = float(getattr(self, name))
            if not 0.0 < v <= 1.0:
                raise InputDomainError(f"{name} must lie in (0, 1], got {v}")
        if self.exploration not in EXPLORATION_MODES:
            raise InputDomainError(f"exploration must be one of {EXPLORATION_MODES}")
        if self.initial_state not in range(4):
            raise InputDomainError("initial_state must be a state index 0..3")
        if int(self.br_refresh) < 1:
            raise InputDomainError("br_refresh must be at least 1")


@dataclass
class Trajectory:
    """Result of a run.  Logged arrays follow ``log_indices``; stages count from 1."""

    stage: np.ndarray
    state: np.ndarray
    d_action: np.ndarray
    a_action: np.ndarray
    r_d: np.ndarray
    r_a: np.ndarray
    u_d: np.ndarray
    u_a: np.ndarray
    final_u_d: float
    final_u_a: float
    pi_hat: Optional[np.ndarray] = None
    q_table: Optional[np.ndarray] = None
    r_bar: Optional[float] = None
    joint_counts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    generator: str = GENERATOR


@dataclass(frozen=True)
class SweepRow:
    label: str
    lam: float
    learner: str
    seed: int
    u_d: float
    u_a: float


def make_streams(seed: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Pre-drawn uniforms: defender (T,) and attacker (T, 2)."""
    def gen(role):
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), role])))

    return gen(0).random(horizon), gen(1).random((horizon, 2))


def cell_seed(seed: int, label: str, lam: float) -> int:
    """Stable per-cell seed derived from (seed, label, lam)."""
    key = f"{int(seed)}|{label}|{float(lam)!r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def log_indices(horizon: int) -> np.ndarray:
    """Stages kept in the log: all up to 1000, then every 100th, plus the last."""
    head = np.arange(1, min(horizon, _FULL_LOG) + 1)
    tail = np.arange(_FULL_LOG + _LOG_EVERY, horizon + 1, _LOG_EVERY)
    idx = np.concatenate([head, tail])
    if idx[-1] != horizon:
        idx = np.append(idx, horizon)
    return idx


def _finish(game: StageGame, states: np.ndarray, initial_state: int, **extra) -> Trajectory:
    """Running averages from exact joint-action counts."""
    horizon = len(states)
    onehot = np.zeros((horizon, 4), dtype=np.int64)
    onehot[np.arange(horizon), states] = 1
    counts = np.cumsum(onehot, axis=0)
    keep = log_indices(horizon)
    c = counts[keep - 1]
    u_d = (c @ game.s_d) / keep
    u_a = (c @ game.s_a) / keep
    s = states[keep - 1]
    return Trajectory(
        stage=keep,
        state=s,
        d_action=s // 2 + 1,
        a_action=s % 2 + 1,
        r_d=game.s_d[s],
        r_a=game.s_a[s],
        u_d=u_d,
        u_a=u_a,
        final_u_d=float(counts[-1] @ game.s_d / horizon),
        final_u_a=float(counts[-1] @ game.s_a / horizon),
        joint_counts=counts[-1].copy(),
        **extra,
    )


def run_fictitious_play(game: StageGame, pi_d, config: SimulationConfig) -> Trajectory:
    """Attacker best-responds to per-state empirical frequencies of the defender.

    Each state starts from the uniform estimate 0.5 until it is visited.
    With probability ``lam`` the attacker plays BR(pi_hat) in the current
    state, otherwise the stubborn strategy.
    """
    if config.learner != "fictitious-play":
        raise InputDomainError("config.learner must be 'fictitious-play'")
    p = check_strategy(pi_d, "pi_d").tolist()
    st = check_stubborn(config.stubborn).tolist()
    lam, horizon = float(config.lam), int(config.horizon)
    u_def, u_att = make_streams(config.seed, horizon)
    u_def, u_att = u_def.tolist(), u_att.tolist()
    visits = [0, 0, 0, 0]
    ones = [0, 0, 0, 0]
    pi_hat = np.full(4, 0.5)
    br = None  # cached best response
    stale = True
    refreshed = -horizon
    every = int(config.br_refresh)
    states = np.empty(horizon, dtype=np.int64)
    s = config.initial_state
    for t in range(horizon):
        d = 0 if u_def[t] < p[s] else 1
        x, y = u_att[t]
        if x < lam:
            if br is None or (stale and t - refreshed >= every):
                idx = best_response_batch(game, pi_hat)[0]
                br = DETERMINISTIC_POLICIES[int(idx)].tolist()
                stale, refreshed = False, t
            a = 0 if br[s] == 1.0 else 1
        else:
            a = 0 if y < st[s] else 1
        visits[s] += 1
        ones[s] += d == 0
        new = ones[s] / visits[s]
        if new != pi_hat[s]:
            pi_hat[s] = new
            stale = True
        s = 2 * d + a
        states[t] = s
    return _finish(game, states, config.initial_state, pi_hat=pi_hat.copy())


def run_q_learning(game: StageGame, pi_d, config: SimulationConfig) -> Trajectory:
    """Average-reward Q-learning attacker.

    Greedy on Q(s, .) with probability ``lam`` (ties to action 1), otherwise
    the stubborn action (or a uniform action when ``exploration="uniform"``).
    The average-reward estimate is updated only after greedy-consistent
    steps, using the mixed recursive/all-history rule.
    """
    if config.learner != "q-learning":
        raise InputDomainError("config.learner must be 'q-learning'")
    p = check_strategy(pi_d, "pi_d").tolist()
    st = check_stubborn(config.stubborn).tolist()
    lam, horizon = float(config.lam), int(config.horizon)
    e1, e2 = float(config.eps1), float(config.eps2)
    uniform = config.exploration == "uniform"
    r_att = game.s_a.tolist()
    u_def, u_att = make_streams(config.seed, horizon)
    u_def, u_att = u_def.tolist(), u_att.tolist()
    q = [[0.0, 0.0] for _ in range(4)]
    r_bar = 0.0
    states = np.empty(horizon, dtype=np.int64)
    s = config.initial_state
    for t in range(horizon):
        d = 0 if u_def[t] < p[s] else 1
        x, y = u_att[t]
        qs = q[s]
        if x < lam:
            a = 0 if qs[0] >= qs[1] else 1
        elif uniform:
            a = 0 if y < 0.5 else 1
        else:
            a = 0 if y < st[s] else 1
        nxt = 2 * d + a
        r = r_att[nxt]
        qn = q[nxt]
        delta = r - r_bar + max(qn[0], qn[1]) - qs[a]
        qs[a] += e1 * delta
        if qs[a] == max(qs[0], qs[1]):
            n = t + 1
            r_bar = (1.0 - e2) * r_bar + e2 * ((n - 1) * r_bar + r) / n
        s = nxt
        states[t] = s
    return _finish(game, states, config.initial_state, q_table=np.array(q), r_bar=r_bar)


def simulate(game: StageGame, pi_d, config: SimulationConfig) -> Trajectory:
    if config.learner == "fictitious-play":
        return run_fictitious_play(game, pi_d, config)
    return run_q_learning(game, pi_d, config)


def _cell(args):
    game, label, pi_d, cfg = args
    tr = simulate(game, pi_d, cfg)
    return SweepRow(label, cfg.lam, cfg.learner, cfg.seed, tr.final_u_d, tr.final_u_a), tr


def sweep_lambda(
    game: StageGame,
    defenders: Sequence[tuple[str, np.ndarray]],
    lambdas: Sequence[float],
    config: SimulationConfig,
    *,
    workers: int = 1,
    keep_trajectories: bool = False,
):
    """Run the configured learner for every (defender, lam) cell.

    Cell seeds come from ``cell_seed(config.seed, label, lam)``, so results
    do not depend on ``workers``.  Returns the rows, and the trajectories
    too when ``keep_trajectories`` is set.
    """
    jobs = [
        (game, label, np.asarray(pi, dtype=float), replace(config, lam=float(lam), seed=cell_seed(config.seed, label, lam)))
        for label, pi in defenders
        for lam in lambdas
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_cell, jobs))
    else:
        results = [_cell(j) for j in jobs]
    rows = [r for r, _ in results]
    if keep_trajectories:
        return rows, [tr for _, tr in results]
    return rows
