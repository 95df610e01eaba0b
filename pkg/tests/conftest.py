from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from zdstack.game import StageGame

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

U_D = [[5.0, 1.0], [0.0, 4.0]]
U_A = [[1.0, 5.0], [4.0, 2.0]]


@pytest.fixture
def game() -> StageGame:
    return StageGame(U_D, U_A)


@pytest.fixture
def paperlike_path() -> Path:
    return CONFIGS / "paperlike.cfg"


@pytest.fixture
def fixture_path() -> Path:
    return CONFIGS / "fixture.cfg"


def random_game(rng: np.random.Generator) -> StageGame:
    """A random game satisfying the payoff-ordering assumption."""
    lo = rng.uniform(0, 2, size=2)
    hi = rng.uniform(2.5, 6, size=2)
    u_d = np.array([[hi[0], lo[0]], [lo[1], hi[1]]])
    a11, a22 = rng.uniform(0, 3, size=2)
    u_a = np.array([[a11, a11 + rng.uniform(0.5, 3)], [a22 + rng.uniform(0.5, 3), a22]])
    return StageGame(u_d, u_a)


def power_stationary(m: np.ndarray, tol: float = 1e-15, max_iter: int = 1_000_000) -> np.ndarray:
    """Independent oracle for regular chains: plain power iteration from the uniform start."""
    mm = np.asarray(m, dtype=float)
    v = np.full(4, 0.25)
    for _ in range(max_iter):
        w = v @ mm
        if np.abs(w - v).max() < tol:
            return w / w.sum()
        v = w
    raise RuntimeError("power iteration did not converge")


def scalar_chain(pi_d, pi_a) -> np.ndarray:
    """Transition matrix built entry by entry, as an oracle for build_chain."""
    m = np.zeros((4, 4))
    for s in range(4):
        for d in range(2):
            pd = pi_d[s] if d == 0 else 1 - pi_d[s]
            for a in range(2):
                pa = pi_a[s] if a == 0 else 1 - pi_a[s]
                m[s, 2 * d + a] = pd * pa
    return m


def sample_zd_family(game: StageGame, rng: np.random.Generator, n: int) -> list:
    """Random ZD strategies: a separating line, then a random point of its phi range.

    Only meaningful for games where the lines separating {P11, P12} from
    {P21, P22} form a set of positive measure.
    """
    from zdstack.game import HAT_PI
    from zdstack.zd import construct_zd

    pts = np.array([game.point(s) for s in ("11", "12", "21", "22")])
    out = []
    while len(out) < n:
        th = rng.uniform(0, 2 * np.pi)
        normal = np.array([np.cos(th), np.sin(th)])
        h = pts @ normal
        lo, hi = h[2:].max(), h[:2].min()
        if lo > hi:
            continue
        p, params = construct_zd(game, normal[0], normal[1], -rng.uniform(lo, hi))
        out.append((HAT_PI + rng.uniform(0.05, 1.0) * (p - HAT_PI), params))
    return out


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, at the end of the run."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            for name, value in rep.user_properties:
                if name == "acceptance":
                    lines.append((value, "PASS" if rep.passed else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for value, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {value}")
