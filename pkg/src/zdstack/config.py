"""Run configuration files.

A config is a YAML document.  The ``game`` section gives the payoffs either
directly::

    game:
      payoffs:
        u_d: [[5, 1], [0, 4]]
        u_a: [[1, 5], [4, 2]]

or through the moving-target-defense template::

    game:
      mtd:
        theta: 0.5
        Y: [1.0, 1.0]          # defender switching costs Y1, Y2
        C: [1.0, 1.0]          # attacker costs C1, C2
        d1: {11: 2, 12: 0, 21: 0, 22: 2}
        d0: {11: 5, 12: 1.5, 21: 0.5, 22: 4.5}
        a1: {11: 0, 12: 2, 21: 2, 22: 0}
        a0: {11: 2, 12: 5, 21: 4, 22: 2}

Per-state coefficients may also be 4-element lists in state order
11, 12, 21, 22.  Optional top-level keys: ``seed``, ``stubborn``,
``analysis`` and ``simulation`` (see ``DEFAULTS``).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .game import STATES, StageGame, check_stubborn
from .validation import InputDomainError, check_strategy

__all__ = [
    "DEFAULTS",
    "ConfigError",
    "MTDParameters",
    "GameConfig",
    "expand_mtd",
    "parse_config",
    "load_config",
]

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "stubborn": [1.0, 0.5, 1.0, 0.5],
    "analysis": {
        "lambda_step": 0.01,
        "sse_coarse_step": 0.1,
        "sse_refine_rounds": 6,
        "constants_grid_step": 0.1,
        "zd": "thm4",
    },
    "simulation": {
        "horizon": 100000,
        "lambdas": [0.1, 0.2, 0.8, 0.9],
        "learners": ["fictitious-play", "q-learning"],
        "eps1": 0.1,
        "eps2": 0.01,
        "exploration": "stubborn",
        "br_refresh": 1,
    },
}


class ConfigError(ValueError):
    """Malformed or incomplete configuration."""


@dataclass(frozen=True)
class MTDParameters:
    theta: float
    y: tuple
    c: tuple
    d1: tuple
    d0: tuple
    a1: tuple
    a0: tuple


@dataclass
class GameConfig:
    game: StageGame
    mode: str
    seed: int
    stubborn: np.ndarray
    analysis: dict
    simulation: dict
    mtd: Optional[MTDParameters] = None
    warnings: list = field(default_factory=list)
    config_hash: str = ""
    source: Optional[str] = None


def expand_mtd(m: MTDParameters) -> StageGame:
    """Payoff tables of the MTD template.

    Defender (i, j): R^d_ij - Y_(3-i) / 2;  attacker (i, j): R^a_ij - C_j,
    with R^x_s = x1_s * theta + x0_s.
    """
    r_d = np.asarray(m.d1) * m.theta + np.asarray(m.d0)
    r_a = np.asarray(m.a1) * m.theta + np.asarray(m.a0)
    y1, y2 = m.y
    c1, c2 = m.c
    u_d = r_d.reshape(2, 2) - np.array([[y2 / 2, y2 / 2], [y1 / 2, y1 / 2]])
    u_a = r_a.reshape(2, 2) - np.array([[c1, c2], [c1, c2]])
    return StageGame(u_d, u_a)


def _require(section: dict, key: str, where: str):
    if not isinstance(section, dict) or key not in section:
        raise ConfigError(f"missing field '{where}{key}'")
    return section[key]


def _number(x, name: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"field '{name}' must be a number, got {x!r}")
    v = float(x)
    if not np.isfinite(v):
        raise ConfigError(f"field '{name}' must be finite")
    return v


def _per_state(x, name: str) -> tuple:
    if isinstance(x, dict):
        keyed = {str(k): v for k, v in x.items()}
        missing = [s for s in STATES if s not in keyed]
        if missing:
            raise ConfigError(f"missing field '{name}.{missing[0]}'")
        extra = sorted(set(keyed) - set(STATES))
        if extra:
            raise ConfigError(f"unknown state '{name}.{extra[0]}'")
        return tuple(_number(keyed[s], f"{name}.{s}") for s in STATES)
    if isinstance(x, list) and len(x) == 4:
        return tuple(_number(v, f"{name}[{i}]") for i, v in enumerate(x))
    raise ConfigError(f"field '{name}' must map states 11, 12, 21, 22 to numbers")


def _pair(x, name: str) -> tuple:
    if not isinstance(x, list) or len(x) != 2:
        raise ConfigError(f"field '{name}' must be a list of two numbers")
    return tuple(_number(v, f"{name}[{i}]") for i, v in enumerate(x))


def _matrix(x, name: str) -> np.ndarray:
    if not (isinstance(x, list) and len(x) == 2 and all(isinstance(r, list) and len(r) == 2 for r in x)):
        raise ConfigError(f"field '{name}' must be a 2x2 nested list")
    return np.array([[_number(v, f"{name}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(x)])


def _merge(defaults: dict, given: Any, where: str) -> dict:
    if given is None:
        return copy.deepcopy(defaults)
    if not isinstance(given, dict):
        raise ConfigError(f"section '{where}' must be a mapping")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown field '{where}.{unknown[0]}'")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def _canonical_hash(doc: dict) -> str:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def parse_config(text: str, source: Optional[str] = None) -> GameConfig:
    """Parse and validate config text.

    Assumption violations are collected in ``warnings``; commands that need
    the assumptions turn them into errors.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"parse error{where}: {problem}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping with a 'game' section")
    unknown = sorted(set(doc) - {"game", *DEFAULTS})
    if unknown:
        raise ConfigError(f"unknown field '{unknown[0]}'")

    game_sec = _require(doc, "game", "")
    if not isinstance(game_sec, dict):
        raise ConfigError("section 'game' must be a mapping")
    modes = [k for k in ("payoffs", "mtd") if k in game_sec]
    if len(modes) != 1:
        raise ConfigError("section 'game' must contain exactly one of 'payoffs' or 'mtd'")
    mode = modes[0]
    mtd = None
    if mode == "payoffs":
        sec = game_sec["payoffs"]
        game = StageGame(
            _matrix(_require(sec, "u_d", "game.payoffs."), "game.payoffs.u_d"),
            _matrix(_require(sec, "u_a", "game.payoffs."), "game.payoffs.u_a"),
        )
    else:
        sec = game_sec["mtd"]
        w = "game.mtd."
        theta = _number(_require(sec, "theta", w), w + "theta")
        if not 0.0 <= theta <= 1.0:
            raise ConfigError(f"field 'game.mtd.theta' must lie in [0, 1], got {theta}")
        mtd = MTDParameters(
            theta=theta,
            y=_pair(_require(sec, "Y", w), w + "Y"),
            c=_pair(_require(sec, "C", w), w + "C"),
            d1=_per_state(_require(sec, "d1", w), w + "d1"),
            d0=_per_state(_require(sec, "d0", w), w + "d0"),
            a1=_per_state(_require(sec, "a1", w), w + "a1"),
            a0=_per_state(_require(sec, "a0", w), w + "a0"),
        )
        game = expand_mtd(mtd)

    seed = doc.get("seed", DEFAULTS["seed"])
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"field 'seed' must be a non-negative integer, got {seed!r}")
    analysis = _merge(DEFAULTS["analysis"], doc.get("analysis"), "analysis")
    simulation = _merge(DEFAULTS["simulation"], doc.get("simulation"), "simulation")
    stub_raw = doc.get("stubborn", DEFAULTS["stubborn"])
    warnings = [f"Assumption 1 fails: {v}" for v in game.assumption1_violations()]
    try:
        stubborn = check_strategy(stub_raw, "stubborn")
    except InputDomainError as exc:
        raise ConfigError(f"field 'stubborn': {exc}") from None
    try:
        check_stubborn(stubborn)
    except InputDomainError as exc:
        warnings.append(f"Assumption 2 fails: {exc}")

    resolved = {
        "game": {"mode": mode, "u_d": game.u_d.tolist(), "u_a": game.u_a.tolist()},
        "seed": seed,
        "stubborn": np.asarray(stubborn).tolist(),
        "analysis": analysis,
        "simulation": simulation,
    }
    return GameConfig(
        game=game,
        mode=mode,
        seed=seed,
        stubborn=np.asarray(stubborn, dtype=float),
        analysis=analysis,
        simulation=simulation,
        mtd=mtd,
        warnings=warnings,
        config_hash=_canonical_hash(resolved),
        source=source,
    )


def load_config(path) -> GameConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"), source=str(p))
