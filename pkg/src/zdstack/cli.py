"""Command-line entry point ``zdstack``.

Subcommands: ``analyze``, ``simulate``, ``verify``, ``sse``, ``zd``, ``br``.
Exit codes: 0 success, 2 usage or config error, 3 assumption or existence
failure, 4 invariant check failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import compare_zd_sse, compute_constants
from .config import ConfigError, GameConfig, load_config
from .game import STATES, batch_utilities, mixture_strategy
from .io import run_id, write_csv, write_manifest, atomic_write_text
from .learning import GENERATOR, LEARNERS, EXPLORATION_MODES, SimulationConfig, sweep_lambda
from .response import best_response, solve_sse
from .suites import run_all
from .validation import AssumptionError, CaseMismatchError, FeasibilityError, InputDomainError, check_strategy
from .zd import NAMED_CONSTRUCTIONS, existence_report, named_zd

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_ASSUMPTION",
    "EXIT_INVARIANT",
    "ANALYZE_COLUMNS",
    "PLOT_COLUMNS",
    "TRAJECTORY_COLUMNS",
    "SUMMARY_COLUMNS",
    "SSE_COLUMNS",
    "ZD_COLUMNS",
    "BR_COLUMNS",
    "VERIFY_COLUMNS",
    "parse_lambda_grid",
    "build_parser",
    "main",
]

EXIT_OK, EXIT_USAGE, EXIT_ASSUMPTION, EXIT_INVARIANT = 0, 2, 3, 4

ANALYZE_COLUMNS = ("lambda", "u_d_zd", "u_d_sse", "gap", "in_gamma1_certified", "in_gamma2_certified", "H")
PLOT_COLUMNS = (
    "lambda", "u_d_zd", "u_d_sse", "gap", "H", "H_nominal",
    "in_gamma1_certified", "in_gamma2_certified", "in_gamma1_nominal", "in_gamma2_nominal", "C",
)
TRAJECTORY_COLUMNS = ("stage", "state", "d_action", "a_action", "r_d", "r_a", "u_d", "u_a")
SUMMARY_COLUMNS = ("learner", "defender", "lambda", "seed", "horizon", "u_d", "u_a", "u_d_analytic", "file")
SSE_COLUMNS = tuple(f"pi_d_{s}" for s in STATES) + tuple(f"pi_a_{s}" for s in STATES) + ("u_d", "u_a")
ZD_COLUMNS = ("construction", "status", "eta", "beta", "gamma", "phi", "branch") + tuple(f"p_{s}" for s in STATES)
BR_COLUMNS = tuple(f"pi_a_{s}" for s in STATES) + ("attacker_value", "defender_value", "tied_count")
VERIFY_COLUMNS = ("check", "residual", "tolerance", "passed", "witness")


class UsageError(Exception):
    pass


class _Ctx:
    """Per-invocation state: config, output directory, metadata."""

    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        self.started = datetime.now(timezone.utc)
        if args.config is None:
            raise UsageError("--config is required")
        self.cfg: GameConfig = load_config(args.config)
        self.seed = self.cfg.seed if args.seed is None else args.seed
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        self.out_dir = Path(args.out_dir or "out")
        self.outputs: list[Path] = []
        self.manifest_name = f"manifest-{command}.json"
        self.argv: list[str] = []

    def meta(self, **extra) -> dict:
        base = {
            "tool": f"zdstack {__version__}",
            "command": self.command,
            "config_hash": self.cfg.config_hash,
            "seed": self.seed,
            "run_id": run_id(self.command, self.cfg.config_hash, self.seed, __version__),
            "manifest": self.manifest_name,
        }
        base.update(extra)
        return base

    def csv(self, name: str, columns, rows, **meta) -> Path:
        path = write_csv(self.out_dir / name, columns, rows, self.meta(**meta))
        self.outputs.append(path)
        return path

    def finish(self) -> None:
        write_manifest(
            self.out_dir,
            command=self.command,
            config_hash=self.cfg.config_hash,
            seed=self.seed,
            version=__version__,
            outputs=self.outputs,
            started=self.started,
            extra={"config": self.cfg.source, "argv": self.argv},
            name=self.manifest_name,
        )

    def require_assumptions(self) -> None:
        if self.cfg.warnings:
            raise AssumptionError("; ".join(self.cfg.warnings))


def parse_lambda_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9))
            vals = [round(start + i * step, 12) for i in range(n + 1)]
            if stop - vals[-1] > 1e-9:
                vals.append(stop)
        else:
            vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad lambda grid {text!r}; use start:stop:step or a comma list") from None
    if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
        raise UsageError(f"lambda grid {text!r} must be nonempty and inside [0, 1]")
    return vals


def _default_grid(step: float) -> list[float]:
    return parse_lambda_grid(f"0:1:{step}")


def _fmt_vec(v) -> str:
    return "[" + ",".join(repr(float(x)) for x in v) + "]"


def _zd_for(ctx: _Ctx):
    which = ctx.cfg.analysis["zd"]
    return (which, *named_zd(ctx.cfg.game, which))


def _sse_for(ctx: _Ctx, zd=None):
    a = ctx.cfg.analysis
    extra = None if zd is None else np.atleast_2d(zd)
    return solve_sse(ctx.cfg.game, a["sse_coarse_step"], a["sse_refine_rounds"], extra_candidates=extra)


def _zd_table(game) -> list[tuple]:
    rows = []
    for which in NAMED_CONSTRUCTIONS:
        try:
            p, par = named_zd(game, which)
            rows.append((which, "ok", par.eta, par.beta, par.gamma, par.phi, par.branch, *p))
        except (CaseMismatchError, FeasibilityError) as exc:
            status = "case-mismatch" if isinstance(exc, CaseMismatchError) else "infeasible"
            rows.append((which, status, *([None] * 9)))
    return rows


def cmd_analyze(ctx: _Ctx) -> int:
    ctx.require_assumptions()
    game = ctx.cfg.game
    rep = existence_report(game)
    if not rep.exists:
        raise AssumptionError(f"no ZD strategy exists: {rep.message}")
    a = ctx.cfg.analysis
    grid = parse_lambda_grid(ctx.args.lambda_grid) if ctx.args.lambda_grid else _default_grid(a["lambda_step"])
    which, zd, params = _zd_for(ctx)
    sse = _sse_for(ctx, zd)
    st = ctx.cfg.stubborn
    cert = compute_constants(game, sse, zd, st, max_grid_step=a["constants_grid_step"])
    nom = compute_constants(game, sse, zd, st, max_grid_step=None)
    reports = compare_zd_sse(game, sse, zd, st, grid, constants=cert, nominal=nom)
    meta = {
        "zd_construction": which,
        "zd_strategy": _fmt_vec(zd),
        "zd_relation": _fmt_vec([params.eta, params.beta, params.gamma]),
        "sse_strategy": _fmt_vec(sse.pi_d_sse),
        "sse_u_d": sse.u_d_sse,
        "stubborn": _fmt_vec(st),
        "constants_certified": _fmt_vec([cert.a_const, cert.b1, cert.b2, cert.b3, cert.b_const, cert.d_one]),
        "constants_nominal": _fmt_vec([nom.a_const, nom.b1, nom.b2, nom.b3, nom.b_const, nom.d_one]),
        "constants_order": "A,B1,B2,B3,B,D(1)",
        "constants_grid_step": a["constants_grid_step"],
    }
    for row in _zd_table(game):
        meta[f"zd_{row[0]}"] = row[1] if row[1] != "ok" else _fmt_vec(row[7:])
    ctx.csv(
        "analyze.csv",
        ANALYZE_COLUMNS,
        [(r.lam, r.u_d_zd, r.u_d_sse_mix, r.gap, r.in_gamma1, r.in_gamma2, r.h_bound) for r in reports],
        **meta,
    )
    nan = float("nan")
    lines = ["# " + " ".join(PLOT_COLUMNS)]
    for r in reports:
        vals = (
            r.lam, r.u_d_zd, r.u_d_sse_mix, r.gap,
            nan if r.h_bound is None else r.h_bound, nan if r.h_nominal is None else r.h_nominal,
            int(r.in_gamma1), int(r.in_gamma2), int(r.in_gamma1_nominal), int(r.in_gamma2_nominal), r.c_value,
        )
        lines.append(" ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in vals))
    plot = atomic_write_text(ctx.out_dir / "analyze_plot.dat", "\n".join(lines) + "\n")
    ctx.outputs.append(plot)
    g1 = [r.lam for r in reports if r.in_gamma1]
    g2 = [r.lam for r in reports if r.in_gamma2]
    print(f"SSE u_d = {sse.u_d_sse:.6f} at {np.round(sse.pi_d_sse, 4)}; ZD ({which}) = {np.round(zd, 4)}")
    print(f"certified Gamma2 grid points: {len(g2)}  Gamma1 grid points: {len(g1)}  rows: {len(reports)}")
    return EXIT_OK


def cmd_simulate(ctx: _Ctx) -> int:
    ctx.require_assumptions()
    args, sim = ctx.args, dict(ctx.cfg.simulation)
    for key in ("horizon", "eps1", "eps2", "exploration", "br_refresh"):
        if getattr(args, key) is not None:
            sim[key] = getattr(args, key)
    if args.learners:
        sim["learners"] = [x.strip() for x in args.learners.split(",")]
    lambdas = parse_lambda_grid(args.lambda_grid) if args.lambda_grid else [float(x) for x in sim["lambdas"]]
    bad = [x for x in sim["learners"] if x not in LEARNERS]
    if bad:
        raise UsageError(f"unknown learner {bad[0]!r}; choose from {LEARNERS}")
    game = ctx.cfg.game
    which, zd, _ = _zd_for(ctx)
    sse = _sse_for(ctx, zd)
    defenders = [("zd", zd), ("sse", sse.pi_d_sse)]
    st = ctx.cfg.stubborn
    workers = max(1, int(args.threads or 1))
    summary = []
    for learner in sim["learners"]:
        try:
            base = SimulationConfig(
                horizon=int(sim["horizon"]), seed=ctx.seed, stubborn=tuple(st), learner=learner,
                eps1=float(sim["eps1"]), eps2=float(sim["eps2"]), exploration=sim["exploration"],
                br_refresh=int(sim["br_refresh"]),
            )
        except InputDomainError as exc:
            raise UsageError(str(exc)) from None
        rows, trajs = sweep_lambda(game, defenders, lambdas, base, workers=workers, keep_trajectories=True)
        pis = dict(defenders)
        for row, tr in zip(rows, trajs):
            pi = pis[row.label]
            mix = mixture_strategy(best_response(game, pi).policy, st, row.lam)
            analytic = float(batch_utilities(game, pi, mix)[0])
            name = f"traj_{learner}_{row.label}_lam{row.lam!r}.csv"
            ctx.csv(
                name,
                TRAJECTORY_COLUMNS,
                zip(tr.stage, tr.state, tr.d_action, tr.a_action, tr.r_d, tr.r_a, tr.u_d, tr.u_a),
                learner=learner, defender=row.label, defender_strategy=_fmt_vec(pi), **{"lambda": row.lam},
                cell_seed=row.seed, horizon=base.horizon, generator=GENERATOR,
            )
            summary.append((learner, row.label, row.lam, row.seed, base.horizon, row.u_d, row.u_a, analytic, name))
            print(f"{learner:16s} {row.label:3s} lam={row.lam:<5g} U_d={row.u_d:.4f} (analytic {analytic:.4f})")
    ctx.csv("simulate_summary.csv", SUMMARY_COLUMNS, summary, zd_construction=which, generator=GENERATOR)
    return EXIT_OK


def cmd_verify(ctx: _Ctx) -> int:
    game = ctx.cfg.game
    bad = game.assumption1_violations()
    if bad:
        print("assumption check FAILED: " + "; ".join(bad), file=sys.stderr)
        return EXIT_ASSUMPTION
    print("assumption check passed")
    results = run_all(game, ctx.cfg.stubborn, seed=ctx.seed)
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag} {r.name:28s} residual={r.residual:.3e} tol={r.tolerance:.0e}")
        if not r.passed:
            print(f"     witness: {r.witness}")
    ctx.csv("verify.csv", VERIFY_COLUMNS, [(r.name, r.residual, r.tolerance, r.passed, r.witness) for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def cmd_sse(ctx: _Ctx) -> int:
    ctx.cfg.game.require_assumption1()
    sse = _sse_for(ctx)
    ctx.csv("sse.csv", SSE_COLUMNS, [(*sse.pi_d_sse, *sse.pi_a_sse, sse.u_d_sse, sse.u_a_sse)])
    print(f"pi_d = {np.round(sse.pi_d_sse, 6)}  BR = {sse.pi_a_sse}  U_d = {sse.u_d_sse:.6f}  U_a = {sse.u_a_sse:.6f}")
    return EXIT_OK


def cmd_zd(ctx: _Ctx) -> int:
    game = ctx.cfg.game
    game.require_assumption1()
    rep = existence_report(game)
    print(rep.message)
    rows = _zd_table(game)
    ctx.csv("zd.csv", ZD_COLUMNS, rows, exists=rep.exists)
    for row in rows:
        print(f"{row[0]:11s} {row[1]:13s}" + ("" if row[1] != "ok" else f" p = {np.round(row[7:], 6)}"))
    return EXIT_OK if rep.exists else EXIT_ASSUMPTION


def cmd_br(ctx: _Ctx) -> int:
    if ctx.args.pi_d is None:
        raise UsageError("br needs --pi-d p11,p12,p21,p22")
    try:
        p = check_strategy([float(x) for x in ctx.args.pi_d.split(",")], "--pi-d")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    r = best_response(ctx.cfg.game, p)
    ctx.csv("br.csv", BR_COLUMNS, [(*r.policy, r.attacker_value, r.defender_value, len(r.tied_set))], pi_d=_fmt_vec(p))
    print(f"BR = {r.policy}  U_a = {r.attacker_value:.6f}  U_d = {r.defender_value:.6f}  ties = {len(r.tied_set)}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sse": cmd_sse,
    "zd": cmd_zd,
    "br": cmd_br,
}


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=d, help="override the config seed")
    p.add_argument("--out-dir", default=d, help="output directory (default: out)")
    p.add_argument("--lambda-grid", default=d, help="start:stop:step or comma list")
    p.add_argument("--threads", type=int, default=d, help="worker processes for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zdstack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"zdstack {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "analyze": "ZD versus SSE over a lambda grid",
        "simulate": "learning attackers against ZD and SSE defenders",
        "verify": "run the invariant checks",
        "sse": "solve the strong Stackelberg equilibrium",
        "zd": "list the named ZD constructions",
        "br": "attacker best response to a defender strategy",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        _add_globals(sp, suppress=True)
        if name == "simulate":
            sp.add_argument("--horizon", type=int)
            sp.add_argument("--learners", help="comma list of " + ", ".join(LEARNERS))
            sp.add_argument("--eps1", type=float)
            sp.add_argument("--eps2", type=float)
            sp.add_argument("--exploration", choices=EXPLORATION_MODES)
            sp.add_argument("--br-refresh", type=int)
        if name == "br":
            sp.add_argument("--pi-d", help="defender strategy p11,p12,p21,p22")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = _Ctx(args, args.command)
        ctx.argv = argv
        code = COMMANDS[args.command](ctx)
        if ctx.outputs:
            ctx.finish()
        return code
    except (UsageError, ConfigError, InputDomainError) as exc:
        print(f"zdstack {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionError as exc:
        print(f"zdstack {args.command}: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
