from __future__ import annotations

import json
import subprocess
import sys

import pytest

import zdstack.game as game_mod
from zdstack.cli import (
    ANALYZE_COLUMNS,
    BR_COLUMNS,
    EXIT_ASSUMPTION,
    EXIT_INVARIANT,
    EXIT_OK,
    EXIT_USAGE,
    SUMMARY_COLUMNS,
    TRAJECTORY_COLUMNS,
    VERIFY_COLUMNS,
    UsageError,
    main,
    parse_lambda_grid,
)
from zdstack.io import read_csv

REFLECTED = """
game:
  payoffs:
    u_d: [[5, 1], [0, 4.5]]
    u_a: [[1, 5], [4, 3.5]]
"""
BROKEN = """
game:
  payoffs:
    u_d: [[5, 1], [0, 4]]
    u_a: [[6, 5], [4, 2]]
"""


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    return main([*argv, "--out-dir", str(out)]), out


def write(tmp_path, text, name="game.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestGrid:
    def test_range(self):
        assert parse_lambda_grid("0:1:0.5") == [0.0, 0.5, 1.0]
        assert len(parse_lambda_grid("0:1:0.01")) == 101

    def test_list(self):
        assert parse_lambda_grid("0.1, 0.9") == [0.1, 0.9]

    @pytest.mark.parametrize("text", ["0:1:0", "a,b", "0:2:0.5", ""])
    def test_bad(self, text):
        with pytest.raises(UsageError):
            parse_lambda_grid(text)


class TestAnalyze:
    @pytest.fixture(scope="class")
    @classmethod
    def fixture_run(cls, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("an")
        code, out = run(tmp, "analyze", "--config", str(__import__("conftest").CONFIGS / "fixture.cfg"),
                        "--lambda-grid", "0:1:0.5")
        return code, out

    def test_golden_schema(self, fixture_run):
        code, out = fixture_run
        assert code == EXIT_OK
        meta, rows = read_csv(out / "analyze.csv")
        assert tuple(rows[0]) == ANALYZE_COLUMNS
        for key in ("tool", "command", "config_hash", "seed", "run_id", "manifest",
                    "zd_construction", "sse_u_d", "constants_certified", "constants_order"):
            assert key in meta
        assert meta["manifest"] == "manifest-analyze.json"
        assert meta["zd_thm5"] == "infeasible" and meta["zd_thm2-case1"] == "case-mismatch"

    def test_three_rows_and_endpoints(self, fixture_run):
        _, out = fixture_run
        _, rows = read_csv(out / "analyze.csv")
        assert [r["lambda"] for r in rows] == ["0.0", "0.5", "1.0"]
        first, last = rows[0], rows[-1]
        assert float(first["u_d_zd"]) == 5.0 and float(first["gap"]) <= 0
        # loss at lambda = 1 is U^SSE - U12^d = 3 - 1
        assert float(last["gap"]) == pytest.approx(2.0, abs=1e-3)
        assert last["in_gamma1_certified"] == "true" and first["in_gamma2_certified"] == "true"

    def test_plot_file(self, fixture_run):
        _, out = fixture_run
        lines = (out / "analyze_plot.dat").read_text().splitlines()
        assert lines[0].startswith("# lambda u_d_zd")
        assert len(lines) == 4 and len(lines[1].split()) == len(lines[0].split()) - 1

    def test_manifest(self, fixture_run):
        _, out = fixture_run
        doc = json.loads((out / "manifest-analyze.json").read_text())
        assert {o["file"] for o in doc["outputs"]} == {"analyze.csv", "analyze_plot.dat"}
        assert doc["argv"][0] == "analyze"

    def test_existence_failure(self, tmp_path, capsys):
        code, _ = run(tmp_path, "analyze", "--config", write(tmp_path, REFLECTED))
        assert code == EXIT_ASSUMPTION
        assert "opposite sides" in capsys.readouterr().err


class TestVerify:
    def test_fixture_passes(self, tmp_path, fixture_path):
        code, out = run(tmp_path, "verify", "--config", str(fixture_path))
        assert code == EXIT_OK
        meta, rows = read_csv(out / "verify.csv")
        assert tuple(rows[0]) == VERIFY_COLUMNS
        assert all(r["passed"] == "true" for r in rows)

    def test_assumption_gate_runs_first(self, tmp_path, capsys, monkeypatch):
        import zdstack.cli as cli

        called = []
        monkeypatch.setattr(cli, "run_all", lambda *a, **k: called.append(1) or [])
        code, out = run(tmp_path, "verify", "--config", write(tmp_path, BROKEN))
        assert code == EXIT_ASSUMPTION and not called
        assert "U11^a < U12^a" in capsys.readouterr().err

    def test_mutated_determinant_is_caught(self, tmp_path, fixture_path, monkeypatch, capsys):
        real = game_mod.press_dyson_cofactors

        def corrupted(*args, **kw):
            cof = real(*args, **kw)
            return cof + 0.01 * cof[..., ::-1]

        monkeypatch.setattr(game_mod, "press_dyson_cofactors", corrupted)
        code, out = run(tmp_path, "verify", "--config", str(fixture_path))
        assert code == EXIT_INVARIANT
        _, rows = read_csv(out / "verify.csv")
        failed = [r for r in rows if r["passed"] == "false"]
        assert any(r["check"].startswith("zd-enforcement") for r in failed)
        assert all(r["witness"] for r in failed)
        assert "witness" in capsys.readouterr().out


class TestSimulate:
    def test_cells_and_summary(self, tmp_path, fixture_path):
        code, out = run(tmp_path, "simulate", "--config", str(fixture_path), "--horizon", "2000",
                        "--lambda-grid", "0.1,0.9", "--br-refresh", "10")
        assert code == EXIT_OK
        trajs = sorted(p.name for p in out.glob("traj_*.csv"))
        assert len(trajs) == 8
        meta, rows = read_csv(out / "simulate_summary.csv")
        assert tuple(rows[0]) == SUMMARY_COLUMNS and len(rows) == 8
        _, t = read_csv(out / trajs[0])
        assert tuple(t[0]) == TRAJECTORY_COLUMNS

    def test_horizon_one(self, tmp_path, fixture_path):
        code, out = run(tmp_path, "simulate", "--config", str(fixture_path), "--horizon", "1",
                        "--lambda-grid", "0.5", "--learners", "q-learning")
        assert code == EXIT_OK
        for p in out.glob("traj_*.csv"):
            assert len(read_csv(p)[1]) == 1

    def test_rerun_is_byte_identical(self, tmp_path, fixture_path):
        argv = ["simulate", "--config", str(fixture_path), "--horizon", "500", "--lambda-grid", "0.2,0.8"]
        _, a = run(tmp_path, *argv, name="a")
        _, b = run(tmp_path, *argv, name="b")
        files = sorted(p.name for p in a.glob("*.csv"))
        assert files and all((a / f).read_bytes() == (b / f).read_bytes() for f in files)

    @pytest.mark.parametrize("flag", [["--horizon", "0"], ["--learners", "sarsa"], ["--eps1", "2"]])
    def test_usage_errors(self, tmp_path, fixture_path, flag):
        code, _ = run(tmp_path, "simulate", "--config", str(fixture_path), "--lambda-grid", "0.5", *flag)
        assert code == EXIT_USAGE


class TestSmallCommands:
    def test_br(self, tmp_path, fixture_path):
        code, out = run(tmp_path, "br", "--config", str(fixture_path), "--pi-d", "0.5,0.5,0.5,0.5")
        assert code == EXIT_OK
        _, rows = read_csv(out / "br.csv")
        assert tuple(rows[0]) == BR_COLUMNS and float(rows[0]["attacker_value"]) == pytest.approx(3.5)

    def test_br_needs_pi_d(self, tmp_path, fixture_path):
        assert run(tmp_path, "br", "--config", str(fixture_path))[0] == EXIT_USAGE

    def test_br_bad_pi_d(self, tmp_path, fixture_path):
        assert run(tmp_path, "br", "--config", str(fixture_path), "--pi-d", "2,0,0,0")[0] == EXIT_USAGE

    def test_zd(self, tmp_path, fixture_path):
        code, out = run(tmp_path, "zd", "--config", str(fixture_path))
        assert code == EXIT_OK
        meta, rows = read_csv(out / "zd.csv")
        assert meta["exists"] == "true" and len(rows) == 7

    def test_zd_missing(self, tmp_path):
        assert run(tmp_path, "zd", "--config", write(tmp_path, REFLECTED))[0] == EXIT_ASSUMPTION

    def test_sse(self, tmp_path, fixture_path):
        code, out = run(tmp_path, "sse", "--config", str(fixture_path))
        assert code == EXIT_OK
        assert float(read_csv(out / "sse.csv")[1][0]["u_d"]) == pytest.approx(3.0, abs=1e-6)

    def test_missing_config(self, tmp_path):
        assert run(tmp_path, "sse")[0] == EXIT_USAGE
        assert run(tmp_path, "sse", "--config", str(tmp_path / "none.cfg"))[0] == EXIT_USAGE

    def test_seed_override_changes_run_id(self, tmp_path, fixture_path):
        _, a = run(tmp_path, "br", "--config", str(fixture_path), "--pi-d", "1,1,1,1", name="a")
        _, b = run(tmp_path, "br", "--seed", "5", "--config", str(fixture_path), "--pi-d", "1,1,1,1", name="b")
        assert read_csv(a / "br.csv")[0]["run_id"] != read_csv(b / "br.csv")[0]["run_id"]


def test_console_script(tmp_path, fixture_path):
    res = subprocess.run(
        [sys.executable, "-m", "zdstack.cli", "zd", "--config", str(fixture_path), "--out-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0 and "thm4" in res.stdout
    bad = subprocess.run([sys.executable, "-m", "zdstack.cli", "nope"], capture_output=True, text=True)
    assert bad.returncode == 2
