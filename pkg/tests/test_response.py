from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_game, sample_zd_family
from zdstack.config import load_config
from zdstack.game import DETERMINISTIC_POLICIES, StageGame, batch_utilities, long_run_utilities
from zdstack.response import (
    best_response,
    best_response_batch,
    best_response_certificate,
    defender_value_under_br,
    policy_values,
    solve_sse,
    sse_value_case2,
    stage_candidates,
)
from zdstack.validation import AssumptionError, CaseMismatchError, InputDomainError
from zdstack.zd import named_zd

CASE1 = StageGame([[6, 1], [0, 4]], [[4, 6], [3, 1]])
CASE2 = StageGame([[4, 1], [0, 6]], [[3, 5], [2, 0]])
# best value of a one-shot grid at step 0.02 on the fixture (brute force,
# 51^4 strategies); reached at (0.32, 0.34, 0.34, 0.34)
FINE_GRID_FIXTURE = 2.98

mixed4 = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).map(np.array)


@pytest.fixture(scope="module")
def fixture_sse():
    return solve_sse(StageGame([[5, 1], [0, 4]], [[1, 5], [4, 2]]))


class TestBestResponse:
    def test_fair_coin_reduces_to_stage_game(self, game):
        br = best_response(game, [0.5] * 4)
        assert br.attacker_value == pytest.approx(3.5, abs=1e-12)
        assert any(np.array_equal(p, np.zeros(4)) for p in br.tied_set)

    def test_always_defend_1(self, game):
        br = best_response(game, np.ones(4))
        assert br.attacker_value == pytest.approx(5.0, abs=1e-12)

    def test_thm3_zd_hits_u12a(self, game):
        zd, _ = named_zd(game, "thm3")
        br = best_response(game, zd)
        assert br.attacker_value == pytest.approx(game.u_a[0, 1], abs=1e-9)
        _, u_a = policy_values(game, zd)
        assert br.attacker_value >= u_a.max() - 1e-10

    def test_tie_break_favours_defender(self, game):
        rng = np.random.default_rng(4)
        for p in rng.random((30, 4)):
            br = best_response(game, p)
            for pol in br.tied_set:
                assert br.defender_value >= long_run_utilities(game, p, pol).u_d - 1e-12

    def test_batch_matches_single(self, game):
        ps = np.random.default_rng(8).random((25, 4))
        idx, u_d, u_a = best_response_batch(game, ps)
        for p, i, d in zip(ps, idx, u_d):
            br = best_response(game, p)
            assert br.index == i and br.defender_value == d

    def test_sixteen_policies(self):
        assert len({tuple(p) for p in DETERMINISTIC_POLICIES}) == 16


class TestCertificate:
    @pytest.mark.parametrize("step", [0.25, 0.1])
    def test_random_defenders(self, game, step):
        for p in np.random.default_rng(6).random((10, 4)):
            assert best_response_certificate(game, p, step) <= 1e-9

    def test_step_domain(self, game):
        with pytest.raises(InputDomainError):
            best_response_certificate(game, [0.5] * 4, 0.0)

    @given(mixed4)
    @settings(max_examples=30, deadline=None)
    def test_property(self, p):
        g = StageGame([[5, 1], [0, 4]], [[1, 5], [4, 2]])
        assert best_response_certificate(g, p, 0.25) <= 1e-9


class TestSolveSSE:
    def test_fixture_matches_fine_grid(self, fixture_sse):
        assert fixture_sse.u_d_sse >= FINE_GRID_FIXTURE - 1e-3

    def test_fixture_attacker_indifferent_point(self, fixture_sse, game):
        # the constant strategy 1/3 leaves the attacker indifferent in the stage game
        assert fixture_sse.u_d_sse == pytest.approx(3.0, abs=1e-6)
        assert np.allclose(stage_candidates(game)[-1], 1 / 3)

    def test_result_is_consistent(self, fixture_sse, game):
        br = best_response(game, fixture_sse.pi_d_sse)
        assert np.array_equal(br.policy, fixture_sse.pi_a_sse)
        assert br.defender_value == fixture_sse.u_d_sse

    def test_dominates_coarse_grid(self, fixture_sse, game):
        axis = np.clip(np.linspace(0, 1, 11), 1e-6, 1 - 1e-6)
        grid = np.stack(np.meshgrid(*[axis] * 4, indexing="ij"), -1).reshape(-1, 4)
        assert fixture_sse.u_d_sse >= defender_value_under_br(game, grid).max() - 1e-12

    def test_case1_reaches_u11d(self):
        assert solve_sse(CASE1).u_d_sse == pytest.approx(6.0, abs=1e-3)

    def test_deterministic(self):
        a, b = solve_sse(CASE1), solve_sse(CASE1)
        assert np.array_equal(a.pi_d_sse, b.pi_d_sse) and a.u_d_sse == b.u_d_sse
        assert a.solver_trace == b.solver_trace

    def test_requires_assumption(self):
        with pytest.raises(AssumptionError):
            solve_sse(StageGame([[5, 1], [0, 4]], [[6, 5], [4, 2]]))

    @pytest.mark.parametrize("kw", [{"coarse_step": 0.0}, {"coarse_step": 0.7}, {"refine_rounds": -1}])
    def test_parameter_domain(self, game, kw):
        with pytest.raises(InputDomainError):
            solve_sse(game, **kw)

    def test_zero_refinement_still_valid(self, game):
        res = solve_sse(game, 0.25, 0, max_evals=0)
        assert res.u_d_sse <= 3.0 + 1e-9

    def test_lemma2_random_zd(self, paperlike_path):
        g = load_config(paperlike_path).game
        sse = solve_sse(g)
        zs = np.array([p for p, _ in sample_zd_family(g, np.random.default_rng(1), 50)])
        assert defender_value_under_br(g, zs).max() <= sse.u_d_sse + 1e-6
        thm4, _ = named_zd(g, "thm4")
        assert defender_value_under_br(g, thm4[None])[0] <= sse.u_d_sse + 1e-6


class TestCase2ClosedForm:
    def test_value(self):
        assert sse_value_case2(CASE2) == pytest.approx(14 / 3)

    def test_matches_solver(self):
        assert solve_sse(CASE2).u_d_sse == pytest.approx(sse_value_case2(CASE2), abs=1e-3)

    def test_zero_numerator_boundary(self):
        g = StageGame([[4, 1], [0, 6]], [[3, 5], [3, 0]])
        assert sse_value_case2(g) == 4.0

    def test_case_mismatch(self, game):
        with pytest.raises(CaseMismatchError):
            sse_value_case2(game)


def test_stage_candidate_makes_attacker_indifferent():
    rng = np.random.default_rng(12)
    for _ in range(20):
        g = random_game(rng)
        q = stage_candidates(g)[-1][0]
        assert 0.0 < q < 1.0
        col = q * g.u_a[0] + (1 - q) * g.u_a[1]
        assert col[0] == pytest.approx(col[1], abs=1e-12)


def test_random_games_br_certificates():
    rng = np.random.default_rng(9)
    for _ in range(5):
        g = random_game(rng)
        p = rng.random(4)
        assert best_response_certificate(g, p, 0.25) <= 1e-9
        u_d, _ = batch_utilities(g, p, best_response(g, p).policy)
        assert u_d == pytest.approx(best_response(g, p).defender_value)
