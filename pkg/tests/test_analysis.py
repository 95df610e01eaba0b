from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_game
from zdstack.analysis import (
    AnalysisConstants,
    a_constant,
    c_value,
    compare_zd_sse,
    compute_constants,
    corollary_check,
    d_one,
    gamma_membership,
    h_bound,
    remainder_g,
)
from zdstack.config import load_config
from zdstack.game import DETERMINISTIC_POLICIES, HAT_PI, StageGame, press_dyson_cofactors, stubborn_utilities
from zdstack.response import SSEResult, best_response, solve_sse
from zdstack.validation import DegenerateError, InputDomainError
from zdstack.zd import named_zd

STUBBORN = np.array([1.0, 0.5, 1.0, 0.5])
unit = st.floats(0.0, 1.0)
strategy4 = st.lists(unit, min_size=4, max_size=4).map(np.array)


@pytest.fixture(scope="module")
def paperlike():
    cfg = load_config(__import__("conftest").CONFIGS / "paperlike.cfg")
    g = cfg.game
    sse = solve_sse(g)
    zd, _ = named_zd(g, "thm4")
    consts = compute_constants(g, sse, zd, cfg.stubborn)
    lams = np.round(np.arange(0, 1.0001, 0.01), 2)
    reps = compare_zd_sse(g, sse, zd, cfg.stubborn, lams, constants=consts)
    return g, sse, zd, cfg.stubborn, consts, reps


def fake_sse(pi, value) -> SSEResult:
    return SSEResult(np.asarray(pi, float), np.zeros(4), float(value), 0.0)


class TestConstants:
    def test_d_one_dominates_samples(self):
        d1 = d_one()
        rng = np.random.default_rng(0)
        p, q1, q2 = rng.random((3, 2000, 4))
        assert press_dyson_cofactors(p, q1, q2).sum(axis=-1).max() <= d1 + 1e-12
        assert d1 == 4.0

    def test_a_range_on_fixture(self, game):
        for p in np.random.default_rng(1).random((50, 4)):
            a = a_constant(game, p)
            assert -1e-12 <= a <= game.u_d[0, 0] - game.u_d[1, 0] + 1e-12

    def test_a_absorbed_convention(self, game):
        assert a_constant(game, [1.0, 0.3, 0.0, 0.6]) == 0.0

    def test_a_matches_stubborn_value(self, game):
        p = np.array([0.7, 0.2, 0.4, 0.9])
        assert a_constant(game, p) == pytest.approx(5.0 - stubborn_utilities(game, p).u_d)

    def test_b_is_max(self, paperlike):
        c = paperlike[4]
        assert c.b_const == max(c.b1, c.b2, 0.5 * c.b3)
        assert c.certified

    def test_certified_dominates_nominal(self, paperlike):
        g, sse, zd, st_, c, _ = paperlike
        nom = compute_constants(g, sse, zd, st_, max_grid_step=None)
        assert not nom.certified
        assert c.b_const >= nom.b_const

    def test_grid_step_domain(self, paperlike):
        g, sse, zd, st_, _, _ = paperlike
        with pytest.raises(InputDomainError):
            compute_constants(g, sse, zd, st_, max_grid_step=0.9)


class TestGamma:
    def test_endpoints(self):
        c = AnalysisConstants(2.0, 1.0, 1.0, 1.0, 1.0, 4.0)
        assert gamma_membership(c, 3.0, 1.0, 1.0)[0]
        assert gamma_membership(c, 3.0, 1.0, 0.0)[1]

    def test_half_by_arithmetic(self):
        c = AnalysisConstants(2.0, 1.5, 0.5, 1.0, 1.5, 4.0)
        g1 = (3.0 - 1.0) * 4.0 / 16 - 2.0 / 16 - 1.5 / 4
        g2 = (1.0 - 3.0) * 4.0 / 16 + 2.0 / 16 - 1.5 / 4
        assert gamma_membership(c, 3.0, 1.0, 0.5) == (g1 >= 0, g2 >= 0)

    @pytest.mark.parametrize("lam", [-0.01, 1.01])
    def test_domain(self, lam):
        with pytest.raises(InputDomainError):
            gamma_membership(AnalysisConstants(0, 0, 0, 0, 0, 4), 1, 1, lam)


class TestCorollaries:
    @given(st.integers(0, 10_000), strategy4, st.floats(0, 10), st.floats(0, 8), st.floats(0.5, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_cor1_implies_gamma1(self, seed, pi, b, u_sse, lam):
        g = random_game(np.random.default_rng(seed))
        c = AnalysisConstants(a_constant(g, pi), b, b, b, b, 4.0)
        sse = fake_sse(pi, u_sse)
        if corollary_check(c, g, sse, lam, "cor1"):
            assert gamma_membership(c, u_sse, g.u_d[0, 1], lam)[0]

    @given(st.integers(0, 10_000), st.floats(0, 5), st.floats(0, 10), st.floats(0, 8), st.floats(0.0, 0.5))
    @settings(max_examples=200, deadline=None)
    def test_cor2_implies_gamma2(self, seed, a, b, u_sse, lam):
        # the U12^d reading; the printed U12^a reading agrees when U12^a <= U12^d
        g = random_game(np.random.default_rng(seed))
        c = AnalysisConstants(a, b, b, b, b, 4.0)
        sse = fake_sse(np.full(4, 0.5), u_sse)
        if corollary_check(c, g, sse, lam, "cor2", alternate=True):
            assert gamma_membership(c, u_sse, g.u_d[0, 1], lam)[1]

    def test_cor1_at_one(self, game):
        c = AnalysisConstants(1.0, 0.5, 0.5, 0.5, 0.5, 4.0)
        sse = fake_sse([0.5] * 4, 3.0)
        rhs = 0.25 * (3.0 - game.u_d[0, 1]) * 4.0 - 0.5
        assert corollary_check(c, game, sse, 1.0, "cor1") == (rhs >= 0)

    def test_cor2_at_zero(self, game):
        sse = fake_sse([0.5] * 4, 3.0)
        assert corollary_check(AnalysisConstants(4.0, 0.9, 0, 0, 0.9, 4.0), game, sse, 0.0, "cor2")
        assert not corollary_check(AnalysisConstants(4.0, 1.1, 0, 0, 1.1, 4.0), game, sse, 0.0, "cor2")

    @pytest.mark.parametrize("which,lam", [("cor1", 0.4), ("cor2", 0.6), ("cor3", 0.5)])
    def test_domain(self, game, which, lam):
        c = AnalysisConstants(1, 1, 1, 1, 1, 4)
        with pytest.raises(InputDomainError):
            corollary_check(c, game, fake_sse([0.5] * 4, 3), lam, which)


class TestHBound:
    def test_at_one_is_stage_loss(self, paperlike):
        g, sse, zd, st_, c, _ = paperlike
        assert h_bound(g, sse, zd, st_, 1.0, constants=c) == pytest.approx(sse.u_d_sse - g.u_d[0, 1], abs=1e-12)

    def test_at_zero_is_minus_a_over_c(self, paperlike):
        g, sse, zd, st_, c, reps = paperlike
        br_s, br_z = best_response(g, sse.pi_d_sse).policy, best_response(g, zd).policy
        c0 = c_value(zd, br_z, sse.pi_d_sse, br_s, st_, 0.0)
        assert h_bound(g, sse, zd, st_, 0.0, constants=c) == pytest.approx(-c.a_const / c0)
        assert reps[0].gap < 0  # ZD ahead against the stubborn attacker

    def test_degenerate_denominator(self, paperlike):
        g, sse, _, st_, c, _ = paperlike
        with pytest.raises(DegenerateError):
            h_bound(g, sse, HAT_PI, st_, 0.0, constants=c)


class TestCompare:
    def test_lambda_zero(self, paperlike):
        g, sse, zd, st_, _, reps = paperlike
        r = reps[0]
        expect = stubborn_utilities(g, sse.pi_d_sse).u_d - stubborn_utilities(g, zd).u_d
        assert r.gap == pytest.approx(expect, abs=1e-9)
        assert r.u_d_zd == pytest.approx(g.u_d[0, 0], abs=1e-9)

    def test_lambda_one_gap(self, paperlike):
        g, sse, _, _, _, reps = paperlike
        assert reps[-1].gap == pytest.approx(sse.u_d_sse - g.u_d[0, 1], abs=1e-9)

    def test_regimes(self, paperlike):
        reps = paperlike[5]
        g2 = [r for r in reps if r.in_gamma2]
        g1 = [r for r in reps if r.in_gamma1]
        assert reps[0].in_gamma2 and reps[-1].in_gamma1
        assert all(r.gap <= 1e-6 for r in g2)
        assert all(r.gap <= max(0.0, r.h_bound) + 1e-6 for r in g1 if not r.c_flag)

    def test_h_bounds_gap_on_gamma1(self, paperlike):
        reps = paperlike[5]
        for r in reps:
            if r.in_gamma1 and round(r.lam * 100) % 5 == 0:
                assert r.gap <= r.h_bound + 1e-6

    def test_empty_grid(self, paperlike):
        g, sse, zd, st_, c, _ = paperlike
        assert compare_zd_sse(g, sse, zd, st_, [], constants=c) == []

    def test_thm3_zd_gets_u11_at_zero(self, paperlike):
        g, sse, _, st_, c, _ = paperlike
        z3, _ = named_zd(g, "thm3")
        r = compare_zd_sse(g, sse, z3, st_, [0.0])[0]
        assert r.u_d_zd == pytest.approx(g.u_d[0, 0], abs=1e-9) and r.gap <= 0


class TestRemainder:
    @given(strategy4, strategy4, unit)
    @settings(max_examples=200, deadline=None)
    def test_g_bound(self, s, z, lam):
        g_ = StageGame([[5, 1], [0, 4]], [[1, 5], [4, 2]])
        r, _, (b1, b2, b3) = remainder_g(g_, s, z, STUBBORN, lam)
        assert abs(r) <= max(b1, b2, 0.5 * b3) * lam * (1 - lam) + 1e-9

    def test_endpoints_vanish(self, game):
        s, z = np.random.default_rng(2).random((2, 4))
        for lam in (0.0, 1.0):
            assert remainder_g(game, s, z, STUBBORN, lam)[0] == pytest.approx(0.0, abs=1e-12)

    def test_delta_matches_direct_gap(self, game):
        rng = np.random.default_rng(3)
        s, z = rng.random((2, 4))
        br_s = best_response(game, s).policy
        br_z = best_response(game, z).policy
        lam = 0.37
        _, delta, _ = remainder_g(game, s, z, STUBBORN, lam, br_s, br_z)
        ms, mz = lam * br_s + (1 - lam) * STUBBORN, lam * br_z + (1 - lam) * STUBBORN
        cs, cz = press_dyson_cofactors(s, ms), press_dyson_cofactors(z, mz)
        direct = (cs @ game.s_d) * (cz @ np.ones(4)) - (cz @ game.s_d) * (cs @ np.ones(4))
        assert delta == pytest.approx(direct, abs=1e-12)


def test_d_one_attained_at_policies():
    pol = DETERMINISTIC_POLICIES
    best = max(press_dyson_cofactors(p, q, r).sum() for p in pol[::5] for q in pol for r in pol[::3])
    assert best <= d_one()
