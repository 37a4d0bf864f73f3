import math
from statistics import NormalDist

import numpy as np
import pytest
from scipy.optimize import brentq

from brpi.game import build_game
from brpi.metagame import (MetaGameTable, build_one_vs_rest_table, checkpoint_strategies,
                           nash_league, nash_league_grid, sbr_exploit_lower_bound, wilson_interval)
from brpi.responses import SBRConfig
from brpi.strategy import MixedStrategy, ProductProfile
from conftest import random_profile


def _wilson_cc_by_root_finding(x, n, conf):
    """Interval of p with |x/n - p| - 1/(2n) <= z sqrt(p(1-p)/n), found numerically."""
    z = NormalDist().inv_cdf(0.5 + conf / 2)
    ph = x / n
    f = lambda p: abs(ph - p) - 1 / (2 * n) - z * math.sqrt(p * (1 - p) / n)
    lo = 0.0 if ph == 0 or f(0.0) <= 0 else brentq(f, 0.0, ph, xtol=1e-14)
    hi = 1.0 if ph == 1 or f(1.0) <= 0 else brentq(f, ph, 1.0, xtol=1e-14)
    return lo, hi


@pytest.mark.parametrize("x,n", [(0, 10), (1, 10), (5, 10), (9, 10), (10, 10), (17, 50), (3, 1000),
                                 (250, 251)])
def test_wilson_matches_root_finding(x, n):
    lo, hi = wilson_interval(x, n, 0.95)
    rlo, rhi = _wilson_cc_by_root_finding(x, n, 0.95)
    assert lo == pytest.approx(rlo, abs=1e-9)
    assert hi == pytest.approx(rhi, abs=1e-9)


def test_wilson_examples():
    assert wilson_interval(0, 10)[0] == 0.0
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(1 - hi, abs=1e-12)
    for bad in [(-1, 10), (11, 10), (0, 0)]:
        with pytest.raises(ValueError):
            wilson_interval(*bad)
    with pytest.raises(ValueError):
        wilson_interval(1, 10, 1.5)


def test_wilson_coverage():
    rng = np.random.default_rng(0)
    hits = 0
    reps = 10_000
    for x in rng.binomial(50, 0.3, size=reps):
        lo, hi = wilson_interval(int(x), 50)
        hits += lo <= 0.3 <= hi
    assert hits / reps >= 0.93


def test_identical_checkpoints_give_zero_table(blotto3):
    p = MixedStrategy(np.random.default_rng(1).dirichlet(np.ones(66)))
    table = build_one_vs_rest_table(blotto3, [p, p, p])
    assert np.abs(table.one_vs_rest).max() <= 1e-12


def test_two_player_table_is_payoff_matrix():
    rps = build_game("rps")
    rng = np.random.default_rng(3)
    xs = [MixedStrategy(rng.dirichlet(np.ones(3))) for _ in range(4)]
    table = build_one_vs_rest_table(rps, xs)
    a = rps.player_tensor(0)
    for r in range(4):
        for c in range(4):
            assert table.one_vs_rest[r, c] == pytest.approx(xs[r].probs @ a @ xs[c].probs, abs=1e-15)
            assert abs(table.one_vs_rest[r, c] + table.one_vs_rest[c, r]) <= 1e-12


def test_exact_matches_monte_carlo(blotto3):
    rng = np.random.default_rng(5)
    cps = [ProductProfile(tuple(random_profile(rng, blotto3.action_counts))) for _ in range(3)]
    exact = build_one_vs_rest_table(blotto3, cps)
    mc = build_one_vs_rest_table(blotto3, cps, mode="monte_carlo", samples=100_000, seed=1)
    assert (np.abs(exact.one_vs_rest - mc.one_vs_rest) <= 4 * mc.stderr).all()
    assert (mc.confidence[..., 0] <= mc.one_vs_rest).all() and (mc.one_vs_rest <= mc.confidence[..., 1]).all()
    again = build_one_vs_rest_table(blotto3, cps, mode="monte_carlo", samples=2000, seed=1)
    assert np.array_equal(again.one_vs_rest,
                          build_one_vs_rest_table(blotto3, cps, mode="monte_carlo", samples=2000, seed=1).one_vs_rest)


def test_asymmetric_exact_needs_seat():
    mp = build_game("matching_pennies")
    cps = [ProductProfile.uniform(mp)]
    with pytest.raises(ValueError):
        build_one_vs_rest_table(mp, cps)
    assert build_one_vs_rest_table(mp, cps, seat=1).one_vs_rest.shape == (1, 1)
    with pytest.raises(ValueError):
        build_one_vs_rest_table(mp, cps, mode="bootstrap")


def test_symmetric_checkpoints_are_seat_averaged(blotto3):
    rng = np.random.default_rng(0)
    prof = ProductProfile(tuple(random_profile(rng, blotto3.action_counts)))
    strategies = checkpoint_strategies(blotto3, prof)
    assert all(np.array_equal(s, strategies[0]) for s in strategies)
    assert np.allclose(strategies[0], np.mean(prof.probs, axis=0))


def _table(m):
    k = len(m)
    return MetaGameTable([str(i) for i in range(k)], np.asarray(m, float), {"mode": "exact"})


def test_league_examples():
    assert nash_league(_table([[0.0]]), 0.1).rows[0].tolist() == [1.0]
    flat = nash_league(_table(np.zeros((5, 5))), 0.05)
    for row in flat.rows:
        assert np.allclose(row, 1 / len(row), atol=1e-12)
    with pytest.raises(ValueError):
        nash_league(_table([[0.0]]), 0.0)


def test_transitive_league_and_idempotence():
    k = 6
    m = np.sign(np.subtract.outer(np.arange(k), np.arange(k))) * 0.5
    table = _table(m)
    for tau, league in nash_league_grid(table).items():
        assert len(league.rows) == k
        for i, row in enumerate(league.rows):
            assert len(row) == i + 1 and abs(row.sum() - 1) <= 1e-9
            assert int(np.argmax(row)) == i
        again = nash_league(table.restrict(4), tau)
        assert np.array_equal(again.rows[-1], league.rows[3])


def test_full_meta_game_league(blotto3):
    rng = np.random.default_rng(2)
    cps = [MixedStrategy(rng.dirichlet(np.ones(66))) for _ in range(3)]
    table = build_one_vs_rest_table(blotto3, cps, full_meta=True)
    assert table.full_meta.shape == (3, 3, 3)
    # One seat against two copies of the same checkpoint is the one-vs-rest entry.
    for r in range(3):
        for c in range(3):
            assert table.full_meta[r, c, c] == pytest.approx(table.one_vs_rest[r, c], abs=1e-12)
    league = nash_league(table, 0.1)
    assert abs(league.final().sum() - 1) <= 1e-9


def test_exploit_examples():
    rps = build_game("rps")
    res = sbr_exploit_lower_bound(rps, ProductProfile.uniform(rps), SBRConfig(B=2, C=3), 2000)
    assert abs(res.margin) <= 1e-12
    assert res.interval[0] <= 0 <= res.interval[1]
    mp = build_game("matching_pennies")
    res = sbr_exploit_lower_bound(mp, ProductProfile.pure(mp, [0, 0]), SBRConfig(B=1, C=8), 200, seat=1)
    assert res.exploiter_value == 1.0 and res.baseline == -1.0 and res.margin == 2.0


def test_exploit_self_play_is_neutral():
    rps = build_game("rps")
    target = MixedStrategy([0.5, 0.3, 0.2])
    res = sbr_exploit_lower_bound(rps, target, SBRConfig(B=4, C=1), 4000, candidates=target)
    assert res.interval[0] <= 0 <= res.interval[1]


def test_exploit_never_exceeds_best_response_gain():
    rng = np.random.default_rng(11)
    for trial in range(500):
        k = int(rng.integers(2, 5))
        a = rng.normal(size=(k, k))
        game = build_game(np.stack([a, -a]))
        target = ProductProfile(tuple(random_profile(rng, game.action_counts)))
        seat = int(rng.integers(2))
        res = sbr_exploit_lower_bound(game, target, SBRConfig(B=int(rng.integers(1, 5)), C=int(rng.integers(1, 5))),
                                      20, seed=trial, seat=seat)
        r = game.contract(seat, target.probs)
        assert res.margin <= r.max() - target.probs[seat] @ r + 1e-12
