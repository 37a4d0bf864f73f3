import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from brpi.game import BlottoParams, build_game
from brpi.metrics import (QreConfig, QreNotConverged, ccedist, entropy, external_regret, nashconv,
                          project_simplex, qre_solve, regularized_exploitability, zero_sum_qre)
from brpi.strategy import CorrelationDevice, MixedStrategy, ProductProfile
from conftest import random_dense_game, random_profile
import oracles


def _idx(game, alloc):
    return int(np.flatnonzero((game.allocations == alloc).all(axis=1))[0])


def test_nashconv_examples(blotto2):
    rps = build_game("rps")
    assert abs(nashconv(rps, ProductProfile.uniform(rps)).aggregate) <= 1e-12
    mp = build_game("matching_pennies")
    rep = nashconv(mp, ProductProfile.pure(mp, [0, 0]))
    assert rep.aggregate == 2.0 and rep.per_player_gain.tolist() == [0.0, 2.0]
    a = _idx(blotto2, [10, 0, 0])
    assert nashconv(blotto2, ProductProfile.pure(blotto2, [a, a])).aggregate == 2.0


def test_ccedist_examples():
    rps = build_game("rps")
    assert abs(ccedist(rps, ProductProfile.uniform(rps)).aggregate) <= 1e-12
    mp = build_game("matching_pennies")
    assert ccedist(mp, CorrelationDevice.from_joint_actions([0, 0])).aggregate == 2.0
    rep = ccedist(mp, CorrelationDevice.from_joint_actions([[0, 0], [1, 1]]))
    assert rep.aggregate == pytest.approx(1.0)
    assert rep.per_player_gain.tolist() == pytest.approx([-1.0, 1.0])
    assert rep.to_json()["aggregate"] == pytest.approx(1.0)


def test_metrics_match_enumeration():
    rng = np.random.default_rng(31)
    for _ in range(60):
        game, tensor = random_dense_game(rng, max_actions=5)
        probs = random_profile(rng, game.action_counts, sparse=True)
        prof = ProductProfile(tuple(probs))
        assert abs(nashconv(game, prof).aggregate - oracles.nashconv(tensor, probs)) <= 1e-9
        joints = np.stack([rng.integers(0, k, size=6) for k in game.action_counts], axis=1)
        w = rng.dirichlet(np.ones(6))
        dev = CorrelationDevice.from_joint_actions(joints, w)
        dist = {}
        for j, p in zip(map(tuple, joints), w):
            dist[j] = dist.get(j, 0.0) + p
        total, gains = oracles.ccedist(tensor, dist)
        rep = ccedist(game, dev)
        assert abs(rep.aggregate - total) <= 1e-9
        assert np.abs(rep.per_player_gain - gains).max() <= 1e-9


def test_singleton_ccedist_is_clipped_nashconv():
    rng = np.random.default_rng(3)
    for _ in range(40):
        game, _ = random_dense_game(rng)
        prof = ProductProfile(tuple(random_profile(rng, game.action_counts)))
        nc = nashconv(game, prof)
        assert nc.aggregate >= -1e-9
        assert abs(ccedist(game, prof).aggregate - np.maximum(nc.per_player_gain, 0).sum()) <= 1e-12


def test_scale_covariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        game, tensor = random_dense_game(rng)
        s = float(rng.uniform(0.1, 10))
        scaled = build_game(tensor * s)
        prof = ProductProfile(tuple(random_profile(rng, game.action_counts)))
        a, b = nashconv(game, prof), nashconv(scaled, prof)
        assert b.aggregate == pytest.approx(s * a.aggregate, rel=1e-12, abs=1e-12)
        assert (a.best_deviation_action == b.best_deviation_action).all()
        assert ccedist(scaled, prof).aggregate == pytest.approx(s * ccedist(game, prof).aggregate,
                                                                rel=1e-12, abs=1e-12)


def test_external_regret_examples():
    mp = build_game("matching_pennies")
    seq = [ProductProfile.pure(mp, [0, 1])] * 7
    assert external_regret(mp, seq, 0) == 14.0
    const = [ProductProfile.pure(mp, [1, 1])] * 5
    assert external_regret(mp, const, 0) == 0.0
    with pytest.raises(ValueError):
        external_regret(mp, [], 0)


def test_regret_identity_on_random_sequences():
    rng = np.random.default_rng(8)
    for _ in range(50):
        game, _ = random_dense_game(rng, max_actions=5)
        seq = [ProductProfile(tuple(random_profile(rng, game.action_counts))) for _ in range(5)]
        dev = CorrelationDevice.mixture(seq)
        eps = ccedist(game, dev).per_player_gain
        for i in range(game.num_players):
            assert abs(eps[i] - external_regret(game, seq, i) / len(seq)) <= 1e-9


def test_entropy():
    assert entropy(MixedStrategy.pure(4, 2)) == 0.0
    assert entropy(MixedStrategy.uniform(7)) == pytest.approx(math.log(7))
    assert entropy([0.75, 0.25]) == pytest.approx(-(0.75 * math.log(0.75) + 0.25 * math.log(0.25)))
    assert entropy([0.75, 0.25]) == pytest.approx(0.5623351446, abs=1e-9)


@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
@settings(max_examples=300, deadline=None)
def test_project_simplex_is_nearest_point(v):
    p = project_simplex(v)
    assert abs(p.sum() - 1) <= 1e-9 and (p >= 0).all()
    rng = np.random.default_rng(0)
    d = np.linalg.norm(v - p)
    for q in rng.dirichlet(np.ones(len(v)), size=50):
        assert d <= np.linalg.norm(v - q) + 1e-9


def _loss(game, xs, tau):
    return regularized_exploitability(game, xs, tau)[0]


@pytest.mark.parametrize("tau", [0.0, 0.3])
def test_gradient_matches_finite_differences(tau):
    rng = np.random.default_rng(17)
    tensor = rng.normal(size=(3, 2, 3, 2))
    game = build_game(tensor)
    h = 1e-6
    for _ in range(20):
        xs = [rng.uniform(0.2, 1.0, size=k) for k in game.action_counts]
        xs = [x / x.sum() for x in xs]
        _, grads = regularized_exploitability(game, xs, tau)
        for i, x in enumerate(xs):
            for a in range(len(x)):
                up = [y.copy() for y in xs]
                dn = [y.copy() for y in xs]
                up[i][a] += h
                dn[i][a] -= h
                fd = (_loss(game, up, tau) - _loss(game, dn, tau)) / (2 * h)
                assert abs(grads[i][a] - fd) <= 1e-5 * max(1.0, abs(fd))


def test_qre_rps_uniform():
    rps = build_game("rps")
    for tau in (0.01, 1.0, 100.0):
        prof = qre_solve(rps, QreConfig(tau=tau), init=ProductProfile(([0.6, 0.3, 0.1], [0.2, 0.2, 0.6])))
        for p in prof.probs:
            assert np.abs(p - 1 / 3).max() <= 1e-6


def test_qre_large_tau_is_uniform():
    rng = np.random.default_rng(2)
    game, _ = random_dense_game(rng, n=2, max_actions=5)
    prof = qre_solve(game, QreConfig(tau=1e4))
    for p in prof.probs:
        assert np.abs(p - 1 / len(p)).max() <= 1e-3


def test_qre_matching_pennies_nash():
    mp = build_game("matching_pennies")
    prof = qre_solve(mp, QreConfig(tau=0.0), init=ProductProfile(([0.9, 0.1], [0.3, 0.7])))
    assert nashconv(mp, prof).aggregate <= 1e-4


def test_qre_matches_damped_fixed_point():
    a = np.array([[2.0, -1.0], [-0.5, 1.0]])
    game = build_game(np.stack([a, -a]))
    prof = qre_solve(game, QreConfig(tau=1.0))
    x, y = oracles.damped_logit_fixed_point(a, -a, 1.0)
    assert np.abs(prof.probs[0] - x).max() <= 1e-5
    assert np.abs(prof.probs[1] - y).max() <= 1e-5


def _assert_logit_fixed_point(game, prof, tau):
    for i in range(game.num_players):
        r = game.contract(i, prof.probs)
        soft = np.exp((r - r.max()) / tau)
        assert np.abs(prof.probs[i] - soft / soft.sum()).max() <= 1e-4


def test_qre_fixed_point_on_random_zero_sum_games():
    rng = np.random.default_rng(41)
    for _ in range(10):
        a = rng.normal(size=(int(rng.integers(2, 6)), int(rng.integers(2, 6))))
        game = build_game(np.stack([a, -a]))
        tau = float(rng.uniform(0.1, 1.0))
        _assert_logit_fixed_point(game, qre_solve(game, QreConfig(tau=tau)), tau)


def test_qre_general_sum_converges_or_reports():
    # Descent can stall at a non-equilibrium stationary point outside
    # two-player zero-sum games; that must surface as an error.
    rng = np.random.default_rng(41)
    for _ in range(4):
        game, _ = random_dense_game(rng, n=3, max_actions=3)
        try:
            prof = qre_solve(game, QreConfig(tau=0.5, max_iters=5000))
        except QreNotConverged as err:
            assert err.loss > 0
            continue
        _assert_logit_fixed_point(game, prof, 0.5)


def test_qre_reports_non_convergence():
    game = build_game(BlottoParams(2, 4, 3))
    with pytest.raises(QreNotConverged) as err:
        qre_solve(game, QreConfig(tau=0.0, max_iters=3))
    assert err.value.residual > 0
    prof = qre_solve(game, QreConfig(tau=0.0, max_iters=3), raise_on_failure=False)
    assert len(prof.probs) == 2
    with pytest.raises(ValueError):
        QreConfig(tau=-1.0)
    assert QreConfig(tau=0.25).beta == 4.0


def test_zero_sum_qre_matches_oracle_and_descent():
    rng = np.random.default_rng(23)
    for _ in range(10):
        a = rng.normal(size=(int(rng.integers(2, 6)), int(rng.integers(2, 6))))
        tau = float(rng.uniform(0.1, 1.0))
        x, y = zero_sum_qre(a, tau)
        ox, oy = oracles.damped_logit_fixed_point(a, -a, tau)
        assert np.abs(x - ox).max() <= 1e-6 and np.abs(y - oy).max() <= 1e-6
        prof = qre_solve(build_game(np.stack([a, -a])), QreConfig(tau=tau))
        assert np.abs(x - prof.probs[0]).max() <= 1e-5


def test_zero_sum_qre_small_tau():
    # Equilibrium mass on the dominated rows is far below float resolution of a linear scale.
    a = np.array([[0.0, -0.37, -0.19], [0.37, 0.0, -0.07], [0.19, 0.07, 0.0]])
    x, y = zero_sum_qre(a, 0.01)
    for p, r in ((x, a @ y), (y, -a.T @ x)):
        soft = np.exp((r - r.max()) / 0.01)
        assert np.abs(p - soft / soft.sum()).max() <= 1e-9
    assert np.allclose(x, y, atol=1e-9)
    with pytest.raises(ValueError):
        zero_sum_qre(a, 0.0)
    with pytest.raises(QreNotConverged):
        zero_sum_qre(a, 0.01, max_iters=5)
