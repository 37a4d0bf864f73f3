"""Equilibrium metrics and the exploitability-descent QRE / epsilon-Nash solver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .game import Game
from .strategy import (MixedStrategy, ProductProfile, as_device, expected_joint_reward,
                       expected_reward_vector)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeviationReport:
    per_player_gain: np.ndarray
    best_deviation_action: np.ndarray
    aggregate: float

    def to_json(self) -> dict:
        return {"aggregate": float(self.aggregate),
                "per_player": [float(g) for g in self.per_player_gain],
                "best_deviation": [int(a) for a in self.best_deviation_action]}


def deviation_report(deviation_values, current_values, clip: bool) -> DeviationReport:
    """Build a report from per-player deviation vectors and current expected rewards."""
    gains = np.array([dv.max() - cv for dv, cv in zip(deviation_values, current_values)])
    best = np.array([int(np.argmax(dv)) for dv in deviation_values])
    agg = float(np.maximum(gains, 0.0).sum() if clip else gains.sum())
    return DeviationReport(gains, best, agg)


def nashconv(game: Game, profile: ProductProfile) -> DeviationReport:
    """Sum over players of the gain from the best unilateral pure deviation (unclipped)."""
    probs = profile.probs
    devs, cur = [], []
    for i in range(game.num_players):
        r = game.contract(i, probs)
        devs.append(r)
        cur.append(float(probs[i] @ r))
    return deviation_report(devs, cur, clip=False)


def ccedist(game: Game, device) -> DeviationReport:
    """Sum over players of the positive part of the best fixed-action deviation gain."""
    device = as_device(device)
    cur = expected_joint_reward(game, device)
    devs = [expected_reward_vector(game, i, device) for i in range(game.num_players)]
    return deviation_report(devs, cur, clip=True)


def external_regret(game: Game, play_sequence, player: int) -> float:
    if not play_sequence:
        raise ValueError("empty play sequence")
    total = np.zeros(game.action_counts[player])
    realised = 0.0
    for profile in play_sequence:
        r = game.contract(player, profile.probs)
        total += r
        realised += profile.probs[player] @ r
    return float(total.max() - realised)


def entropy(strategy) -> float:
    p = strategy.probs if isinstance(strategy, MixedStrategy) else np.asarray(strategy, float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


# --- exploitability descent -------------------------------------------------

@dataclass(frozen=True)
class QreConfig:
    tau: float = 0.0
    learning_rate: float = 0.1
    lr_decay: float = 0.5
    lr_growth: float = 1.5
    max_iters: int = 100_000
    grad_tol: float = 1e-8
    loss_tol: float = 1e-12

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")

    @property
    def beta(self) -> float:
        """Inverse temperature of the matching logit response."""
        return np.inf if self.tau == 0 else 1.0 / self.tau


class QreNotConverged(RuntimeError):
    def __init__(self, residual, loss, profile):
        super().__init__(f"exploitability descent did not converge: loss={loss:.3e}, "
                         f"projected-gradient residual={residual:.3e}")
        self.residual = residual
        self.loss = loss
        self.profile = profile


# Bounds the entropy gradient near the simplex boundary; without it a zero
# coordinate has infinite slope and step-size backtracking never recovers.
_LOG_FLOOR = 1e-12


def _neg_entropy_grad(x):
    return np.log(np.maximum(x, _LOG_FLOOR)) + 1.0


def regularized_exploitability(game: Game, xs, tau: float):
    """Entropy-regularised exploitability and its gradient.

    With ``r_i = r_i(., x_-i)`` the loss is
    ``sum_i [max_p <p, r_i> + tau H(p)] - [<x_i, r_i> + tau H(x_i)]``;
    the max is ``tau * logsumexp(r_i / tau)`` (plain ``max r_i`` at tau = 0).
    The formula is evaluated as written for any positive vectors ``xs``, so it
    can be checked against finite differences off the simplex. Returns
    ``(loss, [grad_0, ..., grad_{n-1}])``.
    """
    n = game.num_players
    xs = [np.asarray(x, dtype=np.float64) for x in xs]
    grads = [np.zeros_like(x) for x in xs]
    loss = 0.0
    for i in range(n):
        r = game.contract(i, xs)
        if tau > 0:
            best = tau * logsumexp(r / tau)
            sigma = np.exp(r / tau - logsumexp(r / tau))
            nz = xs[i][xs[i] > 0]
            h = -(nz * np.log(nz)).sum()
        else:
            best = r.max()
            sigma = np.zeros_like(r)
            sigma[np.argmax(r)] = 1.0
            h = 0.0
        loss += best - (xs[i] @ r + tau * h)
        grads[i] += -r + (tau * _neg_entropy_grad(xs[i]) if tau > 0 else 0.0)
        w = sigma - xs[i]
        for j in range(n):
            if j != i:
                grads[j] += w @ game.cross_tensor(i, j, xs)
    return float(loss), grads


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def qre_solve(game: Game, cfg: QreConfig = QreConfig(), init=None, raise_on_failure=True):
    """Projected gradient descent on regularised exploitability over the product of simplices.

    tau = 0 targets an epsilon-Nash equilibrium, tau > 0 the logit QRE with
    inverse temperature 1/tau. The step size starts at ``learning_rate`` and
    is multiplied by ``lr_decay`` whenever a step would raise the loss (the
    step is then rejected). Converged when the loss drops below ``loss_tol``
    or the projected-gradient residual below ``grad_tol``.
    """
    if init is None:
        xs = [np.full(k, 1.0 / k) for k in game.action_counts]
    else:
        xs = [np.asarray(p, dtype=np.float64).copy() for p in init.probs]
    loss, grads = regularized_exploitability(game, xs, cfg.tau)
    lr = cfg.learning_rate
    residual = np.inf
    for it in range(cfg.max_iters):
        residual = max(np.abs(x - project_simplex(x - g)).max() for x, g in zip(xs, grads))
        if loss <= cfg.loss_tol or residual <= cfg.grad_tol:
            break
        trial = [project_simplex(x - lr * g) for x, g in zip(xs, grads)]
        t_loss, t_grads = regularized_exploitability(game, trial, cfg.tau)
        if t_loss <= loss:
            xs, loss, grads = trial, t_loss, t_grads
            lr = min(lr * cfg.lr_growth, cfg.learning_rate)
        else:
            lr *= cfg.lr_decay
            if lr < 1e-30:
                break
    profile = ProductProfile(tuple(MixedStrategy(x) for x in xs))
    if loss > cfg.loss_tol and residual > cfg.grad_tol:
        if raise_on_failure:
            raise QreNotConverged(residual, loss, profile)
        log.warning("qre_solve stopped early: loss=%.3e residual=%.3e", loss, residual)
    return profile


def zero_sum_qre(a, tau: float, tol: float = 1e-10, max_iters: int = 1_000_000):
    """Logit QRE of the matrix game where the row player gets ``a`` and the column player ``-a``.

    Entropy-regularised extragradient in log space: with step
    ``eta = 1 / (tau + 2 max|a|)`` the iterates contract at rate ``1 - eta tau``,
    and probabilities far below float resolution stay representable, which
    exploitability descent cannot manage at small tau. Stops once both
    strategies match the logit response to the other within ``tol``.
    Returns ``(row_strategy, column_strategy)`` as arrays.
    """
    a = np.asarray(a, dtype=np.float64)
    if not tau > 0:
        raise ValueError(f"zero_sum_qre needs tau > 0, got {tau}")
    eta = 1.0 / (tau + 2.0 * max(np.abs(a).max(), 1e-12))
    keep = 1.0 - eta * tau

    def normalise(logits):
        return logits - logsumexp(logits)

    lx = np.full(a.shape[0], -math.log(a.shape[0]))
    ly = np.full(a.shape[1], -math.log(a.shape[1]))
    residual = np.inf
    for it in range(max_iters):
        x, y = np.exp(lx), np.exp(ly)
        if it % 10 == 0:
            residual = max(np.abs(x - np.exp(normalise(a @ y / tau))).max(),
                           np.abs(y - np.exp(normalise(-a.T @ x / tau))).max())
            if residual <= tol:
                return x, y
        xb = np.exp(normalise(keep * lx + eta * (a @ y)))
        yb = np.exp(normalise(keep * ly - eta * (a.T @ x)))
        lx = normalise(keep * lx + eta * (a @ yb))
        ly = normalise(keep * ly - eta * (a.T @ xb))
    x, y = np.exp(lx), np.exp(ly)
    raise QreNotConverged(residual, float("nan"), ProductProfile((MixedStrategy(x), MixedStrategy(y))))
