"""Best response, max-entropy best response, logit response and Sampled Best Response."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .game import Game
from .strategy import MixedStrategy, expected_reward_vector, sample_joint

CANDIDATE_SOURCES = ("initial", "latest", "uniform_past", "initial+latest", "initial+uniform_past")
BASE_SOURCES = ("latest", "uniform_past")


@dataclass(frozen=True)
class SBRConfig:
    B: int = 10
    C: int = 50
    candidates: str = "initial"
    base: str = "latest"
    exact_mode: bool = False
    tie_tolerance: float = 1e-12
    random_ties: bool = False
    dedup: bool = False
    share_base: bool = False

    def __post_init__(self):
        if self.B < 1 or self.C < 1:
            raise ValueError(f"SBR needs B >= 1 and C >= 1, got B={self.B}, C={self.C}")
        if self.candidates not in CANDIDATE_SOURCES:
            raise ValueError(f"unknown candidate source {self.candidates!r}")
        if self.base not in BASE_SOURCES:
            raise ValueError(f"unknown base source {self.base!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "SBRConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown SBR config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ResponseResult:
    strategy: MixedStrategy
    value: float
    action: int | None = None


def best_actions(values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Indices within ``tol`` of the maximum, ascending."""
    return np.flatnonzero(values >= values.max() - tol)


def softmax(values: np.ndarray, beta: float) -> np.ndarray:
    z = beta * (values - values.max())
    e = np.exp(z)
    return e / e.sum()


def exact_best_response(game: Game, player: int, opponents, tol: float = 1e-12,
                        rng: np.random.Generator | None = None) -> ResponseResult:
    """Pure best response; lowest tied index unless ``rng`` is given for random ties."""
    values = expected_reward_vector(game, player, opponents)
    tied = best_actions(values, tol)
    a = int(tied[0] if rng is None else rng.choice(tied))
    return ResponseResult(MixedStrategy.pure(len(values), a), float(values[a]), a)


def maxent_best_response(game: Game, player: int, opponents, tol: float = 1e-12) -> ResponseResult:
    values = expected_reward_vector(game, player, opponents)
    tied = best_actions(values, tol)
    p = np.zeros(len(values))
    p[tied] = 1.0 / len(tied)
    return ResponseResult(MixedStrategy(p), float(p @ values),
                          int(tied[0]) if len(tied) == 1 else None)


def logit_response(game: Game, player: int, opponents, beta: float) -> ResponseResult:
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"inverse temperature must be finite and >= 0, got {beta}")
    values = expected_reward_vector(game, player, opponents)
    p = softmax(values, beta)
    return ResponseResult(MixedStrategy(p), float(p @ values))


def sbr_select(game: Game, player: int, candidates: np.ndarray, base: np.ndarray,
               tol: float = 1e-12, rng: np.random.Generator | None = None):
    """Batched SBR argmax with common random numbers.

    ``candidates`` is (N, C) action indices and ``base`` is (N, B, n) joint
    actions whose ``player`` column is ignored. Every candidate in row k is
    scored on the same B base profiles of row k. Ties go to the earliest drawn
    candidate (plain argmax over the draw order), or to a random tied
    candidate when ``rng`` is given. Returns (chosen actions (N,), Q-hat of the
    chosen actions (N,)).
    """
    n_rows, n_cand = candidates.shape
    idx = [base[:, None, :, j] for j in range(game.num_players)]
    idx[player] = candidates[:, :, None]
    if game.is_dense:
        q = game.player_tensor(player)[tuple(idx)].mean(axis=2)
    else:
        shape = np.broadcast_shapes(*(a.shape for a in idx))
        joint = np.stack([np.broadcast_to(a, shape) for a in idx], axis=-1)
        q = game.payoffs(joint.reshape(-1, game.num_players))[:, player].reshape(shape).mean(axis=2)
    tied = q >= q.max(axis=1, keepdims=True) - tol
    if rng is None:
        pos = np.argmax(tied, axis=1)
    else:
        pos = np.argmax(np.where(tied, rng.random(q.shape), -1.0), axis=1)
    rows = np.arange(n_rows)
    return candidates[rows, pos], q[rows, pos]


def sampled_best_response(game: Game, player: int, base, candidates: MixedStrategy,
                          cfg: SBRConfig, rng: np.random.Generator,
                          candidate_actions=None) -> ResponseResult:
    """Best of C sampled candidate actions, scored on B sampled base profiles.

    ``candidate_actions`` overrides candidate sampling with an explicit list.
    In ``exact_mode`` each candidate is scored by its exact expected reward
    against ``base`` instead of a Monte-Carlo average, and ties go to the
    lowest action index so the result depends only on the candidate set.
    """
    m = game.action_counts[player]
    if candidate_actions is None:
        probs = candidates.probs if isinstance(candidates, MixedStrategy) else np.asarray(candidates)
        cand = rng.choice(m, size=cfg.C, p=probs)
    else:
        cand = np.asarray(candidate_actions, dtype=np.int64)
    if cfg.dedup:
        _, first = np.unique(cand, return_index=True)
        cand = cand[np.sort(first)]
    tie_rng = rng if cfg.random_ties else None
    if cfg.exact_mode:
        q = expected_reward_vector(game, player, base)[cand]
        tied = cand[q >= q.max() - cfg.tie_tolerance]
        a = int(tied.min() if tie_rng is None else tie_rng.choice(tied))
        value = float(q[np.flatnonzero(cand == a)[0]])
    else:
        profiles = sample_joint(base, rng, size=cfg.B)
        chosen, qv = sbr_select(game, player, cand[None, :], profiles[None], cfg.tie_tolerance,
                                tie_rng)
        a, value = int(chosen[0]), float(qv[0])
    return ResponseResult(MixedStrategy.pure(m, a), value, a)
