"""Normal-form games: Blotto(n, c, f), a few builtin matrix games, explicit tensors.

Every game exposes the same payoff-oracle surface:

  * ``payoffs(joint)``           rewards for a batch of pure joint actions, shape (K, n)
  * ``player_tensor(i)``         the dense n-dim reward tensor of player i (dense games only)
  * ``rewards_vs(i, joint)``     reward of each own action against K opponent joint actions
  * ``contract(i, strategies)``  exact expected reward of each own action vs a product profile

Blotto games are symmetric, so the dense backend stores only player 0's tensor and
serves the other players as axis-permuted views.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_MAX_ACTIONS = 2**24
DEFAULT_DENSE_CAP = 2**26

# Dense construction works in chunks of this many joint actions.
_CHUNK = 1 << 20


class ActionSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class BlottoParams:
    n: int
    c: int
    f: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"Blotto needs at least 2 players, got n={self.n}")
        if self.c < 0:
            raise ValueError(f"coin count must be >= 0, got c={self.c}")
        if self.f < 1:
            raise ValueError(f"field count must be >= 1, got f={self.f}")

    @property
    def num_actions(self) -> int:
        return math.comb(self.c + self.f - 1, self.f - 1)

    def label(self) -> str:
        return f"blotto({self.n},{self.c},{self.f})"


def num_allocations(c: int, f: int) -> int:
    return math.comb(c + f - 1, f - 1)


def enumerate_allocations(c: int, f: int, max_actions: int = DEFAULT_MAX_ACTIONS) -> np.ndarray:
    """All ways to split ``c`` coins over ``f`` fields, lexicographically ascending.

    Returns an int array of shape (binomial(c+f-1, f-1), f). Row k is the
    allocation played by action index k.
    """
    if c < 0 or f < 1:
        raise ValueError(f"need c >= 0 and f >= 1, got c={c}, f={f}")
    count = num_allocations(c, f)
    if count > max_actions:
        raise ActionSpaceTooLarge(
            f"action space too large: {count} allocations for c={c}, f={f} (cap {max_actions})"
        )
    if f == 1:
        return np.array([[c]], dtype=np.int64)
    # Stars and bars: ascending bar positions give ascending compositions.
    bars = np.array(list(itertools.combinations(range(c + f - 1), f - 1)), dtype=np.int64)
    bars = bars.reshape(count, f - 1)
    edges = np.concatenate(
        [np.full((count, 1), -1), bars, np.full((count, 1), c + f - 1)], axis=1
    )
    return np.diff(edges, axis=1) - 1


def blotto_rewards(allocations: np.ndarray) -> np.ndarray:
    """Vectorised Blotto rule.

    ``allocations`` has shape (..., n, f). Returns rewards of shape (..., n).
    A field goes to its unique top contributor. Players with the most fields
    share +1, everyone else shares -1, and an n-way tie pays nothing.
    """
    alloc = np.asarray(allocations)
    n = alloc.shape[-2]
    top = alloc.max(axis=-2, keepdims=True)
    is_top = alloc == top
    unique_top = is_top.sum(axis=-2, keepdims=True) == 1
    fields_won = (is_top & unique_top).sum(axis=-1)
    best = fields_won.max(axis=-1, keepdims=True)
    winners = fields_won == best
    n_win = winners.sum(axis=-1, keepdims=True)
    n_lose = n - n_win
    safe_lose = np.where(n_lose == 0, 1, n_lose)
    rewards = np.where(winners, 1.0 / n_win, -1.0 / safe_lose)
    return np.where(n_win == n, 0.0, rewards)


def blotto_payoff(params: BlottoParams, profile) -> np.ndarray:
    """Reward vector for one pure Blotto profile (one allocation per player)."""
    alloc = np.asarray(profile, dtype=np.int64)
    if alloc.shape != (params.n, params.f):
        raise ValueError(
            f"expected {params.n} allocations of length {params.f}, got shape {alloc.shape}"
        )
    if (alloc < 0).any() or (alloc.sum(axis=1) != params.c).any():
        raise ValueError(f"every allocation must be nonnegative and sum to c={params.c}")
    return blotto_rewards(alloc).astype(np.float64)


def _iter_joint_chunks(action_counts, chunk=_CHUNK):
    """Yield (start, joint index array) for all joint actions in C order."""
    total = math.prod(action_counts)
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield start, np.stack(np.unravel_index(flat, action_counts), axis=1)


class Game:
    """Payoff oracle for an n-player normal-form game.

    Use :func:`build_game` rather than constructing directly.
    """

    def __init__(self, action_counts, backend_kind, *, tensor=None, symmetric_tensor=None,
                 blotto=None, name=None, zero_sum=False, symmetric=False, memoize=False):
        self.action_counts = tuple(int(a) for a in action_counts)
        self.num_players = len(self.action_counts)
        self.backend_kind = backend_kind
        self.name = name
        self.zero_sum = zero_sum
        self.symmetric = symmetric
        self.blotto = blotto
        self._tensor = tensor
        self._sym = symmetric_tensor
        self._memo = {} if memoize else None
        if blotto is not None:
            self.allocations = enumerate_allocations(blotto.c, blotto.f)

    @property
    def is_dense(self) -> bool:
        return self._tensor is not None or self._sym is not None

    @property
    def num_joint_actions(self) -> int:
        return math.prod(self.action_counts)

    def player_tensor(self, player: int) -> np.ndarray:
        if self._sym is not None:
            # r_i(a) = r_0(a_i, a_-i); other seats are interchangeable.
            return np.moveaxis(self._sym, 0, player)
        if self._tensor is not None:
            return self._tensor[player]
        raise NotImplementedError("lazy games have no materialised tensor")

    @cached_property
    def payoff_range(self) -> tuple[float, float]:
        if self.is_dense:
            ts = [self.player_tensor(i) for i in range(self.num_players)]
            return float(min(t.min() for t in ts)), float(max(t.max() for t in ts))
        if self.blotto is not None:
            return -1.0, 1.0
        raise NotImplementedError

    def payoffs(self, joint) -> np.ndarray:
        """Rewards for pure joint actions; ``joint`` is (K, n) or (n,)."""
        joint = np.asarray(joint, dtype=np.int64)
        single = joint.ndim == 1
        joint = joint.reshape(-1, self.num_players)
        if self.is_dense:
            idx = tuple(joint.T)
            out = np.stack([self.player_tensor(i)[idx] for i in range(self.num_players)], axis=1)
        else:
            out = self._lazy_payoffs(joint)
        return out[0] if single else out

    def payoff(self, joint) -> np.ndarray:
        return self.payoffs(np.asarray(joint, dtype=np.int64).reshape(self.num_players))

    def _lazy_payoffs(self, joint):
        if self._memo is None:
            return blotto_rewards(self.allocations[joint])
        out = np.empty(joint.shape, dtype=np.float64)
        for k, row in enumerate(map(tuple, joint)):
            hit = self._memo.get(row)
            if hit is None:
                hit = blotto_rewards(self.allocations[list(row)])
                self._memo[row] = hit
            out[k] = hit
        return out

    def rewards_vs(self, player: int, joint) -> np.ndarray:
        """Player's reward for every own action against each opponent part of ``joint``.

        ``joint`` is (K, n); column ``player`` is ignored. Returns (K, |A_player|).
        """
        joint = np.asarray(joint, dtype=np.int64).reshape(-1, self.num_players)
        k, m = joint.shape[0], self.action_counts[player]
        if self.is_dense:
            idx = [joint[:, j][:, None] for j in range(self.num_players)]
            idx[player] = np.arange(m)[None, :]
            return self.player_tensor(player)[tuple(idx)]
        full = np.repeat(joint[:, None, :], m, axis=1)
        full[:, :, player] = np.arange(m)[None, :]
        return self._lazy_payoffs(full.reshape(-1, self.num_players))[:, player].reshape(k, m)

    def contract(self, player: int, strategies) -> np.ndarray:
        """Exact expected reward of each of ``player``'s actions vs the other strategies.

        ``strategies`` holds one probability vector per player; entry ``player``
        is ignored. Opponents are contracted in index order.
        """
        if self.is_dense:
            t = self.player_tensor(player)
            # Contract from the last axis down so remaining axis numbers stay valid.
            for j in reversed(range(self.num_players)):
                if j != player:
                    t = np.tensordot(t, np.asarray(strategies[j], dtype=np.float64), axes=([j], [0]))
            return t
        return self._lazy_contract(player, strategies)

    def _lazy_contract(self, player, strategies):
        supports = []
        for j in range(self.num_players):
            if j == player:
                supports.append(np.array([0]))
            else:
                supports.append(np.flatnonzero(np.asarray(strategies[j]) > 0))
        counts = [len(s) for s in supports]
        out = np.zeros(self.action_counts[player])
        for _, rows in _iter_joint_chunks(counts, chunk=max(1, _CHUNK // self.action_counts[player])):
            joint = np.stack([supports[j][rows[:, j]] for j in range(self.num_players)], axis=1)
            weight = np.ones(len(joint))
            for j in range(self.num_players):
                if j != player:
                    weight *= np.asarray(strategies[j])[joint[:, j]]
            out += weight @ self.rewards_vs(player, joint)
        return out

    def cross_tensor(self, player: int, other: int, strategies) -> np.ndarray:
        """Player's expected reward matrix over (own action, ``other``'s action)."""
        t = self.player_tensor(player)
        for j in reversed(range(self.num_players)):
            if j not in (player, other):
                t = np.tensordot(t, np.asarray(strategies[j], dtype=np.float64), axes=([j], [0]))
        return t if player < other else t.T

    def to_spec(self) -> dict:
        if self.blotto is not None:
            return {"kind": "blotto", "n": self.blotto.n, "c": self.blotto.c, "f": self.blotto.f}
        if self.backend_kind == "builtin":
            return {"kind": "builtin", "name": self.name}
        return {"kind": "dense", "tensor": np.asarray(self._tensor).tolist()}

    def label(self) -> str:
        if self.blotto is not None:
            return self.blotto.label()
        return self.name or f"dense{self.action_counts}"

    def __repr__(self):
        return f"Game({self.label()}, actions={self.action_counts}, backend={self.backend_kind})"


def _blotto_dense_tensor(params: BlottoParams, allocations: np.ndarray) -> np.ndarray:
    m = len(allocations)
    shape = (m,) * params.n
    out = np.empty(math.prod(shape), dtype=np.float64)
    for start, joint in _iter_joint_chunks(shape):
        out[start:start + len(joint)] = blotto_rewards(allocations[joint])[:, 0]
    return out.reshape(shape)


_ROCK_PAPER_SCISSORS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
_MATCHING_PENNIES = np.array([[1.0, -1.0], [-1.0, 1.0]])

BUILTIN_GAMES = {
    # player 0's matrix; player 1 receives the negation
    "rps": _ROCK_PAPER_SCISSORS,
    "matching_pennies": _MATCHING_PENNIES,
}


def build_game(spec, *, dense_cap: int = DEFAULT_DENSE_CAP, memoize: bool = False) -> Game:
    """Build a game from BlottoParams, a builtin name, a dense array, or a JSON-style dict.

    Dense arrays have shape (n, |A_1|, ..., |A_n|). Blotto games with at most
    ``dense_cap`` joint actions are tabulated; larger ones are evaluated lazily.
    """
    if isinstance(spec, dict):
        return build_game(_spec_from_dict(spec), dense_cap=dense_cap, memoize=memoize)
    if isinstance(spec, BlottoParams):
        m = spec.num_actions
        joint = m ** spec.n
        sym = None
        kind = "lazy-blotto"
        if joint <= dense_cap:
            sym = _blotto_dense_tensor(spec, enumerate_allocations(spec.c, spec.f))
            kind = "dense"
        return Game((m,) * spec.n, kind, symmetric_tensor=sym, blotto=spec, name=spec.label(),
                    zero_sum=True, symmetric=True, memoize=memoize and sym is None)
    if isinstance(spec, str):
        if spec not in BUILTIN_GAMES:
            raise ValueError(f"unknown builtin game {spec!r}; choose from {sorted(BUILTIN_GAMES)}")
        a = BUILTIN_GAMES[spec]
        return Game(a.shape, "builtin", tensor=np.stack([a, -a]), name=spec, zero_sum=True,
                    symmetric=spec == "rps")
    tensor = np.asarray(spec, dtype=np.float64)
    if tensor.ndim < 3 or tensor.shape[0] != tensor.ndim - 1:
        raise ValueError(
            f"dense payoff tensor must have shape (n, |A_1|, ..., |A_n|), got {tensor.shape}"
        )
    if not np.isfinite(tensor).all():
        raise ValueError("dense payoff tensor has non-finite entries")
    if tensor[0].size > dense_cap:
        raise ValueError(f"dense payoff tensor exceeds cap of {dense_cap} joint actions")
    zero_sum = bool(np.abs(tensor.sum(axis=0)).max() <= 1e-12)
    return Game(tensor.shape[1:], "dense", tensor=tensor, zero_sum=zero_sum)


def _spec_from_dict(d):
    kind = d.get("kind")
    if kind == "blotto":
        return BlottoParams(int(d["n"]), int(d["c"]), int(d["f"]))
    if kind == "builtin":
        return d["name"]
    if kind == "dense":
        return np.asarray(d["tensor"], dtype=np.float64)
    raise ValueError(f"unknown game kind {kind!r}; expected blotto, dense or builtin")


def payoff_tensor_stats(game: Game) -> dict:
    return {"action_counts": game.action_counts, "joint_actions": game.num_joint_actions}
