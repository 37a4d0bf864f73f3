"""Mixed strategies, product profiles, correlation devices and checkpoint histories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import Game

RENORM_TOL = 1e-9
HARD_TOL = 1e-6


def _as_distribution(probs) -> np.ndarray:
    p = np.array(probs, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValueError("empty probability vector")
    if not np.isfinite(p).all() or (p < -RENORM_TOL).any():
        raise ValueError(f"invalid probabilities {p}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > HARD_TOL:
        raise ValueError(f"probabilities sum to {total}, not 1")
    if total != 1.0:
        p /= total
    return p


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    probs: np.ndarray

    def __post_init__(self):
        p = _as_distribution(self.probs)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, k: int) -> "MixedStrategy":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def pure(cls, k: int, action: int) -> "MixedStrategy":
        p = np.zeros(k)
        p[action] = 1.0
        return cls(p)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def __len__(self):
        return len(self.probs)

    def __eq__(self, other):
        return isinstance(other, MixedStrategy) and np.array_equal(self.probs, other.probs)

    def to_json(self) -> list:
        return self.probs.tolist()


@dataclass(frozen=True, eq=False)
class ProductProfile:
    strategies: tuple

    def __post_init__(self):
        strategies = tuple(
            s if isinstance(s, MixedStrategy) else MixedStrategy(s) for s in self.strategies
        )
        object.__setattr__(self, "strategies", strategies)

    @classmethod
    def uniform(cls, game: Game) -> "ProductProfile":
        return cls(tuple(MixedStrategy.uniform(k) for k in game.action_counts))

    @classmethod
    def pure(cls, game: Game, joint) -> "ProductProfile":
        return cls(tuple(MixedStrategy.pure(k, int(a)) for k, a in zip(game.action_counts, joint)))

    @property
    def num_players(self) -> int:
        return len(self.strategies)

    @property
    def probs(self) -> list:
        return [s.probs for s in self.strategies]

    def __getitem__(self, i) -> MixedStrategy:
        return self.strategies[i]

    def __eq__(self, other):
        return isinstance(other, ProductProfile) and all(
            a == b for a, b in zip(self.strategies, other.strategies)
        ) and self.num_players == other.num_players

    def to_json(self) -> list:
        return [s.to_json() for s in self.strategies]


@dataclass(frozen=True, eq=False)
class CorrelationDevice:
    """A distribution over joint actions.

    Holds a weighted list of product profiles plus a weighted table of pure
    joint actions; the two weight vectors together sum to one. Keeping the
    components separate means expectations never materialise the joint
    distribution, and opponents' correlations survive marginalisation.
    """

    num_players: int
    profiles: tuple = ()
    profile_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    joint_actions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64))
    joint_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        pw = np.asarray(self.profile_weights, dtype=np.float64).reshape(-1)
        jw = np.asarray(self.joint_weights, dtype=np.float64).reshape(-1)
        ja = np.asarray(self.joint_actions, dtype=np.int64).reshape(-1, self.num_players)
        if len(pw) != len(self.profiles) or len(jw) != len(ja):
            raise ValueError("component/weight count mismatch")
        if any(p.num_players != self.num_players for p in self.profiles):
            raise ValueError("profile arity does not match device")
        if (pw < 0).any() or (jw < 0).any():
            raise ValueError("negative component weight")
        total = pw.sum() + jw.sum()
        if abs(total - 1.0) > HARD_TOL:
            raise ValueError(f"device weights sum to {total}, not 1")
        if total != 1.0:
            pw, jw = pw / total, jw / total
        object.__setattr__(self, "profile_weights", pw)
        object.__setattr__(self, "joint_weights", jw)
        object.__setattr__(self, "joint_actions", ja)

    @classmethod
    def from_profile(cls, profile: ProductProfile) -> "CorrelationDevice":
        return cls(profile.num_players, (profile,), np.ones(1))

    @classmethod
    def from_joint_actions(cls, joint_actions, weights=None) -> "CorrelationDevice":
        ja = np.asarray(joint_actions, dtype=np.int64)
        if ja.ndim == 1:
            ja = ja[None, :]
        w = np.full(len(ja), 1.0 / len(ja)) if weights is None else np.asarray(weights, float)
        return cls(ja.shape[1], joint_actions=ja, joint_weights=w)

    @classmethod
    def mixture(cls, parts, weights=None) -> "CorrelationDevice":
        """Flatten a weighted mixture of devices and/or product profiles."""
        parts = [cls.from_profile(p) if isinstance(p, ProductProfile) else p for p in parts]
        if not parts:
            raise ValueError("empty mixture")
        w = np.full(len(parts), 1.0 / len(parts)) if weights is None else np.asarray(weights, float)
        n = parts[0].num_players
        profiles, pws, jas, jws = [], [], [], []
        for wk, d in zip(w, parts):
            if d.num_players != n:
                raise ValueError("mixture components disagree on player count")
            profiles.extend(d.profiles)
            pws.append(wk * d.profile_weights)
            jas.append(d.joint_actions)
            jws.append(wk * d.joint_weights)
        return cls(n, tuple(profiles), np.concatenate(pws),
                   np.concatenate(jas).reshape(-1, n), np.concatenate(jws))

    def marginal(self, player: int, num_actions: int) -> np.ndarray:
        m = np.zeros(num_actions)
        for w, p in zip(self.profile_weights, self.profiles):
            m += w * p.strategies[player].probs
        np.add.at(m, self.joint_actions[:, player], self.joint_weights)
        return m

    def marginals(self, game: Game) -> ProductProfile:
        return ProductProfile(tuple(
            MixedStrategy(self.marginal(i, k)) for i, k in enumerate(game.action_counts)
        ))

    def to_json(self) -> dict:
        return {
            "profiles": [p.to_json() for p in self.profiles],
            "profile_weights": self.profile_weights.tolist(),
            "joint_actions": self.joint_actions.tolist(),
            "joint_weights": self.joint_weights.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict, num_players: int) -> "CorrelationDevice":
        return cls(num_players, tuple(ProductProfile(tuple(p)) for p in d.get("profiles", [])),
                   np.asarray(d.get("profile_weights", []), float),
                   np.asarray(d.get("joint_actions", []), np.int64).reshape(-1, num_players),
                   np.asarray(d.get("joint_weights", []), float))


def as_device(x) -> CorrelationDevice:
    if isinstance(x, CorrelationDevice):
        return x
    if isinstance(x, ProductProfile):
        return CorrelationDevice.from_profile(x)
    raise TypeError(f"cannot treat {type(x).__name__} as a correlation device")


def _check_arity(game: Game, device: CorrelationDevice):
    if device.num_players != game.num_players:
        raise ValueError(
            f"device has {device.num_players} players but the game has {game.num_players}"
        )


def expected_reward_vector(game: Game, player: int, opponents) -> np.ndarray:
    """Expected reward of each of ``player``'s actions against the device's opponents.

    The device's own entries for ``player`` are ignored; the opponents keep
    their joint (possibly correlated) distribution.
    """
    device = as_device(opponents)
    _check_arity(game, device)
    out = np.zeros(game.action_counts[player])
    for w, prof in zip(device.profile_weights, device.profiles):
        out += w * game.contract(player, prof.probs)
    if len(device.joint_actions):
        out += device.joint_weights @ game.rewards_vs(player, device.joint_actions)
    return out


def expected_joint_reward(game: Game, device) -> np.ndarray:
    """Exact expected reward of every player under the device."""
    device = as_device(device)
    _check_arity(game, device)
    out = np.zeros(game.num_players)
    for w, prof in zip(device.profile_weights, device.profiles):
        for i in range(game.num_players):
            out[i] += w * (prof.strategies[i].probs @ game.contract(i, prof.probs))
    if len(device.joint_actions):
        out += device.joint_weights @ game.payoffs(device.joint_actions)
    return out


@dataclass
class PolicyHistory:
    """Checkpoints pi^0 ... pi^t. Each is a ProductProfile or a CorrelationDevice."""

    checkpoints: list = field(default_factory=list)
    # Running-average product profiles after iterations 1..t, when a runner keeps them.
    averages: list = field(default_factory=list)

    def append(self, checkpoint):
        self.checkpoints.append(checkpoint)

    def __len__(self):
        return len(self.checkpoints)

    def __getitem__(self, d):
        return self.checkpoints[d]


def average_history(history: PolicyHistory, t: int) -> CorrelationDevice:
    """Uniform mixture of the first ``t`` checkpoints (one whole joint checkpoint per draw)."""
    if t < 1:
        raise ValueError("cannot average an empty prefix")
    if t > len(history):
        raise ValueError(f"prefix {t} longer than history of length {len(history)}")
    return CorrelationDevice.mixture(history.checkpoints[:t])


def sample_joint(device, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw pure joint actions: pick a component by weight, then each player's action.

    Returns shape (n,) when ``size`` is None, else (size, n).
    """
    device = as_device(device)
    k = 1 if size is None else size
    n = device.num_players
    weights = np.concatenate([device.profile_weights, device.joint_weights])
    comp = rng.choice(len(weights), size=k, p=weights / weights.sum())
    out = np.empty((k, n), dtype=np.int64)
    n_prof = len(device.profiles)
    is_joint = comp >= n_prof
    if is_joint.any():
        out[is_joint] = device.joint_actions[comp[is_joint] - n_prof]
    for c in np.unique(comp[~is_joint]):
        rows = np.flatnonzero(comp == c)
        for i, s in enumerate(device.profiles[c].strategies):
            out[rows, i] = rng.choice(len(s.probs), size=len(rows), p=s.probs)
    return out[0] if size is None else out


def checkpoint_to_json(iteration: int, checkpoint, game: Game) -> dict:
    if isinstance(checkpoint, ProductProfile):
        if all(len(s.support) == 1 for s in checkpoint.strategies):
            return {"iteration": iteration, "pure": [int(s.support[0]) for s in checkpoint.strategies]}
        return {"iteration": iteration, "players": checkpoint.to_json()}
    doc = {"iteration": iteration,
           "players": [checkpoint.marginal(i, k).tolist() for i, k in enumerate(game.action_counts)]}
    doc["device"] = checkpoint.to_json()
    return doc


def checkpoint_from_json(doc: dict, game: Game):
    if "device" in doc:
        return CorrelationDevice.from_json(doc["device"], game.num_players)
    if "pure" in doc:
        return ProductProfile.pure(game, doc["pure"])
    return ProductProfile(tuple(doc["players"]))
