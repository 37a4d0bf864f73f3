"""Checkpoint evaluation: one-vs-rest tables, Nash leagues, SBR exploit bounds, Wilson intervals.

A checkpoint enters a meta-game through its per-player marginals; in a
symmetric game those are averaged over seats so a checkpoint is one mixed
strategy usable in any seat.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from . import seeding
from .game import Game
from .metrics import QreConfig, qre_solve, zero_sum_qre
from .responses import SBRConfig, sbr_select
from .strategy import CorrelationDevice, MixedStrategy, ProductProfile, sample_joint

DEFAULT_TAUS = (0.01, 0.05, 0.1)
MAX_FULL_META_CHECKPOINTS = 8


def wilson_interval(successes: float, trials: int, confidence: float = 0.95):
    """Continuity-corrected Wilson score interval, clamped to [0, 1].

    ``successes`` may be fractional (scores already scaled to [0, 1]).
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must lie in [0, {trials}], got {successes}")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    n = float(trials)
    p = successes / n
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    z2 = z * z
    denom = 2 * (n + z2)
    if p == 0:
        lower = 0.0
    else:
        lower = (2 * n * p + z2 - 1 - z * math.sqrt(max(z2 - 2 - 1 / n + 4 * p * (n * (1 - p) + 1), 0.0))) / denom
    if p == 1:
        upper = 1.0
    else:
        upper = (2 * n * p + z2 + 1 + z * math.sqrt(max(z2 + 2 - 1 / n + 4 * p * (n * (1 - p) - 1), 0.0))) / denom
    return max(0.0, lower), min(1.0, upper)


def checkpoint_strategies(game: Game, checkpoint) -> list:
    """Per-seat probability vectors for a checkpoint (seat-averaged in symmetric games)."""
    if isinstance(checkpoint, MixedStrategy):
        probs = [checkpoint.probs] * game.num_players
    elif isinstance(checkpoint, ProductProfile):
        probs = list(checkpoint.probs)
    elif isinstance(checkpoint, CorrelationDevice):
        probs = [checkpoint.marginal(i, k) for i, k in enumerate(game.action_counts)]
    else:
        probs = [np.asarray(p, dtype=np.float64) for p in checkpoint]
    if len(probs) != game.num_players:
        raise ValueError(f"checkpoint has {len(probs)} seats, game has {game.num_players}")
    if game.symmetric:
        avg = np.mean(probs, axis=0)
        probs = [avg] * game.num_players
    return [np.asarray(p, dtype=np.float64) for p in probs]


@dataclass
class MetaGameTable:
    """One-vs-rest payoffs: entry (r, c) is checkpoint r in one seat versus c in the rest."""

    labels: list
    one_vs_rest: np.ndarray
    estimation: dict
    stderr: np.ndarray | None = None
    confidence: np.ndarray | None = None
    # player 0's payoff over checkpoint choices of every seat, when built
    full_meta: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.labels)

    def restrict(self, k: int) -> "MetaGameTable":
        sl = slice(0, k)
        full = None
        if self.full_meta is not None:
            full = self.full_meta[(sl,) * self.full_meta.ndim]
        return MetaGameTable(self.labels[:k], self.one_vs_rest[sl, sl], dict(self.estimation),
                             None if self.stderr is None else self.stderr[sl, sl],
                             None if self.confidence is None else self.confidence[sl, sl],
                             full)

    def to_csv(self) -> str:
        """Tidy cells: one (row, column, value[, stderr, lower, upper]) per line."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        mc = self.confidence is not None
        w.writerow(["row", "column", "value"] + (["stderr", "lower", "upper"] if mc else []))
        for r, c in itertools.product(range(self.size), repeat=2):
            cells = [self.labels[r], self.labels[c], repr(float(self.one_vs_rest[r, c]))]
            if mc:
                cells += [repr(float(self.stderr[r, c])), repr(float(self.confidence[r, c, 0])),
                          repr(float(self.confidence[r, c, 1]))]
            w.writerow(cells)
        return buf.getvalue()


def _full_meta_tensor(game: Game, strategies: list) -> np.ndarray:
    """Player 0's expected reward for every assignment of checkpoints to seats."""
    k, n = len(strategies), game.num_players
    out = np.empty((k,) * n)
    for combo in itertools.product(range(k), repeat=n):
        probs = [strategies[c][j] for j, c in enumerate(combo)]
        out[combo] = probs[0] @ game.contract(0, probs)
    return out


def build_one_vs_rest_table(game: Game, checkpoints, mode: str = "exact", samples: int = 10_000,
                            seed: int = 0, seat: int | None = None, labels=None,
                            full_meta: bool = False, confidence_level: float = 0.95
                            ) -> MetaGameTable:
    """Expected reward of checkpoint r in one seat against checkpoint c in all other seats.

    ``mode`` is ``"exact"`` or ``"monte_carlo"``. Exact entries need a
    symmetric game or an explicit ``seat``; Monte-Carlo entries draw a uniform
    random seat per sample (unless ``seat`` is fixed) and carry a standard
    error and a Wilson interval. ``full_meta`` also tabulates the n-seat game
    over checkpoint choices (exact, at most eight checkpoints).
    """
    if mode not in ("exact", "monte_carlo"):
        raise ValueError(f"unknown estimation mode {mode!r}; expected exact or monte_carlo")
    if mode == "exact" and seat is None and not game.symmetric:
        raise ValueError("exact one-vs-rest tables of an asymmetric game need an explicit seat")
    if seat is not None and not 0 <= seat < game.num_players:
        raise ValueError(f"seat {seat} out of range for {game.num_players} players")
    strategies = [checkpoint_strategies(game, cp) for cp in checkpoints]
    k, n = len(strategies), game.num_players
    if k == 0:
        raise ValueError("no checkpoints")
    labels = list(labels) if labels is not None else [str(i) for i in range(k)]
    table = np.zeros((k, k))
    if mode == "exact":
        s = 0 if seat is None else seat
        for r, c in itertools.product(range(k), repeat=2):
            probs = [strategies[c][j] for j in range(n)]
            probs[s] = strategies[r][s]
            table[r, c] = probs[s] @ game.contract(s, probs)
        est = {"mode": "exact", "seat": seat}
        stderr = conf = None
    else:
        if samples < 2:
            raise ValueError("monte_carlo mode needs at least 2 samples per cell")
        lo, hi = game.payoff_range
        span = hi - lo if hi > lo else 1.0
        stderr = np.zeros((k, k))
        conf = np.zeros((k, k, 2))
        for r, c in itertools.product(range(k), repeat=2):
            rng = seeding.stream(seed, seeding.METAGAME, r, c)
            seats = (rng.integers(0, n, size=samples) if seat is None
                     else np.full(samples, seat))
            joint = np.empty((samples, n), dtype=np.int64)
            for j in range(n):
                mine = rng.choice(game.action_counts[j], size=samples, p=strategies[r][j])
                theirs = rng.choice(game.action_counts[j], size=samples, p=strategies[c][j])
                joint[:, j] = np.where(seats == j, mine, theirs)
            values = game.payoffs(joint)[np.arange(samples), seats]
            table[r, c] = values.mean()
            stderr[r, c] = values.std(ddof=1) / math.sqrt(samples)
            frac = float(np.clip((values - lo) / span, 0.0, 1.0).sum())
            a, b = wilson_interval(frac, samples, confidence_level)
            conf[r, c] = (lo + a * span, lo + b * span)
        est = {"mode": "monte_carlo", "samples": samples, "seed": seed, "seat": seat}
    meta = None
    if full_meta:
        if mode != "exact" or not game.symmetric:
            raise ValueError("the full meta-game is built only in exact mode for symmetric games")
        if k > MAX_FULL_META_CHECKPOINTS:
            raise ValueError(f"full meta-game limited to {MAX_FULL_META_CHECKPOINTS} checkpoints, got {k}")
        meta = _full_meta_tensor(game, strategies)
    return MetaGameTable(labels, table, est, stderr, conf, meta)


def meta_game(table: MetaGameTable) -> Game:
    """The symmetric game between checkpoints.

    Uses the full n-seat tensor when the table carries one; otherwise the
    two-seat game whose row payoff is the one-vs-rest table.
    """
    sym = table.full_meta if table.full_meta is not None else table.one_vs_rest
    return Game((table.size,) * sym.ndim, "dense", symmetric_tensor=np.asarray(sym, float),
                name="meta", symmetric=True)


@dataclass
class NashLeague:
    rows: list = field(default_factory=list)
    tau: float = 0.1
    labels: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"tau": self.tau, "labels": list(self.labels),
                "rows": [np.asarray(r).tolist() for r in self.rows]}

    def final(self) -> np.ndarray:
        return np.asarray(self.rows[-1])


def _league_row(table: MetaGameTable, tau: float, cfg: QreConfig | None) -> np.ndarray:
    if table.size == 1:
        return np.ones(1)
    m = table.one_vs_rest
    # Two seats with antisymmetric payoffs form a zero-sum matrix game, which
    # has a dedicated solver that stays accurate at small tau.
    if table.full_meta is None and np.abs(m + m.T).max() <= 1e-9 * max(1.0, np.abs(m).max()):
        x, y = zero_sum_qre(m, tau)
        row = 0.5 * (x + y)
        return row / row.sum()
    qcfg = cfg if cfg is not None else QreConfig(tau=tau)
    if qcfg.tau != tau:
        qcfg = QreConfig(**{**qcfg.__dict__, "tau": tau})
    profile = qre_solve(meta_game(table), qcfg)
    row = np.mean(profile.probs, axis=0)
    return row / row.sum()


def nash_league(table: MetaGameTable, tau: float, cfg: QreConfig | None = None) -> NashLeague:
    """For each prefix of checkpoints, the seat-averaged QRE of the restricted meta-game."""
    if not tau > 0:
        raise ValueError(f"the Nash league needs tau > 0, got {tau}")
    rows = [_league_row(table.restrict(i), tau, cfg) for i in range(1, table.size + 1)]
    return NashLeague(rows, tau, list(table.labels))


def nash_league_grid(table: MetaGameTable, taus=DEFAULT_TAUS, cfg: QreConfig | None = None) -> dict:
    return {float(t): nash_league(table, t, cfg) for t in taus}


@dataclass(frozen=True)
class ExploitResult:
    margin: float
    interval: tuple
    exploiter_value: float
    baseline: float
    episodes: int

    def to_json(self) -> dict:
        return {"margin": self.margin, "lower": self.interval[0], "upper": self.interval[1],
                "exploiter_value": self.exploiter_value, "baseline": self.baseline,
                "episodes": self.episodes}


def sbr_exploit_lower_bound(game: Game, target, exploiter: SBRConfig, episodes: int,
                            seed: int = 0, seat: int | None = None, candidates=None,
                            confidence: float = 0.95) -> ExploitResult:
    """Gain of an SBR exploiter seated against copies of ``target``.

    Each episode draws B opponent profiles from ``target`` and C candidates
    (uniform over actions unless ``candidates`` gives a distribution), picks
    the SBR action and scores it by its exact expected reward. The margin is
    the mean score minus the target's own value in that seat, so it never
    exceeds the exact best-response gain. Seats are uniform at random unless
    ``seat`` is fixed.
    """
    if episodes < 1:
        raise ValueError("need at least one episode")
    n = game.num_players
    probs = checkpoint_strategies(game, target)
    profile = ProductProfile(tuple(MixedStrategy(p) for p in probs))
    rng = seeding.stream(seed, seeding.EVALUATION, 0)
    seats = rng.integers(0, n, size=episodes) if seat is None else np.full(episodes, seat)
    values = np.empty(episodes)
    baselines = np.empty(episodes)
    for s in np.unique(seats):
        rows = np.flatnonzero(seats == s)
        m = game.action_counts[s]
        r = game.contract(int(s), probs)
        cand_p = (np.full(m, 1.0 / m) if candidates is None
                  else np.asarray(candidates.probs if isinstance(candidates, MixedStrategy)
                                  else candidates, dtype=np.float64))
        cand = rng.choice(m, size=(len(rows), exploiter.C), p=cand_p)
        base = sample_joint(profile, rng, size=len(rows) * exploiter.B).reshape(
            len(rows), exploiter.B, n)
        tie_rng = rng if exploiter.random_ties else None
        chosen, _ = sbr_select(game, int(s), cand, base, exploiter.tie_tolerance, tie_rng)
        values[rows] = r[chosen]
        baselines[rows] = probs[s] @ r
    lo, hi = game.payoff_range
    span = hi - lo if hi > lo else 1.0
    frac = float(np.clip((values - lo) / span, 0.0, 1.0).sum())
    a, b = wilson_interval(frac, episodes, confidence)
    base_mean = float(baselines.mean())
    value = float(values.mean())
    return ExploitResult(value - base_mean, (lo + a * span - base_mean, lo + b * span - base_mean),
                         value, base_mean, episodes)
