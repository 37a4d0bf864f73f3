"""Learning dynamics: FP, IBR, MaxEnt-IBR, SFP, FP+SBR and sample-based BRPI.

All runners share one loop. At iteration t every player responds, simultaneously,
to checkpoints pi^0 .. pi^{t-1}; the joint response becomes pi^t. pi^0 is the
uniform profile and is part of every average.

Exact metrics are kept incrementally: for each checkpoint we add its per-player
deviation vector ``r_i(., pi^d_-i)`` and expected reward to running sums, so the
average-policy CCEDist at t costs one checkpoint's worth of work. The
``average`` trace kind evaluates the uniform mixture of pi^0 .. pi^t (NashConv on
the product of its marginals); ``current`` evaluates pi^t alone.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import seeding
from .game import Game
from .metrics import deviation_report
from .responses import SBRConfig, best_actions, sbr_select, softmax
from .strategy import CorrelationDevice, MixedStrategy, PolicyHistory, ProductProfile

ALGORITHMS = ("fp", "ibr", "maxent_ibr", "sfp", "fp_sbr", "brpi")
RESPONSES = ("exact", "maxent", "logit")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    wall_ms: float
    nashconv: float
    ccedist: float
    eps: tuple
    policy_kind: str


@dataclass
class RunTrace:
    num_players: int
    rows: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        if name.startswith("eps_"):
            k = int(name[4:])
            return np.array([r.eps[k] for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows])

    def header(self) -> list:
        return (["iteration", "wall_ms", "nashconv", "ccedist"]
                + [f"eps_{i}" for i in range(self.num_players)] + ["policy_kind"])

    def to_csv(self, record_wall_time: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.rows:
            wall = repr(float(r.wall_ms)) if record_wall_time else "0"
            w.writerow([r.iteration, wall, repr(float(r.nashconv)), repr(float(r.ccedist))]
                       + [repr(float(e)) for e in r.eps] + [r.policy_kind])
        return buf.getvalue()


@dataclass(frozen=True)
class DynamicsConfig:
    algorithm: str
    iterations: int
    response: str = "exact"
    beta: float | None = None
    sbr: SBRConfig | None = None
    samples_per_iteration: int = 1
    seed: int = 0
    metric_cadence: int | None = None
    evaluate: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm: unknown algorithm {self.algorithm!r}; "
                             f"choose from {list(ALGORITHMS)}")
        if self.iterations < 1:
            raise ValueError(f"iterations: must be >= 1, got {self.iterations}")
        if self.response not in RESPONSES:
            raise ValueError(f"response: unknown response {self.response!r}")
        if self.algorithm == "sfp" and self.beta is None:
            raise ValueError("beta: sfp needs an inverse temperature")
        if self.algorithm in ("fp_sbr", "brpi") and self.sbr is None:
            raise ValueError(f"sbr: {self.algorithm} needs an SBR config")
        if self.samples_per_iteration < 1:
            raise ValueError("samples_per_iteration: must be >= 1")
        if self.evaluate not in (None, "average", "current"):
            raise ValueError(f"evaluate: expected average or current, got {self.evaluate!r}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["sbr"] = None if self.sbr is None else self.sbr.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "DynamicsConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"dynamics: unknown fields {sorted(unknown)}")
        if d.get("sbr") is not None:
            d["sbr"] = SBRConfig.from_json(d["sbr"])
        return cls(**d)


def default_cadence(game: Game) -> int:
    return 1 if game.num_joint_actions <= 10**6 else 10


class _Accumulator:
    """Running sums over checkpoints for exact metrics and FP responses."""

    def __init__(self, game: Game):
        self.game = game
        n = game.num_players
        self.count = 0
        self.dev = [np.zeros(k) for k in game.action_counts]
        self.val = np.zeros(n)
        self.marg = [np.zeros(k) for k in game.action_counts]
        self.last = None

    def contribution(self, checkpoint):
        g = self.game
        devs, vals, margs = [], np.zeros(g.num_players), []
        if isinstance(checkpoint, ProductProfile):
            probs = checkpoint.probs
            for i in range(g.num_players):
                r = g.contract(i, probs)
                devs.append(r)
                vals[i] = probs[i] @ r
                margs.append(probs[i])
        else:
            ja, w = checkpoint.joint_actions, checkpoint.joint_weights
            pay = g.payoffs(ja)
            for i, k in enumerate(g.action_counts):
                devs.append(w @ g.rewards_vs(i, ja))
                vals[i] = w @ pay[:, i]
                margs.append(checkpoint.marginal(i, k))
        return devs, vals, margs

    def add(self, checkpoint):
        c = self.contribution(checkpoint)
        devs, vals, margs = c
        for i in range(self.game.num_players):
            self.dev[i] += devs[i]
            self.marg[i] += margs[i]
        self.val += vals
        self.count += 1
        self.last = c

    def average_profile(self) -> ProductProfile:
        return ProductProfile(tuple(MixedStrategy(m / self.count) for m in self.marg))

    def evaluate(self, kind: str):
        g = self.game
        if kind == "average":
            devs = [d / self.count for d in self.dev]
            vals = self.val / self.count
            margs = [m / self.count for m in self.marg]
        else:
            devs, vals, margs = self.last
        cce = deviation_report(devs, vals, clip=True)
        nc = 0.0
        for i in range(g.num_players):
            r = g.contract(i, margs)
            nc += r.max() - margs[i] @ r
        return nc, cce


class _Engine:
    """Shared iteration loop; subclasses implement ``respond(t)``."""

    kind = "average"

    def __init__(self, game: Game, T: int, seed: int = 0, cadence: int | None = None,
                 history: PolicyHistory | None = None, callback=None, keep_averages=True):
        self.game = game
        self.T = T
        self.seed = seed
        self.cadence = cadence or default_cadence(game)
        self.callback = callback
        self.keep_averages = keep_averages
        self.acc = _Accumulator(game)
        self.history = PolicyHistory()
        self.trace = RunTrace(game.num_players)
        self._resume = list(history.checkpoints) if history is not None else []

    def rng(self, *counters):
        return seeding.stream(self.seed, seeding.DYNAMICS, *counters)

    def _commit(self, t, checkpoint, start):
        self.history.append(checkpoint)
        self.acc.add(checkpoint)
        self.on_commit(t, checkpoint)
        if t == 0:
            if self.callback:
                self.callback(0, checkpoint)
            return
        if self.kind == "average" and self.keep_averages:
            self.history.averages.append(self.acc.average_profile())
        if t % self.cadence == 0 or t == self.T:
            nc, cce = self.acc.evaluate(self.kind)
            wall = (time.perf_counter() - start) * 1000.0
            self.trace.rows.append(TraceRow(t, wall, nc, cce.aggregate,
                                            tuple(float(e) for e in cce.per_player_gain),
                                            self.kind))
        if self.callback:
            self.callback(t, checkpoint)

    def on_commit(self, t, checkpoint):
        pass

    def run(self):
        start = time.perf_counter()
        initial = self._resume[0] if self._resume else ProductProfile.uniform(self.game)
        self._commit(0, initial, start)
        for t in range(1, self.T + 1):
            cp = self._resume[t] if t < len(self._resume) else self.respond(t)
            self._commit(t, cp, start)
        return self.history, self.trace


class _TabularEngine(_Engine):
    """FP / SFP / IBR / MaxEnt-IBR with exact expected-reward responses."""

    def __init__(self, game, T, response="exact", beta=None, average=True, tol=1e-12, **kw):
        super().__init__(game, T, **kw)
        self.response = response
        self.beta = beta
        self.average = average
        self.tol = tol
        self.kind = "average" if average else "current"

    def respond(self, t):
        strategies = []
        for i, k in enumerate(self.game.action_counts):
            values = self.acc.dev[i] / self.acc.count if self.average else self.acc.last[0][i]
            if self.response == "logit":
                p = softmax(values, self.beta)
            else:
                tied = best_actions(values, self.tol)
                if self.response == "exact":
                    tied = tied[:1]
                p = np.zeros(k)
                p[tied] = 1.0 / len(tied)
            strategies.append(MixedStrategy(p))
        return ProductProfile(tuple(strategies))


class _SampledEngine(_Engine):
    """FP+SBR and BRPI: N joint SBR samples per iteration drawn from past checkpoints.

    Checkpoints after pi^0 are stored in a (T, N, n) table of pure joint
    actions so base and candidate draws from any past iteration are one
    fancy-index away. pi^0 is the uniform profile.
    """

    def __init__(self, game, T, sbr: SBRConfig, N=1, kind="average", product_checkpoints=False,
                 **kw):
        super().__init__(game, T, **kw)
        self.sbr = sbr
        self.N = N
        self.kind = kind
        self.product_checkpoints = product_checkpoints
        self.table = np.zeros((T, N, game.num_players), dtype=np.int64)
        self.counts = np.asarray(game.action_counts)

    def on_commit(self, t, checkpoint):
        if t == 0:
            return
        if isinstance(checkpoint, ProductProfile):
            self.table[t - 1, 0] = [int(np.argmax(p)) for p in checkpoint.probs]
        else:
            self.table[t - 1] = checkpoint.joint_actions

    def _draw(self, ds, rng):
        """Joint actions from checkpoints ``ds`` (any shape); returns ds.shape + (n,)."""
        ds = np.asarray(ds)
        n = self.game.num_players
        uniform = (rng.random(ds.shape + (n,)) * self.counts).astype(np.int64)
        rows = rng.integers(0, self.N, size=ds.shape)
        past = self.table[np.maximum(ds - 1, 0), rows]
        return np.where((ds == 0)[..., None], uniform, past)

    def _checkpoint_ids(self, source, t, size, rng):
        if source == "latest":
            return np.full(size, t - 1)
        return rng.integers(0, t, size=size)

    def _candidates(self, player, t, rng):
        N, C = self.N, self.sbr.C
        src = self.sbr.candidates
        m = self.game.action_counts[player]
        if src == "initial":
            return rng.integers(0, m, size=(N, C))
        if "+" in src:
            n_init = math.ceil(C / 2)
            init = rng.integers(0, m, size=(N, n_init))
            other = src.split("+")[1]
            ds = self._checkpoint_ids(other, t, (N, C - n_init), rng)
            return np.concatenate([init, self._draw(ds, rng)[..., player]], axis=1)
        ds = self._checkpoint_ids(src, t, (N, C), rng)
        return self._draw(ds, rng)[..., player]

    def _base(self, t, rng):
        ds = self._checkpoint_ids(self.sbr.base, t, (self.N, self.sbr.B), rng)
        return self._draw(ds, rng)

    def respond(self, t):
        g = self.game
        joint = np.empty((self.N, g.num_players), dtype=np.int64)
        shared = self._base(t, self.rng(t, g.num_players)) if self.sbr.share_base else None
        for i in range(g.num_players):
            rng = self.rng(t, i)
            base = shared if shared is not None else self._base(t, rng)
            cand = self._candidates(i, t, rng)
            tie_rng = rng if self.sbr.random_ties else None
            joint[:, i], _ = sbr_select(g, i, cand, base, self.sbr.tie_tolerance, tie_rng)
        if self.product_checkpoints:
            return ProductProfile.pure(g, joint[0])
        return CorrelationDevice.from_joint_actions(joint)


def _check_T(T):
    if T < 1:
        raise ValueError(f"need at least one iteration, got T={T}")


def run_fp(game: Game, T: int, response: str = "exact", beta: float | None = None, **kw):
    """Fictitious play; ``response`` is exact, maxent or logit (stochastic FP, needs beta)."""
    _check_T(T)
    if response == "logit" and beta is None:
        raise ValueError("logit responses need beta")
    return _TabularEngine(game, T, response=response, beta=beta, average=True, **kw).run()


def run_ibr(game: Game, T: int, response: str = "exact", **kw):
    """Iterated best response: the newest response replaces the policy."""
    _check_T(T)
    if response not in ("exact", "maxent"):
        raise ValueError(f"IBR supports exact or maxent responses, got {response!r}")
    return _TabularEngine(game, T, response=response, average=False, **kw).run()


def run_fp_sbr(game: Game, T: int, sbr: SBRConfig, **kw):
    """FP whose best response is replaced by one SBR sample per player per iteration.

    Base profiles come from the running average (uniform past checkpoint) and
    candidates are uniform over actions, whatever ``sbr`` says about sources.
    """
    _check_T(T)
    sbr = SBRConfig(**{**sbr.to_json(), "candidates": "initial", "base": "uniform_past"})
    return _SampledEngine(game, T, sbr, N=1, kind="average", product_checkpoints=True, **kw).run()


def run_brpi(game: Game, T: int, sbr: SBRConfig, N: int, evaluate: str | None = None, **kw):
    """Sample-based BRPI: pi^t is the empirical joint distribution of N SBR samples.

    By default the trace evaluates the policy the players respond to: the
    uniform mixture of pi^0 .. pi^t for a uniform-past base, pi^t itself for a
    latest base. A single N-sample device has a finite-sample CCEDist floor
    (about 0.2 on Blotto(3,10,3) at N=1000) that hides differences between
    settings, which the mixture averages away.
    """
    _check_T(T)
    if N < 1:
        raise ValueError("N must be >= 1")
    kind = evaluate or ("average" if sbr.base == "uniform_past" else "current")
    return _SampledEngine(game, T, sbr, N=N, kind=kind, keep_averages=False, **kw).run()


def run_dynamics(game: Game, cfg: DynamicsConfig, history=None, callback=None):
    kw = dict(seed=cfg.seed, cadence=cfg.metric_cadence, history=history, callback=callback)
    a = cfg.algorithm
    if a == "fp":
        return run_fp(game, cfg.iterations, response=cfg.response, beta=cfg.beta, **kw)
    if a == "sfp":
        return run_fp(game, cfg.iterations, response="logit", beta=cfg.beta, **kw)
    if a == "ibr":
        return run_ibr(game, cfg.iterations, response=cfg.response, **kw)
    if a == "maxent_ibr":
        return run_ibr(game, cfg.iterations, response="maxent", **kw)
    if a == "fp_sbr":
        return run_fp_sbr(game, cfg.iterations, cfg.sbr, **kw)
    return run_brpi(game, cfg.iterations, cfg.sbr, cfg.samples_per_iteration,
                    evaluate=cfg.evaluate, **kw)


def trailing_mean(values, fraction: float = 0.2, minimum: int = 50) -> float:
    """Mean over the last ``fraction`` of a series, at least ``minimum`` points."""
    values = np.asarray(values, dtype=np.float64)
    k = min(len(values), max(minimum, int(math.ceil(fraction * len(values)))))
    return float(values[-k:].mean())
