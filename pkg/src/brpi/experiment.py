"""Experiment runner: configs, run directories, resumable checkpoints and plot-ready CSV.

Layout of a run directory::

    config.json
    RUNNING                      present until every stage has finished
    runs/<name>/seed<k>/checkpoints/NNNNNN.json   blocks of iterations, named by last one
    runs/<name>/seed<k>/trace.csv                 metrics; deterministic body
    runs/<name>/seed<k>/timing.csv                wall-clock per traced iteration
    metagame/table.csv, metagame/league.json
    plots/*.csv

Every CSV starts with a ``# config_hash=...`` line. Files are written to a
temporary name and renamed into place, so readers never see partial files.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dynamics import DynamicsConfig, run_dynamics, trailing_mean
from .game import Game, build_game
from .metagame import DEFAULT_TAUS, build_one_vs_rest_table, nash_league, sbr_exploit_lower_bound
from .strategy import (MixedStrategy, PolicyHistory, ProductProfile, checkpoint_from_json,
                       checkpoint_to_json)

log = logging.getLogger(__name__)

MARKER = "RUNNING"
PLOT_KINDS = ("convergence", "heatmap", "league", "bars")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the offending field."""


@dataclass(frozen=True)
class RunSpec:
    name: str
    dynamics: DynamicsConfig

    def to_json(self) -> dict:
        return {"name": self.name, "dynamics": self.dynamics.to_json()}


@dataclass(frozen=True)
class MetaGameStage:
    run: str
    selection: str = "exponential"
    count: int = 6
    mode: str = "exact"
    samples: int = 10_000
    taus: tuple = DEFAULT_TAUS
    full_meta: bool = False

    def __post_init__(self):
        if self.selection not in ("exponential", "linear"):
            raise ConfigError(f"metagame.selection: expected exponential or linear, got {self.selection!r}")
        if self.count < 1:
            raise ConfigError("metagame.count: must be >= 1")
        if self.mode not in ("exact", "monte_carlo"):
            raise ConfigError(f"metagame.mode: expected exact or monte_carlo, got {self.mode!r}")
        if not self.taus or any(t <= 0 for t in self.taus):
            raise ConfigError("metagame.taus: need at least one positive temperature")
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))


@dataclass(frozen=True)
class ExperimentConfig:
    game: dict
    runs: tuple
    output_dir: str = "runs"
    seed: int = 0
    replicates: int = 1
    metric_cadence: int | None = None
    checkpoint_every: int = 100
    record_wall_time: bool = False
    metagame: MetaGameStage | None = None
    name: str | None = None

    def __post_init__(self):
        if not isinstance(self.game, dict) or "kind" not in self.game:
            raise ConfigError("game: expected an object with a 'kind' field")
        if not self.runs:
            raise ConfigError("runs: need at least one run")
        names = [r.name for r in self.runs]
        if len(set(names)) != len(names):
            raise ConfigError(f"runs: duplicate run names {names}")
        if self.replicates < 1:
            raise ConfigError("replicates: must be >= 1")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every: must be >= 1")
        if self.metric_cadence is not None and self.metric_cadence < 1:
            raise ConfigError("metric_cadence: must be >= 1")
        if self.metagame is not None and self.metagame.run not in names:
            raise ConfigError(f"metagame.run: no run named {self.metagame.run!r}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["runs"] = [r.to_json() for r in self.runs]
        if self.metagame is not None:
            d["metagame"]["taus"] = list(self.metagame.taus)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown config field")
        if "game" not in d or "runs" not in d:
            raise ConfigError(f"{'game' if 'game' not in d else 'runs'}: required field missing")
        runs = []
        for i, r in enumerate(d["runs"]):
            try:
                dyn = DynamicsConfig.from_json(r["dynamics"])
            except KeyError as e:
                raise ConfigError(f"runs[{i}].{e.args[0]}: required field missing") from None
            except (TypeError, ValueError) as e:
                raise ConfigError(f"runs[{i}].dynamics.{e}") from None
            runs.append(RunSpec(str(r.get("name", f"{dyn.algorithm}{i}")), dyn))
        d["runs"] = tuple(runs)
        if d.get("metagame") is not None:
            try:
                d["metagame"] = MetaGameStage(**d["metagame"])
            except TypeError as e:
                raise ConfigError(f"metagame: {e}") from None
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def config_hash(self) -> str:
        """Hash of everything that affects results (the output location does not)."""
        d = self.to_json()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def run_dir(self) -> Path:
        return Path(self.output_dir) / (self.name or f"exp-{self.config_hash()}")


# --- file helpers ------------------------------------------------------------

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _with_header(config_hash: str, body: str) -> str:
    return f"# config_hash={config_hash}\n{body}"


def read_csv_body(path) -> list:
    """Rows of a CSV written by this module, header comment stripped."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# --- checkpoints ---------------------------------------------------------------

def _checkpoint_files(ckpt_dir: Path) -> list:
    return sorted(ckpt_dir.glob("[0-9]*.json")) if ckpt_dir.is_dir() else []


def load_history(run_path, game: Game) -> PolicyHistory:
    """Checkpoints saved so far for one run, in iteration order."""
    history = PolicyHistory()
    for f in _checkpoint_files(Path(run_path) / "checkpoints"):
        for doc in json.loads(f.read_text()):
            if doc["iteration"] != len(history):
                raise RuntimeError(f"{f}: expected iteration {len(history)}, found {doc['iteration']}")
            history.append(checkpoint_from_json(doc, game))
    return history


class _CheckpointWriter:
    def __init__(self, path: Path, game: Game, every: int, T: int, start: int):
        self.dir = path / "checkpoints"
        self.game = game
        self.every = every
        self.T = T
        self.start = start
        self.block = []

    def __call__(self, t, checkpoint):
        if t < self.start:
            return
        self.block.append(checkpoint_to_json(t, checkpoint, self.game))
        if (t + 1) % self.every == 0 or t == self.T:
            _atomic_write(self.dir / f"{t:06d}.json", json.dumps(self.block))
            self.block = []


def checkpoint_policy(history: PolicyHistory, t: int, kind: str, game: Game) -> ProductProfile:
    """The policy a run stands for at iteration t.

    Average-kind runs (FP family, uniform-past BRPI) are represented by the
    mean of the per-player marginals of checkpoints 0..t; current-kind runs by
    the marginals of checkpoint t.
    """
    def marg(cp):
        if isinstance(cp, ProductProfile):
            return cp.probs
        return [cp.marginal(i, k) for i, k in enumerate(game.action_counts)]

    if kind == "current":
        return ProductProfile(tuple(MixedStrategy(p) for p in marg(history[t])))
    sums = [np.zeros(k) for k in game.action_counts]
    for d in range(t + 1):
        for i, p in enumerate(marg(history[d])):
            sums[i] += p
    return ProductProfile(tuple(MixedStrategy(s / (t + 1)) for s in sums))


def select_checkpoints(T: int, count: int, selection: str = "exponential") -> list:
    """Iterations 1..T spaced exponentially (or linearly); always includes T."""
    if selection == "linear":
        pts = np.linspace(1, T, count)
    else:
        pts = np.geomspace(1, T, count)
    return sorted(set(int(round(p)) for p in pts))


# --- running -------------------------------------------------------------------

def _run_one(game_spec: dict, dyn: DynamicsConfig, path: str, config_hash: str,
             every: int, record_wall_time: bool) -> str:
    path = Path(path)
    game = build_game(game_spec)
    history = load_history(path, game)
    # Replayed checkpoints are not rewritten; counter-based streams make the
    # continuation draw exactly what an uninterrupted run would.
    start = len(history)
    if start:
        log.info("resuming %s from iteration %d", path, start)
    writer = _CheckpointWriter(path, game, every, dyn.iterations, start)
    _, trace = run_dynamics(game, dyn, history=history if start else None, callback=writer)
    _atomic_write(path / "trace.csv",
                  _with_header(config_hash, trace.to_csv(record_wall_time=record_wall_time)))
    timing = _csv_text(["iteration", "wall_ms"],
                       [[r.iteration, repr(float(r.wall_ms))] for r in trace.rows])
    _atomic_write(path / "timing.csv", _with_header(config_hash, timing))
    return str(path)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BRPI_WORKERS", "1")))
    except ValueError:
        raise ConfigError("BRPI_WORKERS: expected a positive integer") from None


def run_paths(config: ExperimentConfig, root: Path | None = None) -> list:
    root = root or config.run_dir()
    out = []
    for spec in config.runs:
        for r in range(config.replicates):
            out.append((spec, config.seed + r, root / "runs" / spec.name / f"seed{config.seed + r}"))
    return out


def run_experiment(config: ExperimentConfig) -> Path:
    """Run every configured dynamics run (and the meta-game stage); returns the run directory."""
    root = config.run_dir()
    root.mkdir(parents=True, exist_ok=True)
    cfg_path = root / "config.json"
    if cfg_path.exists():
        existing = ExperimentConfig.from_json(json.loads(cfg_path.read_text()))
        if existing.config_hash() != config.config_hash():
            raise ConfigError(f"output_dir: {root} holds a run of a different config")
    _atomic_write(cfg_path, json.dumps(config.to_json(), indent=2, sort_keys=True))
    (root / MARKER).write_text(config.config_hash())
    h = config.config_hash()
    jobs = []
    for spec, seed, path in run_paths(config, root):
        dyn = DynamicsConfig.from_json({**spec.dynamics.to_json(), "seed": seed})
        if config.metric_cadence is not None:
            dyn = DynamicsConfig.from_json({**dyn.to_json(), "metric_cadence": config.metric_cadence})
        if (path / "trace.csv").exists():
            continue
        jobs.append((config.game, dyn, str(path), h, config.checkpoint_every, config.record_wall_time))
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(_run_one, *job) for job in jobs]:
                f.result()
    else:
        for job in jobs:
            _run_one(*job)
    if config.metagame is not None:
        run_metagame(root, config)
    (root / MARKER).unlink()
    return root


def _run_kind(game: Game, dyn: DynamicsConfig) -> str:
    if dyn.evaluate is not None:
        return dyn.evaluate
    if dyn.algorithm in ("ibr", "maxent_ibr"):
        return "current"
    if dyn.algorithm == "brpi" and dyn.sbr.base == "latest":
        return "current"
    return "average"


def stage_checkpoints(root: Path, config: ExperimentConfig, game: Game, stage: MetaGameStage):
    spec = next(r for r in config.runs if r.name == stage.run)
    path = root / "runs" / spec.name / f"seed{config.seed}"
    history = load_history(path, game)
    if len(history) <= spec.dynamics.iterations:
        raise RuntimeError(f"run {spec.name!r} has no complete checkpoint history at {path}")
    iters = select_checkpoints(spec.dynamics.iterations, stage.count, stage.selection)
    kind = _run_kind(game, spec.dynamics)
    return iters, [checkpoint_policy(history, t, kind, game) for t in iters]


def run_metagame(root, config: ExperimentConfig | None = None, taus=None) -> Path:
    """One-vs-rest table and Nash leagues for the configured run's checkpoints."""
    root = Path(root)
    config = config or ExperimentConfig.load(root / "config.json")
    stage = config.metagame or MetaGameStage(run=config.runs[0].name)
    game = build_game(config.game)
    iters, policies = stage_checkpoints(root, config, game, stage)
    table = build_one_vs_rest_table(game, policies, mode=stage.mode, samples=stage.samples,
                                    seed=config.seed, labels=[str(t) for t in iters],
                                    full_meta=stage.full_meta)
    h = config.config_hash()
    out = root / "metagame"
    _atomic_write(out / "table.csv", _with_header(h, table.to_csv()))
    leagues = {str(t): nash_league(table, t).to_json() for t in (taus or stage.taus)}
    _atomic_write(out / "league.json", json.dumps(
        {"config_hash": h, "checkpoints": iters, "leagues": leagues}, indent=2))
    return out


# --- plot data -----------------------------------------------------------------

def available_stages(root) -> list:
    root = Path(root)
    stages = []
    if list(root.glob("runs/*/*/trace.csv")):
        stages.append("dynamics")
    if (root / "metagame" / "table.csv").exists():
        stages.append("heatmap")
    if (root / "metagame" / "league.json").exists():
        stages.append("league")
    return stages


class MissingStage(RuntimeError):
    pass


def _require(root, stage, kind):
    have = available_stages(root)
    if stage not in have:
        raise MissingStage(f"{kind} plot data needs the {stage!r} stage; "
                           f"available stages in {root}: {have or 'none'}")


def _game_label(config_path: Path) -> str:
    cfg = json.loads(config_path.read_text())
    g = cfg["game"]
    if g.get("kind") == "blotto":
        return f"Blotto({g['n']},{g['c']},{g['f']})"
    return g.get("name", g.get("kind"))


def emit_plot_data(root, kind: str) -> list:
    """Write tidy CSV for one figure kind under ``root/plots``; returns the paths written."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {list(PLOT_KINDS)}")
    root = Path(root)
    plots = root / "plots"
    written = []
    if kind == "convergence":
        _require(root, "dynamics", kind)
        for trace in sorted(root.glob("runs/*/*/trace.csv")):
            rows = read_csv_body(trace)
            timing = {r["iteration"]: r["wall_ms"] for r in read_csv_body(trace.with_name("timing.csv"))}
            metrics = [k for k in rows[0] if k not in ("iteration", "wall_ms", "policy_kind")]
            out = [[r["iteration"], timing.get(r["iteration"], r["wall_ms"]), m, r[m]]
                   for r in rows for m in metrics]
            name = f"convergence__{trace.parent.parent.name}__{trace.parent.name}.csv"
            _atomic_write(plots / name, _csv_text(["iteration", "wall_ms", "metric", "value"], out))
            written.append(plots / name)
    elif kind == "heatmap":
        _require(root, "heatmap", kind)
        rows = read_csv_body(root / "metagame" / "table.csv")
        out = [[r["row"], r["column"], r["value"]] for r in rows]
        _atomic_write(plots / "heatmap.csv", _csv_text(["row", "column", "value"], out))
        written.append(plots / "heatmap.csv")
    elif kind == "league":
        _require(root, "league", kind)
        doc = json.loads((root / "metagame" / "league.json").read_text())
        labels = doc["checkpoints"]
        for tau, league in doc["leagues"].items():
            out = [[i + 1, labels[j], repr(float(p))]
                   for i, row in enumerate(league["rows"]) for j, p in enumerate(row)]
            name = f"league__tau{tau}.csv"
            _atomic_write(plots / name, _csv_text(["prefix", "checkpoint", "mass"], out))
            written.append(plots / name)
    else:
        traces = sorted(root.rglob("runs/*/*/trace.csv"))
        if not traces:
            raise MissingStage(f"bars plot data needs at least one finished run under {root}; "
                               f"available stages: {available_stages(root) or 'none'}")
        groups = {}
        for trace in traces:
            exp_root = trace.parents[3]
            game = _game_label(exp_root / "config.json")
            scheme = trace.parent.parent.name
            values = [float(r["ccedist"]) for r in read_csv_body(trace)]
            groups.setdefault((game, scheme), []).append(trailing_mean(values))
        out = [[g, s, repr(float(np.mean(v))), len(v)] for (g, s), v in sorted(groups.items())]
        _atomic_write(plots / "bars.csv", _csv_text(["game", "scheme", "plateau_ccedist", "seeds"], out))
        written.append(plots / "bars.csv")
    return written


def exploit_checkpoint(root, t: int, sbr, episodes: int, seed: int = 0, run: str | None = None):
    """SBR exploit lower bound for the policy a run stands for at iteration t."""
    root = Path(root)
    config = ExperimentConfig.load(root / "config.json")
    spec = next((r for r in config.runs if r.name == (run or config.runs[0].name)), None)
    if spec is None:
        raise ConfigError(f"run: no run named {run!r}")
    game = build_game(config.game)
    history = load_history(root / "runs" / spec.name / f"seed{config.seed}", game)
    if not 0 <= t < len(history):
        raise ConfigError(f"checkpoint: iteration {t} not saved (have 0..{len(history) - 1})")
    policy = checkpoint_policy(history, t, _run_kind(game, spec.dynamics), game)
    return sbr_exploit_lower_bound(game, policy, sbr, episodes, seed=seed)
