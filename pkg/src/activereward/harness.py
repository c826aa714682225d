"""Experiment runner: configuration, the closed query loop, metrics, replay.

A run pairs one simulated human per seed with the configured strategy and
iterates select -> ask -> transition, emitting a metrics row per step and a
hash-chained transcript line per transition. Identical configs produce
byte-identical metrics and transcripts; wall-clock timings go to the run
manifest, which is the one output file allowed to differ between runs.
"""
from __future__ import annotations

import functools
import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .acquisition import STRATEGY_KINDS, ScoredQuery, Strategy, select_query
from .belief import init_belief, mean_estimate, spread
from .domain import (
    DEFAULT_FEATURE_DIM,
    GridWorld,
    Trajectory,
    enumerate_trajectories,
    features,
)
from .errors import ConfigError, ContractError, ReplayDivergenceError
from .humans import ObservationModel, SimulatedHuman, respond
from .imdp import (
    InfoState,
    QueryBudgets,
    TransitionConfig,
    initial_state,
    legal_queries,
    transition_with_record,
)
from .queries import LabelQuery
from . import transcript as tr

ENV_OUTPUT_DIR = "ACTIVEREWARD_OUTDIR"

METRICS_SCHEMA = "# activereward metrics schema v1"
METRICS_COLUMNS = ("seed", "step", "strategy", "query_variant", "score",
                   "alignment", "spread", "regret", "dataset_size")

COMPARE_SCHEMA = "# activereward strategy comparison v1"
COMPARE_COLUMNS = ("strategy", "step", "median_alignment", "win_rate_vs_random")


@dataclass(frozen=True)
class ExperimentConfig:
    world: GridWorld
    d: int
    m: int
    seeds: tuple[int, ...]
    obs: ObservationModel
    strategy: Strategy
    transition: TransitionConfig
    budgets: QueryBudgets
    steps: int
    pool_size: int
    init_dataset_size: int
    output_dir: str
    doc: dict


def _field(doc: dict, path: str, key: str, kind, required: bool = True, default=None):
    full = f"{path}.{key}" if path else key
    if key not in doc:
        if required:
            raise ConfigError(full, "missing required field")
        return default
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(full, "expected an integer, got a boolean")
    if not isinstance(value, kind):
        raise ConfigError(full, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _cell(doc, path, key, required=True, default=None):
    raw = _field(doc, path, key, list, required, None)
    if raw is None:
        return default
    full = f"{path}.{key}" if path else key
    if len(raw) != 2 or not all(isinstance(v, int) for v in raw):
        raise ConfigError(full, "expected a [x, y] cell")
    return (raw[0], raw[1])


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document; raises ConfigError naming the bad field."""
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a JSON object")

    wdoc = _field(doc, "", "world", dict)
    obstacles = _field(wdoc, "world", "obstacles", list, required=False, default=[])
    cells = []
    for i, ob in enumerate(obstacles):
        if not (isinstance(ob, list) and len(ob) == 2 and all(isinstance(v, int) for v in ob)):
            raise ConfigError(f"world.obstacles[{i}]", "expected a [x, y] cell")
        cells.append((ob[0], ob[1]))
    try:
        world = GridWorld(
            width=_field(wdoc, "world", "width", int),
            height=_field(wdoc, "world", "height", int),
            obstacles=frozenset(cells),
            goal=_cell(wdoc, "world", "goal"),
            horizon=_field(wdoc, "world", "horizon", int),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError("world", str(exc)) from exc

    d = _field(doc, "", "d", int, required=False, default=DEFAULT_FEATURE_DIM)
    if d != DEFAULT_FEATURE_DIM:
        raise ConfigError("d", f"the default feature map has dimension {DEFAULT_FEATURE_DIM}")
    m = _field(doc, "", "m", int)
    if m < 2:
        raise ConfigError("m", "particle count must be >= 2")

    seeds_raw = _field(doc, "", "seeds", list)
    if not seeds_raw:
        raise ConfigError("seeds", "at least one seed is required")
    if not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds_raw):
        raise ConfigError("seeds", "seeds must be integers")

    odoc = _field(doc, "", "observation", dict)
    try:
        obs = ObservationModel(
            beta=_field(odoc, "observation", "beta", float),
            label_threshold=_field(odoc, "observation", "label_threshold", float,
                                   required=False, default=0.5),
            feature_threshold=_field(odoc, "observation", "feature_threshold", float,
                                     required=False, default=0.25),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError("observation", str(exc)) from exc

    sdoc = _field(doc, "", "strategy", dict)
    kind = _field(sdoc, "strategy", "kind", str)
    if kind not in STRATEGY_KINDS:
        raise ConfigError("strategy.kind", f"unknown strategy {kind!r}")
    strategy = Strategy(
        kind=kind,
        committee_size=_field(sdoc, "strategy", "committee_size", int,
                              required=False, default=8),
        lambda_cost=_field(sdoc, "strategy", "lambda_cost", float,
                           required=False, default=0.0),
    )
    if strategy.committee_size > m:
        raise ConfigError("strategy.committee_size", "committee cannot exceed particle count")

    tdoc = _field(doc, "", "transition", dict, required=False, default={})
    try:
        transition_cfg = TransitionConfig(
            alpha=_field(tdoc, "transition", "alpha", float, required=False, default=1.0),
            tuning_enabled=_field(tdoc, "transition", "tuning_enabled", bool,
                                  required=False, default=False),
            tuning_decay=_field(tdoc, "transition", "tuning_decay", float,
                                required=False, default=0.5),
            relearn_mode=_field(tdoc, "transition", "relearn_mode", str,
                                required=False, default="incremental"),
            gamma=_field(tdoc, "transition", "gamma", float, required=False, default=0.9),
            feature_delta=_field(tdoc, "transition", "feature_delta", float,
                                 required=False, default=0.5),
            resample=_field(tdoc, "transition", "resample", bool, required=False, default=True),
            sigma_rw=_field(tdoc, "transition", "sigma_rw", float, required=False, default=0.1),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError("transition", str(exc)) from exc

    bdoc = _field(doc, "", "budgets", dict)
    try:
        budgets = QueryBudgets(
            label=_field(bdoc, "budgets", "label", int, required=False, default=0),
            comparison=_field(bdoc, "budgets", "comparison", int, required=False, default=0),
            demonstration=_field(bdoc, "budgets", "demonstration", int,
                                 required=False, default=0),
            feature_label=_field(bdoc, "budgets", "feature_label", int,
                                 required=False, default=0),
            correction=_field(bdoc, "budgets", "correction", int, required=False, default=0),
            comparison_k=_field(bdoc, "budgets", "comparison_k", int,
                                required=False, default=2),
            support_cap=_field(bdoc, "budgets", "support_cap", int,
                               required=False, default=64),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError("budgets", str(exc)) from exc

    steps = _field(doc, "", "steps", int)
    if steps < 1:
        raise ConfigError("steps", "must be >= 1")
    pool_size = _field(doc, "", "pool_size", int)
    if pool_size < 1:
        raise ConfigError("pool_size", "must be >= 1")
    init_k = _field(doc, "", "init_dataset_size", int, required=False, default=5)
    if init_k < 0:
        raise ConfigError("init_dataset_size", "must be >= 0")
    if init_k > pool_size:
        raise ConfigError("init_dataset_size", "cannot exceed pool_size")

    return ExperimentConfig(
        world=world, d=d, m=m, seeds=tuple(seeds_raw), obs=obs, strategy=strategy,
        transition=transition_cfg, budgets=budgets, steps=steps, pool_size=pool_size,
        init_dataset_size=init_k,
        output_dir=_field(doc, "", "output_dir", str, required=False, default="out"),
        doc=doc,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return parse_config(doc)


def resolve_output_dir(config: ExperimentConfig) -> Path:
    return Path(os.environ.get(ENV_OUTPUT_DIR, config.output_dir))


@dataclass(frozen=True)
class RunSeeds:
    """Per-subsystem seeds, all derived from the run seed in fixed order."""

    pool: int
    omega: int
    belief: int
    human: int
    init: int
    alpha: int
    query: int
    strategy: int


def derive_run_seeds(run_seed: int) -> RunSeeds:
    root = np.random.default_rng(run_seed)
    draws = [int(v) for v in root.integers(2**62, size=8)]
    return RunSeeds(*draws)


@functools.lru_cache(maxsize=8)
def _all_trajectories(world: GridWorld) -> tuple[Trajectory, ...]:
    out: list[Trajectory] = []
    for start in world.free_cells():
        out.extend(enumerate_trajectories(world, start, max_count=10**9))
    return tuple(out)


def build_pool(world: GridWorld, pool_size: int, pool_seed: int) -> list[Trajectory]:
    """A seeded, stratified sample of the world's trajectory space.

    Uniform sampling is dominated by maximum-length paths that rarely end
    on the goal, which leaves the goal and length features nearly constant
    across the pool. A quarter of the pool is drawn from goal-reaching
    trajectories and the rest is balanced across path lengths, so every
    feature component actually varies. Enumeration order is preserved.
    """
    full = _all_trajectories(world)
    if len(full) <= pool_size:
        return list(full)
    rng = np.random.default_rng(pool_seed)
    chosen: set[int] = set()

    enders = [i for i, t in enumerate(full) if t.final_state == world.goal]
    n_goal = min(len(enders), pool_size // 4)
    if n_goal:
        picks = rng.choice(len(enders), size=n_goal, replace=False)
        chosen.update(enders[i] for i in picks)

    buckets: dict[int, list[int]] = {}
    for i, t in enumerate(full):
        if i not in chosen:
            buckets.setdefault(t.n_moves, []).append(i)
    order = [list(rng.permutation(idx)) for _, idx in sorted(buckets.items())]
    while len(chosen) < pool_size and any(order):
        for bucket in order:
            if bucket and len(chosen) < pool_size:
                chosen.add(int(bucket.pop()))
    return [full[i] for i in sorted(chosen)]


def draw_omega_star(d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    while True:
        raw = rng.standard_normal(d)
        norm = np.linalg.norm(raw)
        if norm > 1e-12:
            return raw / norm


def propose_query(
    config: ExperimentConfig,
    state: InfoState,
    pool: Sequence[Trajectory],
    loop_step: int,
    seeds: RunSeeds,
) -> ScoredQuery:
    """Candidate generation plus selection for one loop step (1-based)."""
    candidates = legal_queries(state, config.world, pool, config.budgets,
                               seed=seeds.query + loop_step)
    strategy = replace(config.strategy, seed=seeds.strategy + loop_step)
    return select_query(strategy, state, candidates, config.obs)


@dataclass(frozen=True)
class MetricsRow:
    seed: int
    step: int
    strategy: str
    query_variant: str
    score: float
    alignment: float
    spread: float
    regret: float
    dataset_size: int

    def as_csv(self) -> str:
        return ",".join([
            str(self.seed), str(self.step), self.strategy, self.query_variant,
            repr(self.score), repr(self.alignment), repr(self.spread),
            repr(self.regret), str(self.dataset_size),
        ])


def _metrics_row(
    config: ExperimentConfig,
    seed: int,
    step: int,
    variant: str,
    score: float,
    state: InfoState,
    omega_star: np.ndarray,
    pool_phis: np.ndarray,
    true_values: np.ndarray,
) -> MetricsRow:
    estimate = mean_estimate(state.belief)
    est_values = (pool_phis * state.feature_weights) @ estimate
    regret = float(true_values.max() - true_values[int(np.argmax(est_values))])
    return MetricsRow(
        seed=seed,
        step=step,
        strategy=config.strategy.kind,
        query_variant=variant,
        score=float(score),
        alignment=float(estimate @ omega_star),
        spread=spread(state.belief),
        regret=regret,
        dataset_size=len(state.dataset),
    )


def run_seed(config: ExperimentConfig, seed: int, transcript_path: Path) -> list[MetricsRow]:
    """One seeded run of the full loop; writes the transcript as it goes."""
    seeds = derive_run_seeds(seed)
    pool = build_pool(config.world, config.pool_size, seeds.pool)
    omega_star = draw_omega_star(config.d, seeds.omega)
    human = SimulatedHuman(omega_star=omega_star, model=config.obs,
                           rng=np.random.default_rng(seeds.human))
    state = initial_state(init_belief(config.d, config.m, seeds.belief))

    pool_phis = np.stack([features(config.world, t) for t in pool])
    true_values = pool_phis @ omega_star

    rows: list[MetricsRow] = []
    with open(transcript_path, "w") as fh:
        writer = tr.TranscriptWriter(fh)
        writer.write_header({
            "run_seed": seed,
            "belief_seed": seeds.belief,
            "omega_star": [float(v) for v in omega_star],
            "d": config.d,
            "m": config.m,
            "strategy": config.strategy.kind,
            "init_dataset_size": config.init_dataset_size,
            "steps": config.steps,
        })

        # seed the dataset with human-labeled pool items before the loop
        init_cfg = replace(config.transition, alpha=1.0)
        init_rng = np.random.default_rng(seeds.init)
        if config.init_dataset_size:
            chosen = sorted(init_rng.choice(len(pool), size=config.init_dataset_size,
                                            replace=False))
            for idx in chosen:
                query = LabelQuery(candidate=pool[idx], phi=pool_phis[idx])
                response = respond(human, query)
                state, record = transition_with_record(
                    state, query, response, init_cfg, config.obs)
                writer.write_step(query, response, record)

        rows.append(_metrics_row(config, seed, 0, "none", 0.0, state,
                                 omega_star, pool_phis, true_values))

        alpha_rng = np.random.default_rng(seeds.alpha)
        for t in range(1, config.steps + 1):
            scored = propose_query(config, state, pool, t, seeds)
            response = respond(human, scored.query)
            state, record = transition_with_record(
                state, scored.query, response, config.transition, config.obs, rng=alpha_rng)
            writer.write_step(scored.query, response, record)
            rows.append(_metrics_row(config, seed, t, scored.query.kind, scored.score,
                                     state, omega_star, pool_phis, true_values))
    return rows


@dataclass
class RunResult:
    out_dir: Path
    metrics_path: Path
    transcript_paths: dict[int, Path]
    manifest_path: Path
    rows: list[MetricsRow]
    failures: dict[int, str]


def run_experiment(config: ExperimentConfig, out_dir: Path | None = None) -> RunResult:
    """Run every seed; write metrics.csv, per-seed transcripts, and a manifest.

    A failing seed is recorded in the manifest and does not stop the others.
    """
    out_dir = resolve_output_dir(config) if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    manifest_path = out_dir / "manifest.json"

    all_rows: list[MetricsRow] = []
    transcript_paths: dict[int, Path] = {}
    failures: dict[int, str] = {}
    timings: dict[int, float] = {}

    for seed in config.seeds:
        path = out_dir / f"transcript_{seed}.jsonl"
        started = time.perf_counter()
        try:
            rows = run_seed(config, seed, path)
        except Exception as exc:  # noqa: BLE001 - seed isolation is the contract
            failures[seed] = f"{type(exc).__name__}: {exc}"
            if path.exists():
                path.unlink()
            continue
        finally:
            timings[seed] = (time.perf_counter() - started) * 1000.0
        transcript_paths[seed] = path
        all_rows.extend(rows)

    with open(metrics_path, "w") as fh:
        fh.write(METRICS_SCHEMA + "\n")
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for row in all_rows:
            fh.write(row.as_csv() + "\n")

    manifest = {
        "v": 1,
        "config": config.doc,
        "seeds": {
            str(seed): {
                "status": "error" if seed in failures else "ok",
                **({"error": failures[seed]} if seed in failures else {}),
                "wall_ms": timings.get(seed),
            }
            for seed in config.seeds
        },
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    return RunResult(out_dir=out_dir, metrics_path=metrics_path,
                     transcript_paths=transcript_paths, manifest_path=manifest_path,
                     rows=all_rows, failures=failures)


@dataclass
class ComparisonResult:
    out_dir: Path
    summary_path: Path
    runs: dict[str, RunResult]
    medians: dict[tuple[str, int], float]
    win_rates: dict[tuple[str, int], float]


def compare_strategies(config: ExperimentConfig, strategies: Sequence[str]) -> ComparisonResult:
    """Run each strategy on the same seeds and summarize against random.

    ``random`` joins the lineup automatically when absent, since win rates
    are measured against it (ties count one half).
    """
    if len(strategies) < 2:
        raise ConfigError("strategies", "need at least two strategies to compare")
    for name in strategies:
        if name not in STRATEGY_KINDS:
            raise ConfigError("strategies", f"unknown strategy {name!r}")
    lineup = list(strategies)
    if "random" not in lineup:
        lineup.append("random")

    out_dir = resolve_output_dir(config)
    runs: dict[str, RunResult] = {}
    for name in lineup:
        sub_doc = dict(config.doc)
        sub_doc["strategy"] = {**config.doc.get("strategy", {}), "kind": name}
        sub = replace(config, strategy=replace(config.strategy, kind=name), doc=sub_doc)
        runs[name] = run_experiment(sub, out_dir=out_dir / "compare" / name)

    def alignment_table(result: RunResult) -> dict[tuple[int, int], float]:
        return {(row.seed, row.step): row.alignment for row in result.rows}

    tables = {name: alignment_table(result) for name, result in runs.items()}
    random_table = tables["random"]

    medians: dict[tuple[str, int], float] = {}
    win_rates: dict[tuple[str, int], float] = {}
    for name in lineup:
        for step in range(config.steps + 1):
            values = [tables[name].get((seed, step)) for seed in config.seeds]
            values = [v for v in values if v is not None]
            if not values:
                continue
            medians[(name, step)] = float(np.median(values))
            outcomes = []
            for seed in config.seeds:
                mine = tables[name].get((seed, step))
                base = random_table.get((seed, step))
                if mine is None or base is None:
                    continue
                outcomes.append(1.0 if mine > base else 0.5 if mine == base else 0.0)
            if outcomes:
                win_rates[(name, step)] = float(np.mean(outcomes))

    summary_path = out_dir / "comparison.csv"
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(summary_path, "w") as fh:
        fh.write(COMPARE_SCHEMA + "\n")
        fh.write(",".join(COMPARE_COLUMNS) + "\n")
        for name in lineup:
            for step in range(config.steps + 1):
                if (name, step) in medians:
                    fh.write(f"{name},{step},{repr(medians[(name, step)])},"
                             f"{repr(win_rates.get((name, step), 0.5))}\n")

    return ComparisonResult(out_dir=out_dir, summary_path=summary_path, runs=runs,
                            medians=medians, win_rates=win_rates)


@dataclass
class ReplaySummary:
    steps: int
    dataset_size: int
    spread: float
    alignment: float | None
    belief_generation: int


def replay_transcript(config: ExperimentConfig, transcript_path: str | Path) -> ReplaySummary:
    """Re-run a recorded transcript and verify it reproduces itself.

    Raises TranscriptError for unparseable lines and ReplayDivergenceError
    when the digest chain or any recomputed transition disagrees with the
    recorded fields.
    """
    with open(transcript_path) as fh:
        header, lines = tr.read_transcript(iter(fh))

    bad_line = tr.verify_chain(header, lines)
    if bad_line is not None:
        raise ReplayDivergenceError(f"digest chain broken at line {bad_line}")

    if header.get("d") != config.d or header.get("m") != config.m:
        raise ReplayDivergenceError("transcript header does not match the config")

    init_k = int(header.get("init_dataset_size", 0))
    state = initial_state(init_belief(config.d, config.m, int(header["belief_seed"])))
    init_cfg = replace(config.transition, alpha=1.0)

    for i, line in enumerate(lines):
        cfg = init_cfg if i < init_k else config.transition
        try:
            state, record = transition_with_record(
                state, line.query, line.response, cfg, config.obs,
                alpha_draw=line.alpha_draw)
        except ContractError as exc:
            raise ReplayDivergenceError(f"line {line.line_no}: {exc}") from exc
        if (record.step != line.step
                or record.dataset_delta != line.dataset_delta
                or record.belief_generation != line.belief_generation):
            raise ReplayDivergenceError(
                f"line {line.line_no}: replayed transition disagrees with the record")

    omega_star = header.get("omega_star")
    alignment = None
    if omega_star is not None:
        alignment = float(mean_estimate(state.belief) @ np.asarray(omega_star))
    return ReplaySummary(
        steps=state.step,
        dataset_size=len(state.dataset),
        spread=spread(state.belief),
        alignment=alignment,
        belief_generation=state.belief.generation,
    )
