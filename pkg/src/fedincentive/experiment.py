"""Seeded experiment orchestration: single points, parameter sweeps, training runs."""

from __future__ import annotations

import csv
import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError
from .fedsim import SyntheticTask, TaskKind, run_training
from .game import make_population, nash_equilibrium
from .server import SystemParams, optimal_reward

SWEEP_VARS = ("n", "nu_max")
SWEEP_HEADER = (
    "sweep_var", "sweep_value", "seed", "num_participants", "r_star",
    "server_utility", "user_utility_mean", "user_utility_std",
)
METRICS = SWEEP_HEADER[3:]
_PARAM_KEYS = tuple(f.name for f in dataclasses.fields(SystemParams))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1000
    nu_min: float = 1.0
    nu_max: float = 5.0
    params: SystemParams = field(default_factory=SystemParams)
    seeds: tuple[int, ...] = tuple(range(20))
    sweep_var: str | None = None
    sweep_values: tuple[float, ...] = ()
    out: str | None = None
    task: str = "quadratic"
    average_over: str = "participants"

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        self.validate()

    def validate(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n}")
        if not 0 < self.nu_min <= self.nu_max:
            raise ConfigError(f"need 0 < nu_min <= nu_max, got nu_min={self.nu_min}, nu_max={self.nu_max}")
        if not self.seeds:
            raise ConfigError("seeds must list at least one seed")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative integers")
        if self.sweep_var is not None:
            if self.sweep_var not in SWEEP_VARS:
                raise ConfigError(f"sweep_var must be one of {SWEEP_VARS}, got {self.sweep_var!r}")
            if not self.sweep_values:
                raise ConfigError("sweep_values must be non-empty when sweep_var is set")
            for v in self.sweep_values:
                try:
                    self.at(v)
                except ConfigError as exc:
                    raise ConfigError(f"invalid sweep value {v!r}: {exc}") from None
        if self.task not in {k.value for k in TaskKind}:
            raise ConfigError(f"task must be 'quadratic' or 'logistic', got {self.task!r}")
        if self.average_over not in ("participants", "population"):
            raise ConfigError(f"average_over must be 'participants' or 'population', got {self.average_over!r}")

    def at(self, value) -> "ExperimentConfig":
        """The single-point config with the sweep variable set to ``value``."""
        if self.sweep_var is None:
            return self
        if self.sweep_var == "n":
            if int(value) != value:
                raise ConfigError(f"n must be an integer, got {value}")
            value = int(value)
        return dataclasses.replace(self, **{self.sweep_var: value}, sweep_var=None, sweep_values=())

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n, "nu_min": self.nu_min, "nu_max": self.nu_max,
            **dataclasses.asdict(self.params),
            "seeds": list(self.seeds), "sweep_var": self.sweep_var,
            "sweep_values": list(self.sweep_values), "out": self.out,
            "task": self.task, "average_over": self.average_over,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)} - {"params"} | set(_PARAM_KEYS)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        raw = dict(raw)
        try:
            params = SystemParams(**{k: raw.pop(k) for k in _PARAM_KEYS if k in raw})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid system parameters: {exc}") from None
        try:
            return cls(params=params, **raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def save_config(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    return path


@dataclass(frozen=True)
class SweepRow:
    sweep_var: str
    sweep_value: float | str
    seed: int
    num_participants: int
    r_star: float
    server_utility: float
    user_utility_mean: float
    user_utility_std: float

    def as_tuple(self) -> tuple:
        return dataclasses.astuple(self)


def sample_nus(n: int, nu_min: float, nu_max: float, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(nu_min, nu_max, size=n)


def solve_point(config: ExperimentConfig, seed: int):
    """Sample users, post the optimal reward and return ``(users, solution, equilibrium)``."""
    users = make_population(sample_nus(config.n, config.nu_min, config.nu_max, seed))
    sol = optimal_reward(users, config.params, average_over=config.average_over)
    eq = nash_equilibrium(users, sol.r_star)
    return users, sol, eq


def run_single(config: ExperimentConfig, seed: int, sweep_var: str = "", sweep_value="") -> SweepRow:
    users, sol, eq = solve_point(config, seed)
    util = eq.utilities(users)[eq.budgets.participating]
    return SweepRow(
        sweep_var, sweep_value, seed, len(eq.participants), sol.r_star, sol.u_s_star,
        float(util.mean()), float(util.std()),
    )


def _run_point(args) -> SweepRow:
    config, seed, var, value = args
    return run_single(config.at(value), seed, var, value)


def run_sweep(config: ExperimentConfig, jobs: int = 1, out=None) -> list[SweepRow]:
    """One row per (sweep value, seed), in that order regardless of ``jobs``.

    With an output directory, writes ``sweep.csv``, ``sweep_aggregate.csv``
    and one ``chart_<metric>.csv`` (x, mean, std) per metric.
    """
    if config.sweep_var is None:
        raise ConfigError("run_sweep needs sweep_var and sweep_values")
    tasks = [(config, s, config.sweep_var, v) for v in config.sweep_values for s in config.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_run_point(t) for t in tasks]
    out = out if out is not None else config.out
    if out is not None:
        write_sweep(rows, out)
    return rows


def aggregate(rows: Sequence[SweepRow]) -> dict[str, dict[str, np.ndarray]]:
    """Per sweep value mean and std (population) of every metric, ordered by first appearance."""
    values: list = []
    for r in rows:
        if r.sweep_value not in values:
            values.append(r.sweep_value)
    agg: dict[str, dict[str, np.ndarray]] = {"x": {"values": np.array(values, dtype=float)}}
    for metric in METRICS:
        per = [np.array([getattr(r, metric) for r in rows if r.sweep_value == v], dtype=float) for v in values]
        agg[metric] = {"mean": np.array([p.mean() for p in per]), "std": np.array([p.std() for p in per])}
    return agg


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise ConfigError(f"output path {path} is not writable: {exc}") from None


def write_sweep(rows: Sequence[SweepRow], out) -> dict[str, Path]:
    out = Path(out)
    paths = {"rows": out / "sweep.csv", "aggregate": out / "sweep_aggregate.csv"}
    with _open_for_write(paths["rows"]) as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r.as_tuple()])
    agg = aggregate(rows)
    xs = agg["x"]["values"]
    var = rows[0].sweep_var if rows else ""
    with _open_for_write(paths["aggregate"]) as fh:
        w = csv.writer(fh)
        w.writerow(["sweep_var", "sweep_value", "num_seeds"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")])
        for j, x in enumerate(xs):
            count = sum(1 for r in rows if float(r.sweep_value) == x)
            w.writerow([var, x, count] + [agg[m][s][j] for m in METRICS for s in ("mean", "std")])
    for metric in METRICS:
        p = out / f"chart_{metric}.csv"
        with _open_for_write(p) as fh:
            w = csv.writer(fh)
            w.writerow(["x", "mean", "std"])
            for j, x in enumerate(xs):
                w.writerow([x, agg[metric]["mean"][j], agg[metric]["std"][j]])
        paths[metric] = p
    return paths


def read_sweep(path) -> list[SweepRow]:
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SweepRow(
                rec["sweep_var"], float(rec["sweep_value"]), int(rec["seed"]),
                int(rec["num_participants"]), float(rec["r_star"]), float(rec["server_utility"]),
                float(rec["user_utility_mean"]), float(rec["user_utility_std"]),
            ))
    return rows


@dataclass(frozen=True)
class TrainingSummary:
    seed: int
    num_participants: int
    r_star: float
    final_loss_private: float
    final_loss_noiseless: float


def run_training_experiment(config: ExperimentConfig, seeds: Sequence[int] | None = None,
                            out=None) -> list[TrainingSummary]:
    """Train at the equilibrium budgets, with a noise-free control, for each seed.

    Writes ``trace_seed<s>_private.csv`` / ``trace_seed<s>_noiseless.csv`` and
    ``training_summary.csv`` when an output directory is available.
    """
    seeds = config.seeds if seeds is None else tuple(seeds)
    out = out if out is not None else config.out
    summaries = []
    for seed in seeds:
        _, sol, eq = solve_point(config, seed)
        budgets = [b for b in eq.budgets.budgets if b > 0]
        task = SyntheticTask.from_params(config.params, TaskKind(config.task), seed)
        private = run_training(task, budgets, config.params, seed)
        control = run_training(task, budgets, config.params, seed, noiseless=True)
        if out is not None:
            Path(out).mkdir(parents=True, exist_ok=True)
            private.to_csv(Path(out) / f"trace_seed{seed}_private.csv")
            control.to_csv(Path(out) / f"trace_seed{seed}_noiseless.csv")
        summaries.append(TrainingSummary(seed, len(budgets), sol.r_star, private.final_loss, control.final_loss))
    if out is not None:
        with _open_for_write(Path(out) / "training_summary.csv") as fh:
            w = csv.writer(fh)
            w.writerow([f.name for f in dataclasses.fields(TrainingSummary)])
            for s in summaries:
                w.writerow(dataclasses.astuple(s))
    return summaries


def trend_fraction(values: Sequence[float], direction: str) -> float:
    """Share of adjacent pairs moving in ``direction`` ('up' = non-decreasing, 'down' = non-increasing)."""
    diffs = np.diff(np.asarray(values, dtype=float))
    if diffs.size == 0:
        return 1.0
    ok = diffs >= 0 if direction == "up" else diffs <= 0
    return float(ok.mean())
