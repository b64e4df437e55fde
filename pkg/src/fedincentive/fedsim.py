"""Private federated gradient descent on synthetic tasks.

Each round every participant answers the server's gradient query on its
local data with per-sample clipping to norm ``L`` and adds Gaussian noise
calibrated to its budget; the server averages the responses and takes one
gradient step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyResponseSet
from .privacy import NoiseSpec, ZcdpBudget, calibrate_noise
from .server import SystemParams


class TaskKind(str, Enum):
    QUADRATIC = "quadratic"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class SyntheticTask:
    """Data generator settings; ``L`` is the per-sample clipping bound."""

    kind: TaskKind = TaskKind.QUADRATIC
    seed: int = 0
    d: int = 100
    m: int = 1000
    L: float = 1.0

    @classmethod
    def from_params(cls, params: SystemParams, kind: TaskKind = TaskKind.QUADRATIC, seed: int = 0):
        return cls(TaskKind(kind), seed, params.d, params.m, params.L)


@dataclass(frozen=True)
class LocalDataset:
    features: np.ndarray
    targets: np.ndarray | None = None
    kind: TaskKind = TaskKind.QUADRATIC

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ModelState:
    theta: np.ndarray
    iteration: int = 0


@dataclass
class TrainingTrace:
    losses: np.ndarray
    theta: np.ndarray
    noise: tuple[NoiseSpec, ...]
    theta0: np.ndarray = field(repr=False)

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "global_loss"])
            for t, loss in enumerate(self.losses):
                w.writerow([t, repr(float(loss))])
        return path


def make_datasets(task: SyntheticTask, n_users: int) -> list[LocalDataset]:
    """Draw ``n_users`` local datasets of ``task.m`` records each.

    Quadratic targets are a task-level centre plus standard normal noise, so
    the optimum sits away from the zero initialisation. Logistic features are
    standard normal with labels from a fixed random separator.
    """
    base = np.random.default_rng([task.seed, 0])
    kind = TaskKind(task.kind)
    if kind is TaskKind.QUADRATIC:
        centre = base.standard_normal(task.d)
    else:
        w_true = base.standard_normal(task.d)
        w_true /= np.linalg.norm(w_true)
    out = []
    for i in range(n_users):
        rng = np.random.default_rng([task.seed, 1, i])
        x = rng.standard_normal((task.m, task.d))
        if kind is TaskKind.QUADRATIC:
            out.append(LocalDataset(centre + x, None, kind))
        else:
            y = np.where(x @ w_true >= 0, 1.0, -1.0)
            out.append(LocalDataset(x, y, kind))
    return out


def per_sample_gradients(theta: np.ndarray, data: LocalDataset) -> np.ndarray:
    if theta.shape != (data.d,):
        raise DimensionMismatch(f"model has shape {theta.shape}, data has d={data.d}")
    if data.kind is TaskKind.QUADRATIC:
        return theta - data.features
    z = data.targets * (data.features @ theta)
    # d/dtheta log(1 + exp(-z)) = -y * sigmoid(-z) * x
    coef = -data.targets * np.exp(-np.logaddexp(0.0, z))
    return coef[:, None] * data.features


def local_loss(theta: np.ndarray, data: LocalDataset) -> float:
    if theta.shape != (data.d,):
        raise DimensionMismatch(f"model has shape {theta.shape}, data has d={data.d}")
    if data.kind is TaskKind.QUADRATIC:
        diff = theta - data.features
        return float(0.5 * np.einsum("ij,ij->", diff, diff) / data.m)
    z = data.targets * (data.features @ theta)
    return float(np.logaddexp(0.0, -z).mean())


def _clip_scale(sq_norms: np.ndarray, L: float) -> np.ndarray:
    return np.minimum(1.0, L / np.sqrt(np.maximum(sq_norms, np.finfo(float).tiny)))


def clip_rows(grads: np.ndarray, L: float) -> np.ndarray:
    return grads * _clip_scale(np.einsum("ij,ij->i", grads, grads), L)[:, None]


def _query_and_loss(theta: np.ndarray, data: LocalDataset, L: float) -> tuple[np.ndarray, float]:
    grads = per_sample_gradients(theta, data)
    sq = np.einsum("ij,ij->i", grads, grads)
    query = (_clip_scale(sq, L) @ grads) / data.m
    if data.kind is TaskKind.QUADRATIC:
        # per-sample quadratic loss is half the squared gradient norm
        return query, float(0.5 * sq.mean())
    return query, local_loss(theta, data)


def local_query(theta, data: LocalDataset, L: float) -> np.ndarray:
    """Mean of per-sample gradients, each clipped onto the ``L``-ball."""
    theta = theta.theta if isinstance(theta, ModelState) else np.asarray(theta, dtype=float)
    return _query_and_loss(theta, data, L)[0]


def dp_response(query: np.ndarray, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    query = np.asarray(query, dtype=float)
    if query.shape != (noise.dimension,):
        raise DimensionMismatch(f"query has shape {query.shape}, noise dimension {noise.dimension}")
    if noise.sigma == 0:
        return query.copy()
    return query + rng.normal(0.0, noise.sigma, size=noise.dimension)


def aggregate_step(state: ModelState, responses: Sequence[np.ndarray], eta: float) -> ModelState:
    if len(responses) == 0:
        raise EmptyResponseSet("server received no responses")
    stacked = np.asarray(responses, dtype=float)
    if stacked.ndim != 2 or stacked.shape[1] != state.theta.shape[0]:
        raise DimensionMismatch(f"responses of shape {stacked.shape} for model of dim {state.theta.shape[0]}")
    return ModelState(state.theta - eta * stacked.mean(axis=0), state.iteration + 1)


def global_loss(theta: np.ndarray, datasets: Sequence[LocalDataset]) -> float:
    return math.fsum(local_loss(theta, ds) for ds in datasets) / len(datasets)


def noise_specs(budgets: Sequence[float], task: SyntheticTask, T: int,
                noiseless: bool = False) -> tuple[NoiseSpec, ...]:
    """Per-user noise from budgets; an infinite budget or ``noiseless`` disables noise."""
    specs = []
    for rho in budgets:
        if noiseless or math.isinf(rho):
            specs.append(NoiseSpec.disabled(task.d))
        else:
            specs.append(calibrate_noise(ZcdpBudget(rho), task.L, task.m, T, task.d))
    return tuple(specs)


def run_training(
    task: SyntheticTask,
    budgets: Sequence[float],
    params: SystemParams,
    seed: int,
    noiseless: bool = False,
    datasets: Sequence[LocalDataset] | None = None,
    iterations: int | None = None,
) -> TrainingTrace:
    """Run ``params.T`` rounds from a zero model and record the global loss.

    ``task`` fixes the data, dimension and clipping bound; ``params`` supplies
    the stepsize and round count. Noise is always calibrated for
    ``params.T`` rounds; ``iterations`` only truncates the loop. User ``i``
    draws noise from its own stream seeded by ``(seed, i)``.
    """
    iterations = params.T if iterations is None else iterations
    if len(budgets) == 0:
        raise EmptyResponseSet("training needs at least one participant")
    if any(not rho > 0 for rho in budgets):
        raise ValueError("all training budgets must be positive")
    datasets = make_datasets(task, len(budgets)) if datasets is None else datasets
    specs = noise_specs(budgets, task, params.T, noiseless)
    rngs = [np.random.default_rng([seed, i]) for i in range(len(budgets))]
    state = ModelState(np.zeros(task.d))
    theta0 = state.theta.copy()
    losses = []
    for _ in range(iterations):
        responses, local = [], []
        for ds, spec, rng in zip(datasets, specs, rngs):
            q, loss = _query_and_loss(state.theta, ds, task.L)
            responses.append(dp_response(q, spec, rng))
            local.append(loss)
        losses.append(math.fsum(local) / len(local))
        state = aggregate_step(state, responses, params.eta)
    losses.append(global_loss(state.theta, datasets))
    return TrainingTrace(np.array(losses), state.theta, specs, theta0)
