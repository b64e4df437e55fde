"""zCDP accounting for the Gaussian mechanism.

Budgets compose additively, so the whole accountant is a handful of
closed-form maps between sensitivity, noise scale and ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ZeroBudget, ZeroSigma


@dataclass(frozen=True)
class ZcdpBudget:
    rho: float

    def __post_init__(self):
        if self.rho < 0 or math.isnan(self.rho):
            raise ValueError(f"zCDP rho must be >= 0, got {self.rho}")

    def __add__(self, other: "ZcdpBudget") -> "ZcdpBudget":
        return compose(self, other)


@dataclass(frozen=True)
class NoiseSpec:
    """Isotropic Gaussian noise; ``sigma == 0`` means noise disabled."""

    sigma: float
    dimension: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")

    @classmethod
    def disabled(cls, dimension: int) -> "NoiseSpec":
        return cls(0.0, dimension)


@dataclass(frozen=True)
class QuerySensitivity:
    delta2: float

    def __post_init__(self):
        if self.delta2 < 0:
            raise ValueError(f"sensitivity must be >= 0, got {self.delta2}")


def gaussian_zcdp(sensitivity: QuerySensitivity, sigma: float) -> ZcdpBudget:
    if not sigma > 0:
        raise ZeroSigma(f"Gaussian mechanism needs sigma > 0, got {sigma}")
    return ZcdpBudget(sensitivity.delta2 ** 2 / (2.0 * sigma ** 2))


def compose(a: ZcdpBudget, b: ZcdpBudget) -> ZcdpBudget:
    return ZcdpBudget(a.rho + b.rho)


def compose_all(budgets: Iterable[ZcdpBudget]) -> ZcdpBudget:
    """Compose many budgets with a correctly rounded sum."""
    return ZcdpBudget(math.fsum(b.rho for b in budgets))


def gradient_sensitivity(L: float, m: int) -> QuerySensitivity:
    """l2 sensitivity of a mean of ``m`` per-sample gradients clipped to norm ``L``."""
    if not L > 0 or m < 1:
        raise ValueError(f"need L > 0 and m >= 1, got L={L}, m={m}")
    return QuerySensitivity(2.0 * L / m)


def calibrate_noise(budget: ZcdpBudget, L: float, m: int, T: int, dimension: int = 1) -> NoiseSpec:
    """Per-iteration noise scale so that ``T`` noisy gradient queries cost ``budget.rho`` in total."""
    if not budget.rho > 0:
        raise ZeroBudget("cannot calibrate noise for a zero budget (sigma would be infinite)")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    return NoiseSpec(L / m * math.sqrt(2.0 * T / budget.rho), dimension)


def expected_noise_sq_norm(spec: NoiseSpec) -> float:
    return spec.dimension * spec.sigma ** 2


def training_cost(spec: NoiseSpec, L: float, m: int, T: int) -> ZcdpBudget:
    """Total zCDP cost of ``T`` releases of the clipped gradient query at ``spec``."""
    step = gaussian_zcdp(gradient_sensitivity(L, m), spec.sigma)
    return compose_all([step] * T)
