"""Server-side economics: accuracy proxy, server utility and the optimal reward.

Once the users' equilibrium is substituted in, the server's utility depends
on the reward only through per-participant coefficients ``X_i``::

    U_s(R) = lam/2 * (1 + exp(-mean_i log(1 + 1/(X_i R)))) - R

which is strictly concave in ``R`` and maximised on ``(0, lam/2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import EmptyParticipantSet, NoInteriorMaximum
from .game import UserProfile, participant_set
from .search import golden_section_max

AverageOver = Literal["participants", "population"]
Method = Literal["bisection", "newton", "golden-section"]


@dataclass(frozen=True)
class SystemParams:
    lam: float = 20.0
    d: int = 1000
    eta: float = 0.1
    T: int = 500
    m: int = 1000
    L: float = 1.0

    def __post_init__(self):
        checks = [
            (self.lam > 1, "lam must be > 1"),
            (self.d >= 1, "d must be >= 1"),
            (self.eta > 0, "eta must be > 0"),
            (self.T >= 1, "T must be >= 1"),
            (self.m >= 1, "m must be >= 1"),
            (self.L > 0, "L must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"{msg} (got {self})")

    @property
    def noise_scale(self) -> float:
        """``2 d eta^2 T / m^2``: squared-noise factor per unit of inverse budget."""
        return 2.0 * self.d * self.eta ** 2 * self.T / self.m ** 2


@dataclass(frozen=True)
class RewardSolution:
    r_star: float
    u_s_star: float
    iterations: int
    method: str
    derivative: float


def x_coefficients(participant_nus: Sequence[float], params: SystemParams) -> np.ndarray:
    """Coefficients ``X_i`` with ``X_i * R`` equal to ``rho_i^e / noise_scale``."""
    nus = np.asarray(participant_nus, dtype=float)
    if nus.size == 0:
        raise EmptyParticipantSet("no participants")
    k = nus.size
    total = math.fsum(nus)
    return (k - 1) / (params.noise_scale * total) * ((total - (k - 1) * nus) / total)


def accuracy_proxy(
    budgets: Sequence[float], params: SystemParams, population_size: int | None = None
) -> float:
    """Bounded accuracy stand-in in ``[0.5, 1]``; higher budgets mean less noise.

    The log-noise terms are averaged over the participants unless
    ``population_size`` is given, in which case absent users count as zero.
    """
    rho = np.asarray(budgets, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("accuracy proxy needs strictly positive budgets")
    denom = rho.size if population_size is None else population_size
    h = np.log1p(params.noise_scale / rho).sum() / denom
    return 0.5 * (1.0 + math.exp(-h))


@dataclass(frozen=True)
class ServerObjective:
    """``U_s`` and its first two derivatives for fixed coefficients; vectorised over ``R``."""

    x: np.ndarray
    lam: float
    denom: int

    @classmethod
    def build(cls, users: Sequence[UserProfile], params: SystemParams,
              average_over: AverageOver = "participants") -> "ServerObjective":
        nus = np.array([u.nu for u in users], dtype=float)
        s_nus = nus[participant_set(nus)]
        x = x_coefficients(s_nus, params)
        if average_over == "participants":
            denom = x.size
        elif average_over == "population":
            denom = nus.size
        else:
            raise ValueError(f"average_over must be 'participants' or 'population', got {average_over!r}")
        return cls(x, params.lam, denom)

    def _parts(self, R):
        R = np.asarray(R, dtype=float)
        xr = np.multiply.outer(R, self.x)
        g = np.exp(-np.log1p(1.0 / xr).sum(axis=-1) / self.denom)
        return R, xr, g

    def value(self, R):
        R, _, g = self._parts(R)
        return self.lam / 2.0 * (1.0 + g) - R

    def accuracy_gain(self, R):
        """Reward-dependent part of ``U_s``: ``value(R) == lam/2 + accuracy_gain(R) - R``."""
        _, _, g = self._parts(R)
        return self.lam / 2.0 * g

    def derivative(self, R):
        R, xr, g = self._parts(R)
        q = (1.0 / (xr + 1.0)).sum(axis=-1) / self.denom
        return self.lam * g / (2.0 * R) * q - 1.0

    def second_derivative(self, R):
        R, xr, g = self._parts(R)
        q = (1.0 / (xr + 1.0)).sum(axis=-1) / self.denom
        w = ((2.0 * xr + 1.0) / (xr + 1.0) ** 2).sum(axis=-1) / self.denom
        return self.lam * g / (2.0 * R ** 2) * (q ** 2 - w)

    @property
    def bracket(self) -> tuple[float, float]:
        return 1e-9 * self.lam, self.lam / 2.0


def server_utility(R: float, users: Sequence[UserProfile], params: SystemParams,
                   average_over: AverageOver = "participants") -> float:
    if not R > 0:
        raise ValueError(f"reward must be positive, got {R}")
    return float(ServerObjective.build(users, params, average_over).value(R))


def server_utility_derivative(R: float, users: Sequence[UserProfile], params: SystemParams,
                              average_over: AverageOver = "participants") -> float:
    if not R > 0:
        raise ValueError(f"reward must be positive, got {R}")
    return float(ServerObjective.build(users, params, average_over).derivative(R))


def server_utility_second_derivative(R: float, users: Sequence[UserProfile], params: SystemParams,
                                     average_over: AverageOver = "participants") -> float:
    return float(ServerObjective.build(users, params, average_over).second_derivative(R))


def _bisect(obj: ServerObjective, lo: float, hi: float, tol: float, maxiter: int):
    it = 0
    x = 0.5 * (lo + hi)
    while it < maxiter:
        it += 1
        x = 0.5 * (lo + hi)
        dx = float(obj.derivative(x))
        if abs(dx) <= tol or hi - lo <= 4 * np.spacing(hi):
            break
        if dx > 0:
            lo = x
        else:
            hi = x
    return x, it


def _newton(obj: ServerObjective, lo: float, hi: float, tol: float, maxiter: int):
    # safeguarded: fall back to bisection whenever the step leaves the
    # bracket or fails to halve the derivative
    x = 0.5 * (lo + hi)
    dx = float(obj.derivative(x))
    it = 0
    while it < maxiter and abs(dx) > tol and hi - lo > 4 * np.spacing(hi):
        it += 1
        if dx > 0:
            lo = x
        else:
            hi = x
        step = x - dx / float(obj.second_derivative(x))
        if lo < step < hi:
            d_step = float(obj.derivative(step))
            if abs(d_step) <= 0.5 * abs(dx):
                x, dx = step, d_step
                continue
        x = 0.5 * (lo + hi)
        dx = float(obj.derivative(x))
    return x, it


def optimal_reward(
    users: Sequence[UserProfile],
    params: SystemParams,
    tol: float = 1e-10,
    method: Method = "bisection",
    average_over: AverageOver = "participants",
    maxiter: int = 10_000,
) -> RewardSolution:
    """Reward maximising the server's utility given the users' equilibrium response.

    Raises ``NoInteriorMaximum`` when the utility already decreases at the
    lower end of the bracket, i.e. the server would rather post ``R -> 0+``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    obj = ServerObjective.build(users, params, average_over)
    lo, hi = obj.bracket
    if float(obj.derivative(lo)) <= 0:
        raise NoInteriorMaximum(
            f"server utility is non-increasing from R={lo:g}; no interior maximiser in ({lo:g}, {hi:g}]"
        )
    if float(obj.derivative(hi)) >= 0:
        x, it = hi, 0
    elif method == "bisection":
        x, it = _bisect(obj, lo, hi, tol, maxiter)
    elif method == "newton":
        x, it = _newton(obj, lo, hi, tol, maxiter)
    elif method == "golden-section":
        x, _, it = golden_section_max(lambda r: float(obj.value(r)), lo, hi, xtol=1e-15, maxiter=maxiter)
    else:
        raise ValueError(f"unknown method {method!r}")
    return RewardSolution(float(x), float(obj.value(x)), it, method, float(obj.derivative(x)))
