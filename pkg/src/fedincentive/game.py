"""User-side economics of the second-stage game.

Budgets are plain floats in zCDP units. A non-participating user carries
``NON_PARTICIPATING`` (``-inf``), so a profile is just a float vector and
``budget > 0`` is the participation test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import AllNonParticipating, DegenerateOpponents, PopulationTooSmall
from .search import golden_section_max

NON_PARTICIPATING = float("-inf")


class CostKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class CostFamily:
    """Privacy cost ``c(nu, rho)`` of one of the three admissible shapes."""

    kind: CostKind
    nu: float

    def __call__(self, rho: float) -> float:
        return user_cost(self, rho)


@dataclass(frozen=True)
class UserProfile:
    id: int
    nu: float
    kind: CostKind = CostKind.LINEAR

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"user {self.id}: privacy value nu must be > 0, got {self.nu}")

    @property
    def cost(self) -> CostFamily:
        return CostFamily(CostKind(self.kind), self.nu)


def make_population(nus: Sequence[float], kind: CostKind = CostKind.LINEAR) -> list[UserProfile]:
    """Users with ids ``0..n-1`` in the order given."""
    return [UserProfile(i, float(v), kind) for i, v in enumerate(nus)]


def _check_ids(users: Sequence[UserProfile]) -> None:
    ids = [u.id for u in users]
    if len(set(ids)) != len(ids):
        raise ValueError("user ids must be unique within a population")


@dataclass(frozen=True)
class StrategyProfile:
    """One budget per user, positionally aligned with the population."""

    budgets: tuple[float, ...]

    def __post_init__(self):
        b = tuple(float(x) for x in self.budgets)
        for x in b:
            if not (x > 0 or x == NON_PARTICIPATING):
                raise ValueError(f"budget must be positive or NON_PARTICIPATING, got {x}")
        if len(b) < 2:
            raise ValueError("a strategy profile needs at least two users")
        object.__setattr__(self, "budgets", b)

    def __len__(self) -> int:
        return len(self.budgets)

    @property
    def participating(self) -> np.ndarray:
        return np.asarray(self.budgets) > 0

    def positive(self) -> np.ndarray:
        """Budget vector with non-participants mapped to 0."""
        arr = np.asarray(self.budgets, dtype=float)
        return np.where(arr > 0, arr, 0.0)

    def replace(self, index: int, budget: float) -> "StrategyProfile":
        b = list(self.budgets)
        b[index] = budget
        return StrategyProfile(tuple(b))


@dataclass(frozen=True)
class EquilibriumResult:
    participants: tuple[int, ...]
    budgets: StrategyProfile
    payments: np.ndarray = field(repr=False)
    reward: float

    @classmethod
    def from_profile(cls, profile: StrategyProfile, users: Sequence[UserProfile], R: float):
        """Wrap an arbitrary profile, e.g. one to be checked by ``verify_equilibrium``."""
        pay = payment(profile, R)
        part = tuple(u.id for u, b in zip(users, profile.budgets) if b > 0)
        return cls(part, profile, pay, float(R))

    def utilities(self, users: Sequence[UserProfile]) -> np.ndarray:
        rho = self.budgets.positive()
        costs = np.array([u.cost(r) for u, r in zip(users, rho)])
        return np.where(self.budgets.participating, self.payments - costs, 0.0)


def payment(profile: StrategyProfile, R: float) -> np.ndarray:
    """Proportional split of ``R`` by budget; non-participants get exactly 0."""
    if not R > 0:
        raise ValueError(f"reward must be positive, got {R}")
    rho = profile.positive()
    total = math.fsum(rho)
    if total <= 0:
        raise AllNonParticipating("no user has a positive budget; empty market")
    return rho / total * R


def user_cost(family: CostFamily, rho):
    """Cost of budget ``rho``; accepts a scalar or an array of budgets."""
    if np.any(np.asarray(rho) < 0):
        raise ValueError(f"budget must be non-negative, got {rho}")
    kind = CostKind(family.kind)
    if kind is CostKind.LINEAR:
        return family.nu * rho
    if kind is CostKind.QUADRATIC:
        return family.nu * rho * rho
    if np.ndim(rho) == 0:
        return math.exp(family.nu * rho)
    return np.exp(family.nu * rho)


def _position(users: Sequence[UserProfile], user_id: int) -> int:
    for pos, u in enumerate(users):
        if u.id == user_id:
            return pos
    raise KeyError(f"no user with id {user_id}")


def user_utility(i: int, profile: StrategyProfile, users: Sequence[UserProfile], R: float) -> float:
    """Payment minus privacy cost for user id ``i``; 0 for a non-participant."""
    if len(profile) != len(users):
        raise ValueError("profile and population sizes differ")
    pay = payment(profile, R)
    pos = _position(users, i)
    rho = profile.budgets[pos]
    if not rho > 0:
        return 0.0
    return float(pay[pos] - users[pos].cost(rho))


def best_response(others_sum: float, nu: float, R: float) -> float:
    """Utility-maximising budget under linear cost, or ``NON_PARTICIPATING``."""
    if not others_sum > 0:
        raise DegenerateOpponents("best response needs a positive rival budget sum")
    if R <= nu * others_sum:
        return NON_PARTICIPATING
    rho = math.sqrt(R * others_sum / nu) - others_sum
    # sqrt rounding can leave a non-positive value right at the threshold
    return rho if rho > 0 else NON_PARTICIPATING


def participant_set(nus: Sequence[float]) -> np.ndarray:
    """Positions of the participants, in ascending-nu order (ties by position).

    Admission is strict: a user joins only if its equilibrium budget would be
    strictly positive. The set does not depend on the reward.
    """
    nus = np.asarray(nus, dtype=float)
    if nus.size < 2:
        raise PopulationTooSmall(f"need at least 2 users, got {nus.size}")
    order = np.argsort(nus, kind="stable")
    total = nus[order[0]] + nus[order[1]]
    k = 2
    while k < nus.size:
        v = nus[order[k]]
        if not k * v < total + v:
            break
        total += v
        k += 1
    return order[:k]


def equilibrium_budgets(participant_nus: np.ndarray, R: float) -> np.ndarray:
    """Closed-form equilibrium budgets for an admitted participant set."""
    nus = np.asarray(participant_nus, dtype=float)
    k = nus.size
    total = math.fsum(nus)
    return (k - 1) * R / total * ((total - (k - 1) * nus) / total)


def nash_equilibrium(users: Sequence[UserProfile], R: float) -> EquilibriumResult:
    if len(users) < 2:
        raise PopulationTooSmall(f"need at least 2 users, got {len(users)}")
    if not R > 0:
        raise ValueError(f"reward must be positive, got {R}")
    for u in users:
        if CostKind(u.kind) is not CostKind.LINEAR:
            raise ValueError("equilibrium closed form is only available for linear cost")
    _check_ids(users)
    # ties in nu break on id, so order positions by (nu, id)
    order = sorted(range(len(users)), key=lambda p: (users[p].nu, users[p].id))
    nus = np.array([users[p].nu for p in order])
    s_sorted = participant_set(nus)
    s_pos = [order[k] for k in s_sorted]
    rho_s = equilibrium_budgets(nus[s_sorted], R)
    budgets = [NON_PARTICIPATING] * len(users)
    for pos, r in zip(s_pos, rho_s):
        budgets[pos] = float(r)
    profile = StrategyProfile(tuple(budgets))
    return EquilibriumResult(
        participants=tuple(users[p].id for p in s_pos),
        budgets=profile,
        payments=payment(profile, R),
        reward=float(R),
    )


@dataclass(frozen=True)
class EquilibriumCheck:
    verified: bool
    max_violation: float
    testable: bool = True
    worst_user: int | None = None


def _deviation_utility(rho, others, R, cost):
    return R * rho / (rho + others) - cost(rho)


def verify_equilibrium(
    result: EquilibriumResult,
    users: Sequence[UserProfile],
    R: float,
    grid: int = 2001,
    rho_max: float | None = None,
    tol: float | None = None,
) -> EquilibriumCheck:
    """Search for a profitable unilateral deviation.

    Every user's utility is scanned on a grid over ``(0, rho_max]`` and the
    best grid cell is refined with golden-section search. ``tol`` defaults to
    ``1e-9 * R``. A market where some user faces no rivals has no well-defined
    entry payoff and is reported as untestable.
    """
    tol = 1e-9 * R if tol is None else tol
    rho = result.budgets.positive()
    if rho_max is None:
        rho_max = 10.0 * rho.max() if rho.max() > 0 else 0.0
    worst, worst_user = 0.0, None
    for pos, u in enumerate(users):
        others = math.fsum(np.delete(rho, pos))
        if others <= 0 or rho_max <= 0:
            return EquilibriumCheck(False, math.inf, testable=False)
        current = _deviation_utility(rho[pos], others, R, u.cost) if rho[pos] > 0 else 0.0
        xs = np.concatenate([
            np.linspace(rho_max / grid, rho_max, grid),
            np.geomspace(rho_max * 1e-12, rho_max, grid),
        ])
        xs.sort()
        vals = _deviation_utility(xs, others, R, u.cost)
        j = int(np.argmax(vals))
        lo = xs[j - 1] if j > 0 else 0.0
        hi = xs[j + 1] if j + 1 < xs.size else xs[j]
        _, best, _ = golden_section_max(
            lambda x: _deviation_utility(x, others, R, u.cost), lo, hi, xtol=1e-10
        )
        best = max(best, float(vals[j]))
        gain = best - current
        if gain > worst:
            worst, worst_user = gain, u.id
    return EquilibriumCheck(worst <= tol, worst, True, worst_user)
