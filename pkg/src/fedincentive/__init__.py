"""Incentive mechanism for federated learning with privacy compensation.

Users sell zCDP privacy budget for a share of the server's reward; the
server picks the reward anticipating the users' Nash equilibrium, and the
budgets then set the Gaussian noise in private federated gradient descent.
"""

from .errors import (
    AllNonParticipating, ConfigError, DegenerateOpponents, DimensionMismatch,
    EmptyParticipantSet, EmptyResponseSet, MechanismError, NoInteriorMaximum,
    PopulationTooSmall, ZeroBudget, ZeroSigma,
)
from .game import (
    NON_PARTICIPATING, CostFamily, CostKind, EquilibriumResult, StrategyProfile,
    UserProfile, best_response, make_population, nash_equilibrium, payment,
    user_cost, user_utility, verify_equilibrium,
)
from .privacy import (
    NoiseSpec, QuerySensitivity, ZcdpBudget, calibrate_noise, compose,
    expected_noise_sq_norm, gaussian_zcdp, gradient_sensitivity,
)
from .server import (
    RewardSolution, SystemParams, accuracy_proxy, optimal_reward, server_utility,
    server_utility_derivative, x_coefficients,
)

__version__ = "0.1.0"
