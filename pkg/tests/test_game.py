import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedincentive.errors import AllNonParticipating, DegenerateOpponents, PopulationTooSmall
from fedincentive.game import (
    NON_PARTICIPATING, CostFamily, CostKind, EquilibriumResult, StrategyProfile, UserProfile,
    best_response, equilibrium_budgets, make_population, nash_equilibrium, participant_set,
    payment, user_cost, user_utility, verify_equilibrium,
)

NP = NON_PARTICIPATING

nus_st = st.lists(st.floats(1.0, 10.0), min_size=2, max_size=30)
reward_st = st.floats(1.0, 100.0)


def brute_best_response(others, nu, R, cost=None):
    """Maximise R*rho/(rho+others) - cost on a dense grid refined twice."""
    cost = cost or (lambda r: nu * r)
    lo, hi = 0.0, 10.0 * R / max(nu, 1e-12)
    for _ in range(4):
        xs = np.linspace(lo, hi, 20001)
        vals = R * xs / (xs + others) - cost(xs)
        j = int(np.argmax(vals))
        step = xs[1] - xs[0]
        lo, hi = max(xs[j] - step, 0.0), xs[j] + step
    return xs[j], vals[j]


# --- payment -----------------------------------------------------------------

def test_payment_proportional_split():
    np.testing.assert_allclose(payment(StrategyProfile((1, 1, 2)), 8), [2, 2, 4])


def test_payment_symmetric():
    np.testing.assert_allclose(payment(StrategyProfile((0.3,) * 7), 5.0), [5 / 7] * 7)


def test_payment_derived_example():
    np.testing.assert_allclose(payment(StrategyProfile((20 / 9, 10 / 9)), 10), [20 / 3, 10 / 3])


def test_payment_non_participants_get_zero():
    p = payment(StrategyProfile((2.0, NP, 1.0)), 3.0)
    assert p[1] == 0.0
    assert math.isclose(p.sum(), 3.0)


def test_payment_empty_market():
    with pytest.raises(AllNonParticipating):
        payment(StrategyProfile((NP, NP)), 1.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_profile_rejects_non_positive_budgets(bad):
    with pytest.raises(ValueError):
        StrategyProfile((1.0, bad))


def test_profile_needs_two_users():
    with pytest.raises(ValueError):
        StrategyProfile((1.0,))


@given(st.lists(st.one_of(st.just(NP), st.floats(1e-3, 1e3)), min_size=2, max_size=20), reward_st)
def test_payment_sums_to_reward(budgets, R):
    prof = StrategyProfile(tuple(budgets))
    if not prof.participating.any():
        return
    p = payment(prof, R)
    assert np.all(p >= 0)
    assert np.all(p[~prof.participating] == 0)
    assert math.isclose(math.fsum(p), R, rel_tol=1e-9)


# --- costs and utilities -----------------------------------------------------

@pytest.mark.parametrize("kind, rho, expected", [
    (CostKind.LINEAR, 3.0, 6.0),
    (CostKind.QUADRATIC, 3.0, 18.0),
    (CostKind.LINEAR, 0.0, 0.0),
    (CostKind.EXPONENTIAL, 0.5, math.e),
])
def test_user_cost(kind, rho, expected):
    assert math.isclose(user_cost(CostFamily(kind, 2.0), rho), expected)


def test_user_cost_rejects_negative():
    with pytest.raises(ValueError):
        user_cost(CostFamily(CostKind.LINEAR, 1.0), -1.0)


@given(st.sampled_from(list(CostKind)), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(1e-3, 2))
def test_cost_total_ordering(kind, a, b, rho):
    lo, hi = sorted((a, b))
    assert user_cost(CostFamily(kind, lo), rho) <= user_cost(CostFamily(kind, hi), rho)


@given(st.sampled_from(list(CostKind)), st.floats(0.1, 5), st.floats(0.0, 2), st.floats(1e-3, 1))
def test_cost_nonnegative_increasing(kind, nu, rho, step):
    c = CostFamily(kind, nu)
    assert c(rho) >= 0
    assert c(rho + step) > c(rho)


def test_user_utility_examples():
    users = make_population([1, 1])
    assert math.isclose(user_utility(0, StrategyProfile((1, 1)), users, 4), 1.0)
    users = make_population([1, 2])
    assert math.isclose(user_utility(1, StrategyProfile((20 / 9, 10 / 9)), users, 10), 10 / 9)


def test_user_utility_non_participant_is_zero():
    users = make_population([1, 2, 3])
    assert user_utility(2, StrategyProfile((1.0, 1.0, NP)), users, 5) == 0.0


def test_user_utility_empty_market_propagates():
    with pytest.raises(AllNonParticipating):
        user_utility(0, StrategyProfile((NP, NP)), make_population([1, 1]), 5)


def test_user_rejects_nonpositive_nu():
    with pytest.raises(ValueError):
        UserProfile(0, 0.0)


# --- best response -----------------------------------------------------------

def test_best_response_interior():
    assert math.isclose(best_response(1.0, 1.0, 4.0), 1.0)


def test_best_response_threshold_equality():
    assert best_response(10 / 3, 3.0, 10.0) == NP


def test_best_response_far_below_threshold():
    assert best_response(100.0, 1.0, 1.0) == NP


def test_best_response_degenerate():
    with pytest.raises(DegenerateOpponents):
        best_response(0.0, 1.0, 1.0)


@given(st.floats(0.01, 50), st.floats(0.5, 10), reward_st)
def test_best_response_matches_brute_force(others, nu, R):
    x, _ = brute_best_response(others, nu, R)
    br = best_response(others, nu, R)
    if br == NP:
        assert x <= 1e-6 * R / nu
    else:
        assert math.isclose(br, x, rel_tol=1e-4, abs_tol=1e-6 * R / nu)


@given(st.floats(0.01, 50), st.floats(0.5, 10), reward_st, st.floats(0.01, 10), st.floats(1.01, 3))
def test_user_utility_concave_in_budget(others, nu, R, r1, ratio):
    r2, r3 = r1 * ratio, r1 * ratio * ratio
    u = lambda r: R * r / (r + others) - nu * r
    w = (r3 - r2) / (r3 - r1)
    assert u(r2) >= w * u(r1) + (1 - w) * u(r3) - 1e-12 * R


# --- Nash equilibrium ----------------------------------------------------------

def test_nash_strict_admission_example():
    eq = nash_equilibrium(make_population([1, 2, 3]), 10)
    assert eq.participants == (0, 1)
    np.testing.assert_allclose(eq.budgets.budgets[:2], [20 / 9, 10 / 9], rtol=1e-12)
    assert eq.budgets.budgets[2] == NP
    assert eq.payments[2] == 0.0


def test_nash_boundary_user_has_zero_budget_under_weak_admission():
    # the user excluded above sits exactly on the admission boundary: including
    # it in S would give it a zero budget
    rho = equilibrium_budgets(np.array([1.0, 2.0, 3.0]), 10.0)
    assert rho[2] == 0.0


def test_nash_two_equal_users():
    eq = nash_equilibrium(make_population([1, 1]), 4)
    np.testing.assert_allclose(eq.budgets.budgets, [1, 1], rtol=1e-12)
    assert math.isclose(best_response(1.0, 1.0, 4.0), 1.0)


@pytest.mark.parametrize("n, v, R", [(2, 1.0, 4.0), (5, 2.5, 10.0), (40, 7.0, 0.3)])
def test_nash_symmetric_closed_form(n, v, R):
    eq = nash_equilibrium(make_population([v] * n), R)
    assert len(eq.participants) == n
    np.testing.assert_allclose(eq.budgets.budgets, (n - 1) * R / (n * n * v), rtol=1e-12)


def test_nash_population_too_small():
    with pytest.raises(PopulationTooSmall):
        nash_equilibrium(make_population([1.0]), 1.0)


def test_nash_rejects_nonlinear_cost():
    with pytest.raises(ValueError):
        nash_equilibrium(make_population([1, 2], CostKind.QUADRATIC), 1.0)


def test_nash_ties_broken_by_id():
    users = [UserProfile(5, 1.0), UserProfile(2, 1.0), UserProfile(9, 1.0)]
    assert nash_equilibrium(users, 1.0).participants == (2, 5, 9)


def test_participant_set_is_reward_free():
    assert list(participant_set([3, 1, 2])) == [1, 2]


def _enumerated_equilibrium(nus, R):
    """Enumerate every candidate participant set and keep those that are numeric equilibria."""
    users = make_population(nus)
    found = []
    for size in range(2, len(nus) + 1):
        for subset in itertools.combinations(range(len(nus)), size):
            rho = equilibrium_budgets(np.asarray(nus)[list(subset)], R)
            if np.any(rho <= 0):
                continue
            budgets = [NP] * len(nus)
            for j, r in zip(subset, rho):
                budgets[j] = r
            res = EquilibriumResult.from_profile(StrategyProfile(tuple(budgets)), users, R)
            if verify_equilibrium(res, users, R).verified:
                found.append(subset)
    return found


@pytest.mark.parametrize("seed", range(8))
def test_nash_matches_subset_enumeration(seed):
    rng = np.random.default_rng(seed)
    nus = rng.uniform(1, 4, size=rng.integers(2, 6)).tolist()
    R = float(rng.uniform(1, 50))
    found = _enumerated_equilibrium(nus, R)
    eq = nash_equilibrium(make_population(nus), R)
    assert found == [tuple(sorted(eq.participants))]


@given(nus_st, reward_st)
def test_observation_identities(nus, R):
    users = make_population(nus)
    eq = nash_equilibrium(users, R)
    nu = np.asarray(nus)
    rho = eq.budgets.positive()
    S = list(eq.participants)
    k, total_nu = len(S), math.fsum(nu[S])
    assert np.all(rho[S] > 0)
    assert math.isclose(math.fsum(rho[S]), (k - 1) * R / total_nu, rel_tol=1e-12)
    for i in S:
        rivals = math.fsum(rho[j] for j in S if j != i)
        assert math.isclose(rivals, (k - 1) ** 2 * R * nu[i] / total_nu ** 2, rel_tol=1e-12)
    for i in set(range(len(nus))) - set(S):
        assert nu[i] >= total_nu / (k - 1)


@given(nus_st, reward_st)
def test_equilibrium_is_best_response_fixed_point(nus, R):
    eq = nash_equilibrium(make_population(nus), R)
    rho = eq.budgets.positive()
    total = math.fsum(rho)
    for i, nu in enumerate(nus):
        if rho[i] > 0:
            rivals = math.fsum(np.delete(rho, i))
            assert math.isclose(best_response(rivals, nu, R), rho[i], rel_tol=1e-9)
        else:
            assert best_response(total, nu, R) == NP


@given(nus_st, reward_st, st.floats(0.01, 100))
def test_scale_equivariance(nus, R, k):
    users = make_population(nus)
    a, b = nash_equilibrium(users, R), nash_equilibrium(users, k * R)
    assert a.participants == b.participants
    np.testing.assert_allclose(b.budgets.positive(), k * a.budgets.positive(), rtol=1e-12)
    np.testing.assert_allclose(b.payments, k * a.payments, rtol=1e-12)


@given(nus_st, reward_st, st.randoms(use_true_random=False))
def test_permutation_invariance(nus, R, rnd):
    users = make_population(nus)
    shuffled = list(users)
    rnd.shuffle(shuffled)
    a, b = nash_equilibrium(users, R), nash_equilibrium(shuffled, R)
    by_id_a = dict(zip((u.id for u in users), a.budgets.budgets))
    by_id_b = dict(zip((u.id for u in shuffled), b.budgets.budgets))
    assert by_id_a == by_id_b


@given(nus_st, reward_st)
def test_participants_earn_nonnegative_utility(nus, R):
    users = make_population(nus)
    eq = nash_equilibrium(users, R)
    assert np.all(eq.utilities(users) >= -1e-12 * R)
    assert math.isclose(math.fsum(eq.payments), R, rel_tol=1e-9)


# --- verification ----------------------------------------------------------------

def test_verify_equilibrium_accepts_equilibrium():
    users = make_population([1, 1])
    check = verify_equilibrium(nash_equilibrium(users, 4), users, 4)
    assert check.verified and check.max_violation <= 1e-9 * 4


def test_verify_equilibrium_rejects_perturbed_profile():
    users = make_population([1, 1])
    res = EquilibriumResult.from_profile(StrategyProfile((1.5, 1.0)), users, 4)
    check = verify_equilibrium(res, users, 4)
    assert not check.verified
    assert check.worst_user == 0
    # U_1(1, 1) - U_1(1.5, 1) = 1 - 0.9
    assert math.isclose(check.max_violation, 0.1, rel_tol=1e-6)


def test_verify_equilibrium_empty_market_untestable():
    users = make_population([1, 1])
    res = EquilibriumResult((), StrategyProfile((NP, NP)), np.zeros(2), 4.0)
    check = verify_equilibrium(res, users, 4)
    assert not check.testable and not check.verified


def test_verify_detects_profitable_entry():
    # user 2 sits out although entering pays: R/rivals > nu
    users = make_population([1, 1, 1])
    res = EquilibriumResult.from_profile(StrategyProfile((1.0, 1.0, NP)), users, 4)
    check = verify_equilibrium(res, users, 4)
    assert not check.verified and check.worst_user == 2
