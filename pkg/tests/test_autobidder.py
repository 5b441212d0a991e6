import numpy as np
import pytest

from arena.autobidder import (best_response, check_equilibrium_bid_bounds,
                              check_undominated, evaluate_bids,
                              fpa_best_response, rfpa_best_response,
                              rfpa_grid_best_response, uniform_best_response)
from arena.core import Instance
from arena.errors import InvalidInstanceError, OraclePreconditionError
from arena.mechanisms import MechanismSpec


def two_adv(values):
    return Instance(values=np.array(values, dtype=float), targets=np.ones(2))


# ---------------------------------------------------------------------------
# uniform multiplier (spa / rtruth)
# ---------------------------------------------------------------------------

def test_uniform_spa_wins_everything_cheaply():
    inst = two_adv([[1.0, 0.5], [0.1, 0.1]])
    bids = np.array([[0.0, 0.0], [0.6, 0.2]])
    br = uniform_best_response(inst, 0, bids, MechanismSpec.spa())
    assert br.value == pytest.approx(1.5)
    assert br.spend == pytest.approx(0.8)
    assert br.slack >= 0
    assert br.info["multiplier"] == pytest.approx(1.0)


def test_uniform_spa_stops_below_unaffordable_query():
    # winning the first query would cost 1.5 against a value of 1, so the
    # multiplier must stay below 1.5 and only the second query is won
    inst = two_adv([[1.0, 0.5], [0.1, 0.1]])
    bids = np.array([[0.0, 0.0], [1.5, 0.2]])
    br = uniform_best_response(inst, 0, bids, MechanismSpec.spa())
    assert br.value == pytest.approx(0.5)
    assert br.spend == pytest.approx(0.2)
    assert br.info["multiplier"] < 1.5


def test_uniform_rtruth_feasible_and_at_least_truthful():
    rng = np.random.default_rng(17)
    spec = MechanismSpec.rtruth(1.4)
    for _ in range(25):
        inst = two_adv(rng.uniform(0.1, 1.0, size=(2, 6)))
        bids = rng.uniform(0.05, 1.5, size=(2, 6))
        adv = int(rng.integers(0, 2))
        br = uniform_best_response(inst, adv, bids, spec)
        assert br.slack >= -1e-9
        v1, s1 = evaluate_bids(inst, adv, bids, inst.values[adv], spec)
        assert br.value >= v1 - 1e-9
        assert br.info["multiplier"] >= 1.0


def test_uniform_rejects_first_price_rules():
    inst = two_adv([[1.0], [0.5]])
    with pytest.raises(InvalidInstanceError):
        uniform_best_response(inst, 0, np.ones((2, 1)), MechanismSpec.fpa())


# ---------------------------------------------------------------------------
# rfpa dual decomposition
# ---------------------------------------------------------------------------

def test_rfpa_rich_bidder_takes_everything_outright():
    inst = two_adv([[1.0, 0.8], [0.1, 0.1]])
    bids = np.array([[0.0, 0.0], [0.1, 0.2]])
    br = rfpa_best_response(inst, 0, bids, 1.4)
    assert br.info["lambda"] == 0.0
    np.testing.assert_allclose(br.bids, [0.14, 0.28], rtol=1e-12)
    assert br.value == pytest.approx(1.8)
    assert br.spend == pytest.approx(0.42)


def test_rfpa_free_and_idle_queries():
    inst = two_adv([[1.0, 0.0], [0.1, 0.1]])
    bids = np.array([[0.0, 0.0], [0.0, 0.5]])
    br = rfpa_best_response(inst, 0, bids, 1.4)
    # opponent silent on the valued query: grab it at a tick
    assert 0 < br.bids[0] < 1e-4
    # zero own value against a live opponent: park at the window bottom
    assert br.bids[1] == pytest.approx(0.5 / 1.4)
    assert br.value == pytest.approx(1.0)


def test_rfpa_blocked_by_sure_win_opponent():
    # opponent bids exactly alpha times our value on every query, leaving
    # only the zero-share boundary feasible; the solver must return it
    # rather than fail on the negative rounding dust at the dual endpoint
    alpha = 1.05
    v = np.array([0.49654781, 0.48172796, 0.70763179, 0.99820913])
    inst = Instance(values=np.vstack([v, np.ones_like(v)]), targets=np.ones(2))
    bids = np.vstack([np.zeros_like(v), alpha * v])
    br = rfpa_best_response(inst, 0, bids, alpha)
    assert br.value <= 1e-9
    assert br.slack >= -1e-9


def test_rfpa_respects_ros_on_random_inputs():
    rng = np.random.default_rng(19)
    for _ in range(30):
        alpha = float(rng.uniform(1.05, 2.5))
        m = int(rng.integers(1, 8))
        inst = two_adv(rng.uniform(0.05, 1.0, size=(2, m)))
        bids = np.vstack([np.zeros(m), rng.uniform(0.02, 1.5, size=m)])
        br = rfpa_best_response(inst, 0, bids, alpha)
        assert br.slack >= -1e-7 * max(1.0, br.value)
        # replaying the returned bids reproduces the reported value/spend
        v, s = evaluate_bids(inst, 0, bids, br.bids, MechanismSpec.rfpa(alpha))
        assert v == pytest.approx(br.value, abs=1e-9)
        assert s == pytest.approx(br.spend, abs=1e-9)


def test_rfpa_dual_matches_grid_oracle_small_batch():
    rng = np.random.default_rng(21)
    for _ in range(20):
        m = int(rng.integers(1, 4))
        inst = two_adv(rng.uniform(0.05, 1.0, size=(2, m)))
        bids = np.vstack([np.zeros(m), rng.uniform(0.02, 1.5, size=m)])
        d = rfpa_best_response(inst, 0, bids, 1.3)
        g = rfpa_grid_best_response(inst, 0, bids, 1.3)
        assert abs(d.value - g.value) <= max(1e-3, 1e-3 * max(d.value, g.value))


def test_rfpa_needs_two_advertisers_and_alpha_above_one():
    inst = Instance(values=np.ones((3, 2)), targets=np.ones(3))
    with pytest.raises(InvalidInstanceError):
        rfpa_best_response(inst, 0, np.ones((3, 2)), 1.4)
    inst = two_adv([[1.0], [1.0]])
    with pytest.raises(InvalidInstanceError):
        rfpa_best_response(inst, 0, np.ones((2, 1)), 1.0)


# ---------------------------------------------------------------------------
# fpa knapsack
# ---------------------------------------------------------------------------

def test_fpa_picks_the_affordable_subset():
    inst = two_adv([[3.0, 2.2], [1.0, 1.0]])
    bids = np.array([[0.0, 0.0], [2.9, 2.4]])
    br = fpa_best_response(inst, 0, bids)
    # both queries together cost 5.3 > 5.2 and the second alone costs more
    # than its value, so the best feasible set is the first query only
    assert br.value == pytest.approx(3.0)
    assert br.bids[0] > 2.9
    assert br.bids[1] == 0.0
    assert br.method == "knapsack-dp"


def test_fpa_free_queries_cost_a_tick():
    inst = two_adv([[1.0, 0.5], [0.2, 0.2]])
    bids = np.zeros((2, 2))
    br = fpa_best_response(inst, 0, bids)
    assert br.value == pytest.approx(1.5)
    assert br.spend < 1e-4


def test_fpa_greedy_used_beyond_exact_cutoff():
    rng = np.random.default_rng(23)
    m = 25
    inst = two_adv(rng.uniform(0.3, 1.0, size=(2, m)))
    bids = np.vstack([np.zeros(m), rng.uniform(0.1, 1.2, size=m)])
    br = fpa_best_response(inst, 0, bids)
    assert br.method == "knapsack-greedy"
    assert br.slack >= -1e-6
    exact = fpa_best_response(inst, 0, bids, max_exact=m)
    assert exact.method == "knapsack-dp"
    assert br.value <= exact.value + 1e-9


def test_best_response_dispatch():
    inst = two_adv([[1.0], [0.5]])
    bids = np.array([[0.0], [0.5]])
    assert best_response(inst, 0, bids, MechanismSpec.spa()).method == \
        "uniform-multiplier"
    assert best_response(inst, 0, bids, MechanismSpec.rtruth(1.4)).method == \
        "uniform-multiplier"
    assert best_response(inst, 0, bids, MechanismSpec.rfpa(1.4)).method == \
        "dual-decomposition"
    assert best_response(inst, 0, bids, MechanismSpec.fpa()).method.startswith(
        "knapsack")
    # randomized first price with alpha = 1 degrades to the plain knapsack
    assert best_response(inst, 0, bids, MechanismSpec.rfpa(1.0)).method.startswith(
        "knapsack")


# ---------------------------------------------------------------------------
# profile checks
# ---------------------------------------------------------------------------

def test_undominated_flags_a_skipped_free_query():
    inst = two_adv([[1.0, 1.0], [0.1, 0.1]])
    bids = np.array([[1.0, 0.0], [0.1, 0.1]])
    rep = check_undominated(inst, bids, MechanismSpec.spa())
    assert not rep.ok
    advs = {v[0] for v in rep.violations}
    assert 0 in advs


def test_undominated_requires_a_feasible_profile():
    inst = two_adv([[1.0], [1.0]])
    bids = np.array([[2.0], [0.1]])  # winner pays 2 against a value of 1
    with pytest.raises(OraclePreconditionError):
        check_undominated(inst, bids, MechanismSpec.fpa())


def test_bid_bounds_flag_a_cheap_sure_winner():
    inst = two_adv([[1.0], [0.8]])
    bids = np.array([[1.0], [0.5]])  # outright win while bidding under 1.12
    rep = check_equilibrium_bid_bounds(inst, bids, 1.4)
    assert not rep.ok
    assert rep.sure_win_flags


def test_bid_bounds_flag_a_low_shared_bid():
    inst = two_adv([[1.0], [0.8]])
    bids = np.array([[0.6], [0.55]])  # interior split, both bids too low
    rep = check_equilibrium_bid_bounds(inst, bids, 1.4)
    assert not rep.ok
    assert rep.shared_flags


def test_bid_bounds_accept_a_compliant_interior_profile():
    inst = two_adv([[1.0], [0.8]])
    bids = np.array([[0.75], [0.7]])
    rep = check_equilibrium_bid_bounds(inst, bids, 1.4)
    assert rep.ok
