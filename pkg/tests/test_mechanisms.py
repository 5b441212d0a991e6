import math

import numpy as np
import pytest

from arena.errors import (AmbiguousOutcomeError, InvalidInstanceError,
                          OraclePreconditionError)
from arena.mechanisms import (MechanismSpec, fpa_outcome,
                              myerson_price_numeric, outright_price_scale,
                              profile_outcomes, query_outcome, rfpa_outcome,
                              rfpa_win_prob, rtruth_outcome, spa_outcome)


def test_spec_validation():
    with pytest.raises(InvalidInstanceError):
        MechanismSpec("rfpa")  # alpha required
    with pytest.raises(InvalidInstanceError):
        MechanismSpec("spa", alpha=1.4)
    with pytest.raises(InvalidInstanceError):
        MechanismSpec("rfpa", alpha=0.9)
    with pytest.raises(InvalidInstanceError):
        MechanismSpec("vcg")
    assert MechanismSpec.rfpa(1.4).label == "rfpa(1.4)"
    assert MechanismSpec.spa().label == "spa"


def test_fpa_spa_winner_and_payment():
    out = fpa_outcome([1.0, 0.9])
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    np.testing.assert_allclose(out.expected_payment, [1.0, 0.0])
    out = spa_outcome([1.0, 0.9])
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    np.testing.assert_allclose(out.expected_payment, [0.9, 0.0])


def test_tie_goes_to_lowest_index():
    out = spa_outcome([0.5, 0.5])
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    assert out.expected_payment[0] == pytest.approx(0.5)
    out = fpa_outcome([0.7, 0.7, 0.7])
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0, 0.0])


def test_rfpa_symmetric_bids_split_evenly():
    out = rfpa_outcome(1.0, 1.0, 1.4)
    np.testing.assert_allclose(out.win_prob, [0.5, 0.5])
    np.testing.assert_allclose(out.expected_payment, [0.5, 0.5])


def test_rfpa_boundary_is_outright():
    out = rfpa_outcome(1.4, 1.0, 1.4)
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    assert out.expected_payment[0] == pytest.approx(1.4)
    out = rfpa_outcome(2.0, 1.0, 1.4)  # beyond the window
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    assert out.expected_payment[0] == pytest.approx(2.0)


def test_rfpa_interior_point():
    # bid ratio sqrt(alpha) sits three quarters of the way up the curve
    out = rfpa_outcome(math.sqrt(1.4), 1.0, 1.4)
    assert out.win_prob[0] == pytest.approx(0.75, abs=1e-15)
    assert out.expected_payment[0] == pytest.approx(0.8874119674649423, abs=1e-12)


def test_rfpa_win_prob_matches_closed_form_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        alpha = float(rng.uniform(1.01, 3.0))
        b2 = float(rng.uniform(0.1, 2.0))
        beta = float(rng.uniform(1.0 / alpha, alpha))
        b1 = beta * b2
        p = rfpa_win_prob(b1, b2, alpha)
        expected = 0.5 * (1.0 + math.log(b1 / b2) / math.log(alpha))
        assert p == pytest.approx(min(1.0, max(0.0, expected)), abs=1e-10)


def test_rfpa_anonymity_and_probability_mass():
    rng = np.random.default_rng(12)
    for _ in range(100):
        alpha = float(rng.uniform(1.01, 3.0))
        b1, b2 = rng.uniform(0.05, 2.0, size=2)
        a = rfpa_outcome(b1, b2, alpha)
        b = rfpa_outcome(b2, b1, alpha)
        assert a.win_prob.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(a.win_prob, b.win_prob[::-1], atol=1e-12)
        np.testing.assert_allclose(a.expected_payment, b.expected_payment[::-1],
                                   atol=1e-12)


def test_rfpa_alpha_one_is_first_price():
    out = rfpa_outcome(1.0, 0.9, 1.0)
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    assert out.expected_payment[0] == pytest.approx(1.0)


def test_rtruth_prices_symmetric_and_boundary():
    out = rtruth_outcome(1.0, 1.0, 1.4)
    np.testing.assert_allclose(out.win_prob, [0.5, 0.5])
    assert out.expected_payment[0] == pytest.approx(0.42457334456978024, abs=1e-12)
    assert out.expected_payment[1] == pytest.approx(0.42457334456978024, abs=1e-12)
    # outright winner pays the opponent bid times the price scale
    out = rtruth_outcome(1.4, 1.0, 1.4)
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    assert out.expected_payment[0] == pytest.approx(1.0189760269674724, abs=1e-12)
    # sliding to the bottom of the window zeroes both share and price
    out = rtruth_outcome(1.0 / 1.4, 1.0, 1.4)
    assert out.win_prob[0] == pytest.approx(0.0, abs=1e-12)
    assert out.expected_payment[0] == pytest.approx(0.0, abs=1e-12)


def test_rtruth_price_continuous_at_window_edge():
    alpha = 1.7
    inside = rtruth_outcome(alpha * (1 - 1e-12), 1.0, alpha)
    outside = rtruth_outcome(alpha * (1 + 1e-12), 1.0, alpha)
    assert inside.expected_payment[0] == pytest.approx(
        outside.expected_payment[0], rel=1e-9)


def test_rtruth_alpha_one_is_second_price():
    out = rtruth_outcome(1.0, 0.9, 1.0)
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0])
    assert out.expected_payment[0] == pytest.approx(0.9)


def test_rtruth_and_rfpa_share_the_allocation():
    rng = np.random.default_rng(13)
    for _ in range(100):
        alpha = float(rng.uniform(1.01, 3.0))
        b1, b2 = rng.uniform(0.05, 2.0, size=2)
        np.testing.assert_allclose(rtruth_outcome(b1, b2, alpha).win_prob,
                                   rfpa_outcome(b1, b2, alpha).win_prob,
                                   atol=1e-14)


def test_outright_price_scale_values():
    assert outright_price_scale(1.0) == pytest.approx(1.0)
    assert outright_price_scale(1.4) == pytest.approx(1.0189760269674724,
                                                      abs=1e-12)
    # tends to 1 from above as the window narrows
    assert outright_price_scale(1.0 + 1e-8) == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(InvalidInstanceError):
        outright_price_scale(0.8)


def test_both_zero_bids_are_ambiguous():
    with pytest.raises(AmbiguousOutcomeError):
        rfpa_outcome(0.0, 0.0, 1.4)
    with pytest.raises(AmbiguousOutcomeError):
        rtruth_outcome(0.0, 0.0, 1.4)


def test_profile_outcomes_leaves_all_zero_queries_unallocated():
    bids = np.array([[1.0, 0.0], [0.5, 0.0]])
    wp, pay = profile_outcomes(bids, MechanismSpec.rfpa(1.4))
    assert wp[:, 1].sum() == 0.0
    assert pay[:, 1].sum() == 0.0
    assert wp[:, 0].sum() == pytest.approx(1.0)


def test_query_outcome_dispatch_requires_two_bidders_for_randomized():
    with pytest.raises(InvalidInstanceError):
        query_outcome(MechanismSpec.rfpa(1.4), [1.0, 0.9, 0.8])
    out = query_outcome(MechanismSpec.spa(), [1.0, 0.9, 0.8])
    np.testing.assert_allclose(out.win_prob, [1.0, 0.0, 0.0])
    assert out.expected_payment[0] == pytest.approx(0.9)


def test_myerson_numeric_matches_rtruth_closed_form():
    # small version of the full 50x4 acceptance grid
    for alpha in (1.4, 2.0):
        for beta in np.geomspace(1.0 / alpha, alpha, 7):
            closed = rtruth_outcome(float(beta), 1.0, alpha).expected_payment[0]
            numeric = myerson_price_numeric(
                lambda z: rfpa_win_prob(z, 1.0, alpha) if z > 0 else 0.0,
                float(beta))
            assert numeric == pytest.approx(closed, abs=1e-7)


def test_myerson_numeric_rejects_decreasing_curves():
    with pytest.raises(OraclePreconditionError):
        myerson_price_numeric(lambda z: max(0.0, 1.0 - z), 1.0)
    assert myerson_price_numeric(lambda z: 0.0, 2.0) == 0.0
