"""Single-query auction rules.

Four mechanisms share one interface: given the bid vector for a query,
return win probabilities and expected payments.

* fpa / spa: highest bidder wins outright (ties to the lowest index) and
  pays its own bid / the second-highest bid.
* rfpa(alpha): two bidders.  When the bid ratio lies within [1/alpha, alpha]
  the higher bidder wins with probability 1/2 + log_alpha(ratio)/2, otherwise
  outright.  The winner is charged its own bid, so expected payments are
  win_prob * bid.
* rtruth(alpha): same allocation curve as rfpa, with payments replaced by
  the truthful (Myerson) prices of that curve.

alpha = 1 degenerates the allocation curve to a step, so rfpa(1) == fpa and
rtruth(1) == spa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import QueryOutcome
from .errors import AmbiguousOutcomeError, InvalidInstanceError, OraclePreconditionError

RFPA = "rfpa"
RTRUTH = "rtruth"
SPA = "spa"
FPA = "fpa"
KINDS = (RFPA, RTRUTH, SPA, FPA)


@dataclass(frozen=True)
class MechanismSpec:
    """A mechanism kind plus its tuning knob.

    alpha is the randomization half-width for rfpa/rtruth (>= 1) and must be
    None for spa/fpa.  Ties always resolve to the lowest advertiser index.
    """

    kind: str
    alpha: float | None = None
    tie_break: str = "lowest-index"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInstanceError(f"unknown mechanism kind {self.kind!r}")
        if self.kind in (RFPA, RTRUTH):
            if self.alpha is None or not (self.alpha >= 1.0) or not math.isfinite(self.alpha):
                raise InvalidInstanceError(f"{self.kind} needs alpha >= 1, got {self.alpha}")
        elif self.alpha is not None:
            raise InvalidInstanceError(f"{self.kind} takes no alpha")
        if self.tie_break != "lowest-index":
            raise InvalidInstanceError("only lowest-index tie-breaking is implemented")

    @classmethod
    def spa(cls) -> "MechanismSpec":
        return cls(SPA)

    @classmethod
    def fpa(cls) -> "MechanismSpec":
        return cls(FPA)

    @classmethod
    def rfpa(cls, alpha: float) -> "MechanismSpec":
        return cls(RFPA, alpha)

    @classmethod
    def rtruth(cls, alpha: float) -> "MechanismSpec":
        return cls(RTRUTH, alpha)

    @property
    def label(self) -> str:
        if self.alpha is None:
            return self.kind
        return f"{self.kind}({self.alpha:g})"


def fpa_outcome(bids) -> QueryOutcome:
    """First price: highest bid wins (tie -> lowest index) and pays itself."""
    bids = np.atleast_1d(np.asarray(bids, dtype=float))
    if bids.size < 2:
        raise InvalidInstanceError("need at least two bids")
    w = int(np.argmax(bids))
    wp = np.zeros_like(bids)
    pay = np.zeros_like(bids)
    wp[w] = 1.0
    pay[w] = bids[w]
    return QueryOutcome(wp, pay)


def spa_outcome(bids) -> QueryOutcome:
    """Second price: highest bid wins (tie -> lowest index), pays the runner-up."""
    bids = np.atleast_1d(np.asarray(bids, dtype=float))
    if bids.size < 2:
        raise InvalidInstanceError("need at least two bids")
    w = int(np.argmax(bids))
    second = np.partition(bids, -2)[-2]
    wp = np.zeros_like(bids)
    pay = np.zeros_like(bids)
    wp[w] = 1.0
    pay[w] = float(second)
    return QueryOutcome(wp, pay)


def _log_ratio(b1: float, b2: float) -> float:
    # compute ln(b1/b2) stably for positive bids
    return math.log(b1) - math.log(b2)


def outright_price_scale(alpha: float) -> float:
    """Expected payment per unit of opponent bid for an outright winner
    under truthful pricing of the randomized allocation: (a - 1/a)/(2 ln a).
    Tends to 1 as alpha -> 1 (second price)."""
    if not alpha >= 1.0:
        raise InvalidInstanceError(f"alpha must be >= 1, got {alpha}")
    if alpha == 1.0:
        return 1.0
    return (alpha - 1.0 / alpha) / (2.0 * math.log(alpha))


def rfpa_win_prob(b1: float, b2: float, alpha: float) -> float:
    """Probability that bidder 1 wins under the randomized first-price rule."""
    if b1 <= 0.0 and b2 <= 0.0:
        raise AmbiguousOutcomeError("rfpa needs at least one positive bid")
    if b1 <= 0.0:
        return 0.0
    if b2 <= 0.0:
        return 1.0
    la = math.log(alpha)
    d = _log_ratio(b1, b2)
    if d >= la:
        return 1.0
    if d <= -la:
        return 0.0
    return 0.5 * (1.0 + d / la)


def rfpa_outcome(b1: float, b2: float, alpha: float) -> QueryOutcome:
    """Randomized first price for two bidders.

    The winner pays its own bid, so expected payments are win_prob * bid.
    alpha = 1 is the plain first-price auction.  Both bids zero is ambiguous
    and raises; callers treat such queries as unallocated.
    """
    if not alpha >= 1.0:
        raise InvalidInstanceError(f"alpha must be >= 1, got {alpha}")
    if alpha == 1.0:
        return fpa_outcome([b1, b2])
    p1 = rfpa_win_prob(b1, b2, alpha)
    wp = np.array([p1, 1.0 - p1])
    pay = wp * np.array([b1, b2], dtype=float)
    return QueryOutcome(wp, pay)


def rtruth_outcome(b1: float, b2: float, alpha: float) -> QueryOutcome:
    """Truthful pricing of the rfpa allocation curve.

    For a bid ratio beta = b1/b2 inside [1/alpha, alpha] the expected
    payments are

        c1 = b2 (beta - 1/alpha) / (2 ln alpha)
        c2 = b1 (1/beta - 1/alpha) / (2 ln alpha)

    and an outright winner pays the opponent's bid times
    (alpha - 1/alpha) / (2 ln alpha).  These close the Myerson integral of
    the allocation curve exactly; see myerson_price_numeric for the check.
    """
    if not alpha >= 1.0:
        raise InvalidInstanceError(f"alpha must be >= 1, got {alpha}")
    if alpha == 1.0:
        return spa_outcome([b1, b2])
    if b1 <= 0.0 and b2 <= 0.0:
        raise AmbiguousOutcomeError("rtruth needs at least one positive bid")
    la = math.log(alpha)
    scale = outright_price_scale(alpha)
    if b1 <= 0.0:
        return QueryOutcome(np.array([0.0, 1.0]), np.array([0.0, b1 * scale]))
    if b2 <= 0.0:
        return QueryOutcome(np.array([1.0, 0.0]), np.array([b2 * scale, 0.0]))
    d = _log_ratio(b1, b2)
    if d >= la:
        return QueryOutcome(np.array([1.0, 0.0]), np.array([b2 * scale, 0.0]))
    if d <= -la:
        return QueryOutcome(np.array([0.0, 1.0]), np.array([0.0, b1 * scale]))
    p1 = 0.5 * (1.0 + d / la)
    beta = b1 / b2
    c1 = b2 * (beta - 1.0 / alpha) / (2.0 * la)
    c2 = b1 * (1.0 / beta - 1.0 / alpha) / (2.0 * la)
    return QueryOutcome(np.array([p1, 1.0 - p1]), np.array([c1, c2]))


def query_outcome(spec: MechanismSpec, bids) -> QueryOutcome:
    """Dispatch one query's bid vector through the mechanism."""
    bids = np.atleast_1d(np.asarray(bids, dtype=float))
    if spec.kind == FPA:
        return fpa_outcome(bids)
    if spec.kind == SPA:
        return spa_outcome(bids)
    if bids.size != 2:
        raise InvalidInstanceError(f"{spec.kind} is defined for exactly two bidders")
    if spec.kind == RFPA:
        return rfpa_outcome(bids[0], bids[1], spec.alpha)
    return rtruth_outcome(bids[0], bids[1], spec.alpha)


def profile_outcomes(bid_matrix, spec: MechanismSpec) -> tuple[np.ndarray, np.ndarray]:
    """Run every query of an (n, m) bid matrix.

    Queries where every bid is zero are left unallocated (zero win
    probabilities and payments) for the two-bidder randomized mechanisms,
    where the outcome would otherwise be ambiguous.

    Returns (win_prob, expected_payment), both (n, m).
    """
    bids = np.atleast_2d(np.asarray(bid_matrix, dtype=float))
    n, m = bids.shape
    wp = np.zeros((n, m))
    pay = np.zeros((n, m))
    for j in range(m):
        try:
            out = query_outcome(spec, bids[:, j])
        except AmbiguousOutcomeError:
            continue
        wp[:, j] = out.win_prob
        pay[:, j] = out.expected_payment
    return wp, pay


def myerson_price_numeric(win_prob_curve, bid: float, *, grid_points: int = 256,
                          tol: float = 1e-10) -> float:
    """Expected truthful payment b * pi(b) - integral_0^b pi(z) dz.

    win_prob_curve maps an own-bid to a win probability in [0, 1] with the
    opponent's bid held fixed.  The curve must be non-decreasing; this is
    checked on a uniform grid before integrating.  The integral uses
    adaptive quadrature with absolute tolerance well below 1e-9.
    """
    from scipy.integrate import quad

    if bid < 0:
        raise OraclePreconditionError("bid must be non-negative")
    if bid == 0:
        return 0.0
    zs = np.linspace(0.0, bid, grid_points)
    ps = np.array([win_prob_curve(z) for z in zs], dtype=float)
    if np.any(ps < -1e-12) or np.any(ps > 1 + 1e-12):
        raise OraclePreconditionError("win probabilities must lie in [0, 1]")
    if np.any(np.diff(ps) < -1e-9):
        raise OraclePreconditionError("win-probability curve is not non-decreasing")
    # full_output=1 suppresses the warning chatter on piecewise curves
    res = quad(win_prob_curve, 0.0, bid, epsabs=tol, epsrel=1e-12,
               limit=200, full_output=1)
    integral = res[0]
    return float(bid * win_prob_curve(bid) - integral)
