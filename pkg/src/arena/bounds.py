"""Welfare-guarantee curves and matching worst-case instances.

The upper-bound side evaluates, for the randomized mechanisms, the largest
fraction f of optimal liquid welfare guaranteed at any undominated bid
profile.  f is a max over a convex weight split (gamma, eta = 1 - gamma)
of the min of three terms: a term for queries the optimal bidder loses
outright (priced high enough to cover), the matching probability term for
queries won outright, and a curve over the bid ratio beta for shared
queries.  1/f is then an upper bound on the price of anarchy.

The lower-bound side constructs small instances whose equilibria actually
realize (almost) the worst-case ratio, together with a verifier that
replays them through the mechanism and the deviation checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .core import Instance, BidProfile, liquid_welfare, optimal_welfare
from .equilibrium import GammaEqCheck, check_gamma_equilibrium
from .errors import InvalidInstanceError
from .mechanisms import (FPA, SPA, MechanismSpec, outright_price_scale,
                         profile_outcomes)

RFPA_VARIANT = "rfpa"
RTRUTH_VARIANT = "rtruth"


def _check_weights(gamma: float, eta: float) -> None:
    if gamma < 0 or eta < 0 or abs(gamma + eta - 1.0) > 1e-12:
        raise InvalidInstanceError(f"weights must satisfy gamma+eta=1, got {gamma}, {eta}")


def _check_alpha(alpha: float) -> None:
    if not alpha > 1.0:
        raise InvalidInstanceError(f"bound curves need alpha > 1, got {alpha}")


def shared_query_bound_rfpa(alpha, beta, gamma, eta):
    """Per-unit-value welfare guarantee on a query with bid ratio beta under
    the first-price payment rule.  Vectorized over beta."""
    _check_alpha(alpha)
    _check_weights(gamma, eta)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 1.0 / alpha - 1e-12) or np.any(beta > alpha + 1e-12):
        raise InvalidInstanceError("beta outside [1/alpha, alpha]")
    la = math.log(alpha)
    r = np.log(beta) / la
    denom = 1.0 + la + np.log(beta)
    match = 0.5 * (1.0 + r)
    out = gamma * match + eta * (1.0 + r) / (2.0 * denom) \
        + eta * (1.0 - r) / (2.0 * beta * denom)
    return out if out.ndim else float(out)


def shared_query_bound_rtruth(alpha, beta, gamma, eta):
    """Per-unit-value welfare guarantee on a shared query under truthful
    pricing of the randomized allocation.  Vectorized over beta."""
    _check_alpha(alpha)
    _check_weights(gamma, eta)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 1.0 / alpha - 1e-12) or np.any(beta > alpha + 1e-12):
        raise InvalidInstanceError("beta outside [1/alpha, alpha]")
    la = math.log(alpha)
    r = np.log(beta) / la
    match = 0.5 * (1.0 + r)
    out = gamma * match + eta * (1.0 - 1.0 / alpha) * (1.0 + 1.0 / beta) / (2.0 * la)
    return out if out.ndim else float(out)


_SHARED = {RFPA_VARIANT: shared_query_bound_rfpa,
           RTRUTH_VARIANT: shared_query_bound_rtruth}

#: rule names for the sure-win term: eta * alpha prices the lost query at
#: the winner's bid, eta * spend prices it at the truthful expected payment
SURE_WIN_ALPHA = "eta_alpha"
SURE_WIN_SPEND = "eta_spend"


def _sure_win_terms(alpha: float, eta: float, variant: str) -> dict:
    terms = {SURE_WIN_ALPHA: eta * alpha}
    if variant == RTRUTH_VARIANT:
        terms[SURE_WIN_SPEND] = eta * outright_price_scale(alpha)
    return terms


@dataclass(frozen=True)
class BoundEvaluation:
    """f = min(term_eta_alpha, term_gamma, min over the beta curve)."""

    alpha: float
    gamma: float
    eta: float
    variant: str
    sure_win_rule: str
    term_eta_alpha: float
    term_eta_alpha_by_rule: dict
    term_gamma: float
    betas: np.ndarray
    g_curve: np.ndarray
    g_min: float
    g_argmin: float
    f_value: float

    @property
    def poa_bound(self) -> float:
        return 1.0 / self.f_value if self.f_value > 0 else math.inf


def evaluate_welfare_bound(alpha: float, gamma: float, variant: str = RFPA_VARIANT,
                           *, beta_points: int = 4096,
                           sure_win_rule: str | None = None) -> BoundEvaluation:
    """Evaluate the three-term welfare guarantee at fixed (alpha, gamma).

    The beta curve is sampled on a log-spaced grid over [1/alpha, alpha]
    (the formulas are functions of ln beta) and its interior minimum is
    refined by golden-section search to 1e-8.  For the rtruth variant the
    sure-win term defaults to eta times the truthful outright payment
    coefficient (alpha - 1/alpha)/(2 ln alpha), which is what the pricing
    rule actually collects; the eta * alpha rule is also reported.
    """
    _check_alpha(alpha)
    if variant not in _SHARED:
        raise InvalidInstanceError(f"unknown variant {variant!r}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInstanceError(f"gamma must lie in [0, 1], got {gamma}")
    if beta_points < 1000:
        raise InvalidInstanceError("beta grid needs at least 1000 points")
    eta = 1.0 - gamma
    if sure_win_rule is None:
        sure_win_rule = SURE_WIN_SPEND if variant == RTRUTH_VARIANT else SURE_WIN_ALPHA
    g = _SHARED[variant]
    betas = np.geomspace(1.0 / alpha, alpha, beta_points)
    curve = g(alpha, betas, gamma, eta)

    k = int(np.argmin(curve))
    g_min = float(curve[k])
    g_argmin = float(betas[k])
    if 0 < k < beta_points - 1:
        res = minimize_scalar(lambda b: float(g(alpha, b, gamma, eta)),
                              bracket=(betas[k - 1], betas[k], betas[k + 1]),
                              method="golden", options={"xtol": 1e-8})
        if res.fun < g_min:
            g_min = float(res.fun)
            g_argmin = float(np.clip(res.x, 1.0 / alpha, alpha))

    terms = _sure_win_terms(alpha, eta, variant)
    term1 = terms[sure_win_rule]
    f_value = min(term1, gamma, g_min)
    return BoundEvaluation(
        alpha=alpha, gamma=gamma, eta=eta, variant=variant,
        sure_win_rule=sure_win_rule, term_eta_alpha=term1,
        term_eta_alpha_by_rule=terms, term_gamma=gamma, betas=betas,
        g_curve=curve, g_min=g_min, g_argmin=g_argmin, f_value=f_value)


@dataclass(frozen=True)
class BoundOptimum:
    alpha: float
    gamma: float
    f_value: float
    poa_bound: float
    evaluation: BoundEvaluation


def _best_gamma(alpha: float, variant: str, sure_win_rule: str | None,
                beta_points: int, gamma_step: float) -> tuple[float, float]:
    """Maximize min(term1, gamma, min_beta g) over gamma at fixed alpha.

    All three terms are concave (affine, affine, min of affine) in gamma,
    so a coarse grid plus local zooms suffices.
    """
    eta_of = lambda gam: 1.0 - gam
    g = _SHARED[variant]
    betas = np.geomspace(1.0 / alpha, alpha, beta_points)
    la = math.log(alpha)
    r = np.log(betas) / la
    match = 0.5 * (1.0 + r)
    if variant == RFPA_VARIANT:
        denom = 1.0 + la + np.log(betas)
        spend = (1.0 + r) / (2.0 * denom) + (1.0 - r) / (2.0 * betas * denom)
    else:
        spend = (1.0 - 1.0 / alpha) * (1.0 + 1.0 / betas) / (2.0 * la)
    if sure_win_rule is None:
        sure_win_rule = SURE_WIN_SPEND if variant == RTRUTH_VARIANT else SURE_WIN_ALPHA
    coef = alpha if sure_win_rule == SURE_WIN_ALPHA else outright_price_scale(alpha)

    def f_of(gammas: np.ndarray) -> np.ndarray:
        etas = 1.0 - gammas
        curve_min = (gammas[:, None] * match[None, :]
                     + etas[:, None] * spend[None, :]).min(axis=1)
        return np.minimum(np.minimum(etas * coef, gammas), curve_min)

    lo, hi = 0.0, 1.0
    best_g, best_f = 0.0, -np.inf
    step = gamma_step
    for _ in range(4):
        gammas = np.arange(lo, hi + 0.5 * step, step)
        vals = f_of(gammas)
        k = int(np.argmax(vals))
        if vals[k] > best_f:
            best_f = float(vals[k])
            best_g = float(gammas[k])
        lo = max(0.0, best_g - 2.0 * step)
        hi = min(1.0, best_g + 2.0 * step)
        step /= 10.0
    return best_g, best_f


def optimize_welfare_bound(variant: str = RFPA_VARIANT, *,
                           alpha: float | None = None,
                           alpha_range: tuple[float, float] = (1.05, 4.0),
                           alpha_points: int = 60,
                           gamma_step: float = 1e-3,
                           beta_points: int = 2048,
                           sure_win_rule: str | None = None) -> BoundOptimum:
    """Search for the (alpha, gamma) maximizing the welfare guarantee.

    With `alpha` given, only gamma is optimized.  Otherwise a log-spaced
    alpha grid over alpha_range is scanned and twice locally refined.  The
    winning pair is re-evaluated at full beta resolution.
    """
    if variant not in _SHARED:
        raise InvalidInstanceError(f"unknown variant {variant!r}")
    if alpha is not None:
        gam, _ = _best_gamma(alpha, variant, sure_win_rule, beta_points, gamma_step)
        ev = evaluate_welfare_bound(alpha, gam, variant, sure_win_rule=sure_win_rule)
        return BoundOptimum(alpha, gam, ev.f_value, ev.poa_bound, ev)

    lo, hi = alpha_range
    if not 1.0 < lo < hi:
        raise InvalidInstanceError(f"invalid alpha range {alpha_range}")
    best = (None, None, -np.inf)
    for _ in range(3):
        for a in np.geomspace(lo, hi, alpha_points):
            gam, f = _best_gamma(float(a), variant, sure_win_rule,
                                 beta_points, gamma_step)
            if f > best[2]:
                best = (float(a), gam, f)
        width = (hi / lo) ** (1.0 / (alpha_points - 1))
        lo = max(alpha_range[0], best[0] / width)
        hi = min(alpha_range[1], best[0] * width)
    ev = evaluate_welfare_bound(best[0], best[1], variant, sure_win_rule=sure_win_rule)
    return BoundOptimum(best[0], best[1], ev.f_value, ev.poa_bound, ev)


def sweep_welfare_bound(variant: str, alphas, *, gamma_step: float = 1e-3,
                        beta_points: int = 2048,
                        sure_win_rule: str | None = None) -> list[BoundOptimum]:
    """Best gamma and bound value for each alpha in `alphas`."""
    out = []
    for a in alphas:
        opt = optimize_welfare_bound(variant, alpha=float(a),
                                     gamma_step=gamma_step,
                                     beta_points=beta_points,
                                     sure_win_rule=sure_win_rule)
        out.append(opt)
    return out


# ---------------------------------------------------------------------------
# lower-bound instances
# ---------------------------------------------------------------------------

def rtruth_lower_bound_ratio(alpha: float) -> float:
    """Worst-case welfare ratio realized against truthful randomized
    pricing: 1 + 2 ln(alpha) / (alpha - 1/alpha).  Tends to 2 as
    alpha -> 1 and decreases in alpha."""
    if not alpha > 1.0:
        raise InvalidInstanceError(f"need alpha > 1, got {alpha}")
    return 1.0 + 1.0 / outright_price_scale(alpha)


@dataclass(frozen=True)
class LowerBoundInstance:
    """A concrete instance, equilibrium bids and the ratio they realize."""

    instance: Instance
    bids: BidProfile
    mechanism: MechanismSpec
    gamma: float
    predicted_ratio: float
    params: dict


@dataclass(frozen=True)
class LowerBoundCheck:
    ok: bool
    feasible: bool
    lw_eq: float
    lw_opt: float
    measured_ratio: float
    predicted_ratio: float
    ratio_rel_err: float
    gamma_check: GammaEqCheck


def make_rtruth_lb_instance(alpha: float, eps: float) -> LowerBoundInstance:
    """Two queries where truthful randomized pricing loses almost the
    worst-case factor.

    Advertiser 1 locks both queries outright: the first is worth 1 to it
    and nothing to the opponent, the second is a cheap decoy (value eps)
    the opponent values at 1/s, where s is the outright payment
    coefficient.  Winning the decoy costs advertiser 1 exactly 1, which its
    real value pays for; advertiser 2 cannot enter either query without
    spending above value, so gamma = 0.  The realized welfare ratio
    (1 + 1/s)/(1 + eps) approaches 1 + 1/s as eps -> 0.
    """
    if not alpha > 1.0:
        raise InvalidInstanceError(f"need alpha > 1, got {alpha}")
    s = outright_price_scale(alpha)
    if not 0.0 < eps < 1.0 / s:
        raise InvalidInstanceError(f"need 0 < eps < 1/s = {1.0 / s}, got {eps}")
    values = np.array([[1.0, eps], [0.0, 1.0 / s]])
    instance = Instance(values=values, targets=np.ones(2))
    m1 = alpha / (eps * s)
    bids = BidProfile(np.vstack([m1 * values[0], 1.0 * values[1]]))
    predicted = (1.0 + 1.0 / s) / (1.0 + eps)
    return LowerBoundInstance(
        instance=instance, bids=bids, mechanism=MechanismSpec.rtruth(alpha),
        gamma=0.0, predicted_ratio=predicted,
        params={"alpha": alpha, "eps": eps, "s": s})


def make_deterministic_lb_instance(kind: str, b1: float = 1.0,
                                   b2: float = 1e3, eps: float = 1e-3,
                                   gamma: float = 1e-2) -> LowerBoundInstance:
    """Two queries where a deterministic auction wastes half the welfare.

    price(x, y) is the winner's payment when bidding x against y (own bid
    for fpa, opponent's bid for spa).  Advertiser 1 wins both queries: one
    real query and one whose value is almost entirely the opponent's.  Its
    ROS constraint binds up to a slack of eps * price(b1, 0), so it cannot
    be outbid, while advertiser 2 would have to overpay by eps to take the
    big query back.  The realized ratio approaches 2 as b2 grows.
    """
    if kind not in (FPA, SPA):
        raise InvalidInstanceError(f"deterministic lower bound needs fpa or spa, not {kind}")
    if not 0.0 < b1 < b2:
        raise InvalidInstanceError(f"need 0 < b1 < b2, got {b1}, {b2}")
    if not 0.0 < eps < gamma:
        raise InvalidInstanceError(f"need 0 < eps < gamma, got {eps}, {gamma}")
    price = (lambda x, y: x) if kind == FPA else (lambda x, y: y)
    p22 = price(b2, b2)
    p10 = price(b1, 0.0)
    values = np.array([[p22 + p10, eps * p10], [0.0, p22 - eps]])
    instance = Instance(values=values, targets=np.ones(2))
    bids = BidProfile(np.array([[b1, b2], [0.0, 0.0]]))
    predicted = (2.0 * p22 + p10 - eps) / (p22 + p10 * (1.0 + eps))
    spec = MechanismSpec.fpa() if kind == FPA else MechanismSpec.spa()
    return LowerBoundInstance(
        instance=instance, bids=bids, mechanism=spec, gamma=gamma,
        predicted_ratio=predicted,
        params={"kind": kind, "b1": b1, "b2": b2, "eps": eps})


def verify_lower_bound(lb: LowerBoundInstance, *, rel_tol: float = 1e-6,
                       gamma: float | None = None) -> LowerBoundCheck:
    """Replay a lower-bound instance through the mechanism.

    Checks ROS feasibility of the stated bids, compares the measured
    welfare ratio against the prediction, and runs the gamma-equilibrium
    deviation scan at the declared (or overridden) gamma.
    """
    inst = lb.instance
    bids = lb.bids.bids
    wp, pay = profile_outcomes(bids, lb.mechanism)
    values = (wp * inst.values).sum(axis=1)
    spends = pay.sum(axis=1)
    scale = max(1.0, float((inst.targets[:, None] * inst.values).max()))
    feasible = bool(np.all(inst.targets * values - spends >= -1e-9 * scale))
    lw_eq = liquid_welfare(inst, wp)
    lw_opt, _ = optimal_welfare(inst)
    measured = lw_opt / lw_eq if lw_eq > 0 else math.inf
    rel_err = abs(measured - lb.predicted_ratio) / lb.predicted_ratio
    check = check_gamma_equilibrium(inst, bids, lb.mechanism,
                                    lb.gamma if gamma is None else gamma)
    ok = feasible and rel_err <= rel_tol and check.is_equilibrium
    return LowerBoundCheck(ok=ok, feasible=feasible, lw_eq=lw_eq, lw_opt=lw_opt,
                           measured_ratio=measured,
                           predicted_ratio=lb.predicted_ratio,
                           ratio_rel_err=rel_err, gamma_check=check)
