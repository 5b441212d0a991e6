"""Iterated best-response dynamics and equilibrium verification.

Advertisers take turns adopting a best response to the others' current
bids.  Adoption is lazy: an advertiser moves only when its current bids
violate its ROS constraint or when the best response strictly improves its
value.  Without the laziness, first-price rules admit no fixed point at
all (the loser of a query always re-bids one tick above the winner), and
truthful rules drift into knife-edge bids that win nothing but sit just
under the opponent.  With it, a profile where nobody can feasibly gain is
stable, which is exactly the equilibrium notion being measured.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .autobidder import best_response
from .core import Instance, as_bid_matrix, liquid_welfare, optimal_welfare
from .errors import InvalidInstanceError, OraclePreconditionError
from .mechanisms import (FPA, RFPA, RTRUTH, SPA, MechanismSpec,
                         profile_outcomes, query_outcome)


@dataclass(frozen=True)
class EquilibriumReport:
    """State reached by the dynamics plus welfare and stability measures."""

    bids: np.ndarray
    converged: bool
    rounds: int
    lw_eq: float
    lw_opt: float
    poa: float
    values: np.ndarray
    spends: np.ndarray
    gamma_achieved: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def slacks(self) -> np.ndarray:
        return self.values - self.spends


@dataclass(frozen=True)
class GammaEqCheck:
    """Result of testing whether a profile is a gamma-equilibrium."""

    gamma: float
    is_equilibrium: bool
    worst_ratio: float
    witness: dict | None


def _uses_tick(spec: MechanismSpec) -> bool:
    return spec.kind == FPA or (spec.kind == RFPA and spec.alpha == 1.0)


def _advertiser_state(instance: Instance, bids: np.ndarray, spec: MechanismSpec):
    wp, pay = profile_outcomes(bids, spec)
    values = (wp * instance.values).sum(axis=1)
    spends = pay.sum(axis=1)
    return wp, values, spends


def _initial_bids(instance: Instance, init) -> np.ndarray:
    if isinstance(init, str):
        if init == "values":
            return (instance.targets[:, None] * instance.values).copy()
        if init == "zeros":
            return np.zeros_like(instance.values)
        if init == "competitive":
            # every query priced at its highest value; the holder of that
            # value bids it, everyone else sits one notch below
            weighted = instance.targets[:, None] * instance.values
            top = weighted.max(axis=0)
            bids = np.broadcast_to(top * (1.0 - 1e-6), weighted.shape).copy()
            winner = np.argmax(weighted, axis=0)
            bids[winner, np.arange(weighted.shape[1])] = top
            return bids
        raise InvalidInstanceError(f"unknown init {init!r}")
    return as_bid_matrix(init).copy()


def gamma_achieved(instance: Instance, bid_matrix, spec: MechanismSpec, *,
                   value_tol: float = 1e-5, **br_kwargs) -> float:
    """Smallest gamma for which no advertiser's full best response beats
    (1 + gamma) times its current value.  0 means nobody can gain."""
    bids = as_bid_matrix(bid_matrix)
    _, values, _ = _advertiser_state(instance, bids, spec)
    scale = max(1.0, float((instance.targets[:, None] * instance.values).max()))
    worst = 0.0
    for i in range(bids.shape[0]):
        br = best_response(instance, i, bids, spec, **br_kwargs)
        if values[i] > value_tol * scale:
            worst = max(worst, br.value / values[i] - 1.0)
        elif br.value > value_tol * scale:
            return math.inf
    return worst


def run_dynamics(instance: Instance, spec: MechanismSpec, *,
                 init="values", max_rounds: int = 500, tol: float = 1e-6,
                 improve_tol: float = 1e-5, ros_tol: float = 1e-9,
                 tick: float | None = None, max_tick_halvings: int = 5
                 ) -> EquilibriumReport:
    """Round-robin lazy best-response dynamics.

    Converged means a full round passed in which no advertiser adopted: every
    advertiser was ROS-feasible and its best response improved its value by
    at most improve_tol (times the instance scale).  A sup-change criterion
    would stop too early here, since tiny bid moves on a cheap query can
    still carry value gains orders of magnitude larger.  The improve_tol
    default matches the tolerance at which deviations are measured, so a
    converged profile is a gamma-equilibrium for gamma of that order; a
    much smaller threshold invites livelock, with one advertiser forever
    re-adopting bids worth a sub-measurement sliver.  The run also stops
    after `max_rounds` rounds or on an unresolvable bid cycle (profiles
    compared at resolution `tol`).  For first-price rules a detected
    period-2 cycle halves the overbid tick up to `max_tick_halvings` times
    before giving up, since such cycles are usually two advertisers
    leapfrogging by one tick over a query.
    """
    if spec.kind in (RFPA, RTRUTH) and spec.alpha > 1.0 and instance.num_advertisers != 2:
        raise InvalidInstanceError(f"{spec.kind} dynamics need exactly two advertisers")
    bids = _initial_bids(instance, init)
    n = instance.num_advertisers
    scale = max(1.0, float((instance.targets[:, None] * instance.values).max()))
    if tick is None:
        vmax = float(instance.values.max())
        tick = 1e-6 * vmax if vmax > 0 else 1e-6

    converged = False
    cycle = False
    halvings = 0
    history: deque = deque(maxlen=4)
    rounds = 0
    sup_change = 0.0
    for rounds in range(1, max_rounds + 1):
        sup_change = 0.0
        adopted = False
        for i in range(n):
            _, values, spends = _advertiser_state(instance, bids, spec)
            feasible = instance.targets[i] * values[i] - spends[i] >= -ros_tol * scale
            kw = {"tick": tick} if _uses_tick(spec) or spec.kind == RFPA else {}
            br = best_response(instance, i, bids, spec, **kw)
            if not feasible or br.value > values[i] + improve_tol * scale:
                adopted = True
                sup_change = max(sup_change, float(np.abs(br.bids - bids[i]).max()))
                bids[i] = br.bids
        if not adopted:
            converged = True
            break
        key = np.round(bids / max(tol, 1e-12)).astype(np.int64).tobytes()
        if len(history) >= 2 and key == history[-2] and key != history[-1]:
            if _uses_tick(spec) and halvings < max_tick_halvings:
                halvings += 1
                tick *= 0.5
                history.clear()
                continue
            cycle = True
            break
        history.append(key)

    wp, values, spends = _advertiser_state(instance, bids, spec)
    lw_eq = liquid_welfare(instance, wp)
    lw_opt, _ = optimal_welfare(instance)
    poa = lw_opt / lw_eq if lw_eq > 0 else math.inf
    gamma = gamma_achieved(instance, bids, spec) if converged else math.inf
    return EquilibriumReport(
        bids=bids, converged=converged, rounds=rounds, lw_eq=lw_eq,
        lw_opt=lw_opt, poa=poa, values=values, spends=spends,
        gamma_achieved=gamma,
        diagnostics={"cycle": cycle, "tick": tick, "tick_halvings": halvings})


def poa_of_report(report: EquilibriumReport) -> float:
    """Liquid-welfare price of anarchy of the reached state."""
    return report.lw_opt / report.lw_eq if report.lw_eq > 0 else math.inf


def check_gamma_equilibrium(instance: Instance, bid_matrix,
                            spec: MechanismSpec, gamma: float, *,
                            value_tol: float = 1e-5, ros_tol: float = 1e-12,
                            points: int = 400, use_oracle: bool = True
                            ) -> GammaEqCheck:
    """Test that no advertiser has a feasible deviation worth more than
    (1 + gamma) times its current value.

    Deviations come from two sources: the full best-response oracle and a
    per-query grid around the opponents' bids.  A deviation counts only if
    its ROS slack stays above -ros_tol and its value exceeds the threshold
    by more than value_tol (both scaled by the instance's magnitude).  The
    current profile itself must be ROS-feasible.
    """
    from .autobidder import _default_tick, _deviation_grid

    bids = as_bid_matrix(bid_matrix)
    n, m = bids.shape
    wp, values, spends = _advertiser_state(instance, bids, spec)
    scale = max(1.0, float((instance.targets[:, None] * instance.values).max()))
    slack0 = instance.targets * values - spends
    if np.any(slack0 < -1e-9 * scale):
        raise OraclePreconditionError("profile is not ROS-feasible")
    _, pay = profile_outcomes(bids, spec)

    tick = _default_tick(instance)
    worst = 0.0
    witness = None
    ok = True
    for i in range(n):
        best_val = values[i]
        best_via = None
        if use_oracle:
            br = best_response(instance, i, bids, spec)
            if br.value > best_val:
                best_val, best_via = br.value, {"advertiser": i, "via": br.method}
        for j in range(m):
            bo = float(np.delete(bids[:, j], i).max())
            cands = _deviation_grid(bo, instance.targets[i] * instance.values[i, j],
                                    spec, points, tick)
            col = bids[:, j].copy()
            for b in cands:
                if b == bids[i, j]:
                    continue
                col[i] = b
                try:
                    out = query_outcome(spec, col)
                except Exception:
                    continue
                dv = (out.win_prob[i] - wp[i, j]) * instance.values[i, j]
                dp = out.expected_payment[i] - pay[i, j]
                if slack0[i] + instance.targets[i] * dv - dp < -ros_tol * scale:
                    continue
                if values[i] + dv > best_val:
                    best_val = values[i] + dv
                    best_via = {"advertiser": i, "via": "grid", "query": j, "bid": float(b)}
            col[i] = bids[i, j]
        threshold = (1.0 + gamma) * values[i] + value_tol * scale
        if best_val > threshold:
            ok = False
        if values[i] > value_tol * scale:
            worst = max(worst, best_val / values[i] - 1.0)
        elif best_val > value_tol * scale:
            worst = math.inf
        if best_via is not None and (witness is None or not ok):
            witness = dict(best_via, value=best_val, current=float(values[i]))
    return GammaEqCheck(gamma=gamma, is_equilibrium=ok, worst_ratio=worst,
                        witness=witness)
