"""Value-maximizing best responses under a return-on-spend constraint.

Each solver fixes the opponents' bids and maximizes the advertiser's total
expected value subject to spend <= T * value:

* uniform_best_response: spa / rtruth.  Bids multiplier * values; since the
  allocation only improves with the multiplier and the ROS slack of c * v
  is non-increasing for c >= 1, the largest feasible multiplier is found by
  bisection.
* rfpa_best_response: dual decomposition of the one-constraint concave
  program; an outer bisection on the constraint multiplier, an inner
  per-query 1-d solve.
* rfpa_grid_best_response: multistage exhaustive grid over joint log-bids,
  used as an independent cross-check of the dual solver.
* fpa_best_response: overbid-by-a-tick knapsack over the set of queries to
  win; exact subset DP for small instances, greedy otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Instance, as_bid_matrix
from .errors import InvalidInstanceError, NumericError, OraclePreconditionError
from .mechanisms import (FPA, RFPA, RTRUTH, SPA, MechanismSpec, profile_outcomes,
                         query_outcome)

#: default bid increment for winning outright in first-price rules,
#: relative to the instance's largest value
TICK_FRACTION = 1e-6


@dataclass(frozen=True)
class BestResponse:
    """Bids for one advertiser plus the value/spend they achieve."""

    bids: np.ndarray
    value: float
    spend: float
    method: str
    info: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.value - self.spend


@dataclass(frozen=True)
class UndominatedReport:
    """Outcome of the single-query deviation scan."""

    ok: bool
    violations: list
    grid_points: int


def _default_tick(instance: Instance) -> float:
    vmax = float(instance.values.max())
    return TICK_FRACTION * vmax if vmax > 0 else TICK_FRACTION


def _opponent_max(bid_matrix: np.ndarray, advertiser: int) -> np.ndarray:
    others = np.delete(bid_matrix, advertiser, axis=0)
    return others.max(axis=0)


def _opponent_max_holder(bid_matrix: np.ndarray, advertiser: int) -> np.ndarray:
    """Index of the lowest-index opponent attaining the max bid per query."""
    others = np.delete(bid_matrix, advertiser, axis=0)
    holder = np.argmax(others, axis=0)
    return np.where(holder >= advertiser, holder + 1, holder)


def evaluate_bids(instance: Instance, advertiser: int, bid_matrix, my_bids,
                  spec: MechanismSpec) -> tuple[float, float]:
    """Value and spend for one advertiser after replacing its bid row."""
    bids = as_bid_matrix(bid_matrix).copy()
    bids[advertiser] = np.asarray(my_bids, dtype=float)
    wp, pay = profile_outcomes(bids, spec)
    value = float((wp[advertiser] * instance.values[advertiser]).sum())
    return value, float(pay[advertiser].sum())


# ---------------------------------------------------------------------------
# uniform multiplier best response (spa, rtruth)
# ---------------------------------------------------------------------------

def _spa_eval(c: float, v: np.ndarray, price: np.ndarray, holder: np.ndarray,
              advertiser: int) -> tuple[float, float]:
    b = c * v
    win = (b > price) | ((b == price) & (advertiser < holder))
    return float(v[win].sum()), float(price[win].sum())


def _rtruth_eval(c: float, v: np.ndarray, bo: np.ndarray, alpha: float
                 ) -> tuple[float, float]:
    la = math.log(alpha)
    scale = (alpha - 1.0 / alpha) / (2.0 * la)
    b = c * v
    value = 0.0
    spend = 0.0
    mine = b > 0
    free = mine & (bo <= 0)
    value += float(v[free].sum())
    both = mine & (bo > 0)
    if np.any(both):
        d = np.log(b[both]) - np.log(bo[both])
        pi = np.clip(0.5 * (1.0 + d / la), 0.0, 1.0)
        beta = b[both] / bo[both]
        pay = np.where(d >= la, bo[both] * scale,
                       np.where(d <= -la, 0.0,
                                bo[both] * (beta - 1.0 / alpha) / (2.0 * la)))
        value += float((pi * v[both]).sum())
        spend += float(pay.sum())
    return value, spend


def uniform_best_response(instance: Instance, advertiser: int, bid_matrix,
                          spec: MechanismSpec, *, ros_tol: float = 1e-12,
                          iters: int = 100) -> BestResponse:
    """Largest ROS-feasible uniform multiplier c >= 1 against fixed opponents.

    Bidding one's values (c = 1) is always feasible in a truthful auction,
    and the slack of c * v is non-increasing for c >= 1, so bisection on
    [1, c_sat] finds the boundary; c_sat is the multiplier at which every
    query is already won outright and pushing further changes nothing.
    """
    if spec.kind not in (SPA, RTRUTH):
        raise InvalidInstanceError(f"uniform response applies to spa/rtruth, not {spec.kind}")
    bids = as_bid_matrix(bid_matrix)
    v = instance.targets[advertiser] * instance.values[advertiser]
    if spec.kind == RTRUTH and bids.shape[0] != 2:
        raise InvalidInstanceError("rtruth is defined for exactly two advertisers")

    if spec.kind == SPA:
        price = _opponent_max(bids, advertiser)
        holder = _opponent_max_holder(bids, advertiser)
        evaluate = lambda c: _spa_eval(c, v, price, holder, advertiser)
        with np.errstate(divide="ignore"):
            theta = np.where(v > 0, price / np.where(v > 0, v, 1.0), 0.0)
    else:
        bo = bids[1 - advertiser]
        evaluate = lambda c: _rtruth_eval(c, v, bo, spec.alpha)
        with np.errstate(divide="ignore"):
            theta = np.where(v > 0, spec.alpha * bo / np.where(v > 0, v, 1.0), 0.0)

    scale = max(1.0, float(v.max(initial=0.0)))
    tol = ros_tol * scale

    def feasible(c):
        value, spend = evaluate(c)
        return value - spend >= -tol, value, spend

    c_sat = max(1.0, float(theta.max(initial=0.0)) * (1.0 + 1e-9))
    ok_sat, val_sat, sp_sat = feasible(c_sat)
    if ok_sat:
        return BestResponse(c_sat * v, val_sat, sp_sat, "uniform-multiplier",
                            {"multiplier": c_sat})
    ok1, val1, sp1 = feasible(1.0)
    if not ok1:
        # should not happen for truthful rules; scan a coarse grid as a fallback
        best = (0.0, 0.0, None)
        for c in np.geomspace(1.0, c_sat, 200):
            ok, val, sp = feasible(c)
            if ok and val > best[0]:
                best = (val, sp, c)
        if best[2] is None:
            zero = np.zeros_like(v)
            return BestResponse(zero, 0.0, 0.0, "uniform-multiplier", {"multiplier": 0.0})
        val, sp, c = best
        return BestResponse(c * v, val, sp, "uniform-multiplier", {"multiplier": c})
    lo, val_lo, sp_lo = 1.0, val1, sp1
    hi = c_sat
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok, val, sp = feasible(mid)
        if ok:
            lo, val_lo, sp_lo = mid, val, sp
        else:
            hi = mid
    return BestResponse(lo * v, val_lo, sp_lo, "uniform-multiplier", {"multiplier": lo})


# ---------------------------------------------------------------------------
# rfpa best response: dual decomposition
# ---------------------------------------------------------------------------

def _rfpa_inner(lam: float, v: np.ndarray, bo: np.ndarray, alpha: float) -> np.ndarray:
    """Per-query maximizer of (1+lam) v pi(t) - lam b(t) pi(t) over
    t = log_alpha(b / bo) in [-1, 1].

    The objective is strictly concave in t for lam > 0 and its stationarity
    condition b (1 + ln(alpha) + ln(b/bo)) = (1 + 1/lam) v rearranges, with
    w = 1 + (1 + t) ln(alpha), into w e^w = K alpha e for
    K = (1 + lam) v / (lam bo), i.e. a Lambert W solve; clipping the
    unconstrained stationary point into the box is exact by concavity."""
    la = math.log(alpha)
    if lam == 0.0:
        return np.where(v > 0, 1.0, -1.0)
    from scipy.special import lambertw
    K = (1.0 + lam) * v / (lam * bo)
    w = lambertw(K * alpha * math.e).real
    t = (w - 1.0) / la - 1.0
    return np.clip(t, -1.0, 1.0)


def rfpa_best_response(instance: Instance, advertiser: int, bid_matrix,
                       alpha: float, *, lam_max: float = 1e6,
                       slack_tol: float = 1e-8, bracket_tol: float = 1e-12,
                       tick: float | None = None) -> BestResponse:
    """ROS-constrained best response in the randomized first-price auction.

    Without loss the bid on query j stays in [bo_j/alpha, alpha*bo_j]: below
    the window the win probability is 0 anyway and above it 1 at higher cost.
    Within the window the problem is a one-constraint concave program solved
    by bisection on the dual multiplier; the returned bids are the feasible
    side of the final bracket.

    Queries where the opponent bids 0 are taken outright at a tick bid, and
    queries with zero value sit at the bottom of the window (win prob 0).
    """
    bids = as_bid_matrix(bid_matrix)
    if bids.shape[0] != 2:
        raise InvalidInstanceError("rfpa is defined for exactly two advertisers")
    if not alpha > 1.0:
        raise InvalidInstanceError(f"rfpa best response needs alpha > 1, got {alpha}")
    if tick is None:
        tick = _default_tick(instance)
    v_all = instance.targets[advertiser] * instance.values[advertiser]
    bo_all = bids[1 - advertiser]

    free = (bo_all <= 0) & (v_all > tick)
    contested = (bo_all > 0) & (v_all > 0)
    base_value = float(v_all[free].sum())
    base_spend = tick * int(free.sum())

    out = np.zeros_like(v_all)
    out[free] = tick
    # zero-value queries against a positive opponent sit at the window bottom
    idle = (bo_all > 0) & ~contested
    out[idle] = bo_all[idle] / alpha

    v = v_all[contested]
    bo = bo_all[contested]

    def bids_at(lam):
        t = _rfpa_inner(lam, v, bo, alpha)
        b = bo * alpha ** t
        pi = np.clip(0.5 * (1.0 + t), 0.0, 1.0)
        return b, pi

    def slack_at(lam):
        b, pi = bids_at(lam)
        return base_value - base_spend + float((pi * (v - b)).sum()), b, pi

    if v.size == 0:
        b_fin = np.zeros(0)
        pi_fin = np.zeros(0)
        lam_fin = 0.0
    else:
        s0, b0, pi0 = slack_at(0.0)
        if s0 >= 0:
            b_fin, pi_fin, lam_fin = b0, pi0, 0.0
        else:
            lo, hi = 0.0, lam_max
            s_hi, b_fin, pi_fin = slack_at(hi)
            if s_hi < 0:
                # clip interior bids to the value so each query pays for itself
                b_fin = np.minimum(b_fin, np.maximum(v, bo / alpha))
                pi_fin = np.clip(
                    0.5 * (1.0 + (np.log(b_fin) - np.log(bo)) / math.log(alpha)), 0.0, 1.0)
                s_hi = base_value - base_spend + float((pi_fin * (v - b_fin)).sum())
                # the clip makes every per-query term >= 0 up to rounding in
                # the recomputed win probability, so only float dust can land
                # here negative
                scale = base_value + float((pi_fin * v).sum())
                if s_hi < -1e-9 * max(1.0, scale):
                    raise NumericError("rfpa best response: no feasible dual endpoint")
            lam_fin = hi
            while hi - lo > bracket_tol * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                sm, bm, pim = slack_at(mid)
                if sm >= 0:
                    hi, b_fin, pi_fin, lam_fin = mid, bm, pim, mid
                    if sm <= slack_tol:
                        break
                else:
                    lo = mid

    out[contested] = b_fin
    value = base_value + float((pi_fin * v).sum())
    spend = base_spend + float((pi_fin * b_fin).sum())
    return BestResponse(out, value, spend, "dual-decomposition",
                        {"lambda": lam_fin, "tick": tick})


def rfpa_grid_best_response(instance: Instance, advertiser: int, bid_matrix,
                            alpha: float, *, log_step: float = 1e-4,
                            stage_points: int = 81,
                            tick: float | None = None) -> BestResponse:
    """Exhaustive joint grid over per-query log-bids, refined in stages.

    Independent cross-check for rfpa_best_response on small instances.  Each
    stage lays a full grid over the current box in t = log_alpha(b/bo)
    coordinates and then zooms into the bounding box of the best feasible
    grid points, padded by one step, until the step is below log_step
    (measured in log-bid units).  Tracking a set of near-optimal points
    instead of the single incumbent keeps elongated slivers of the feasible
    region inside the window.  Limited to three contested queries.
    """
    bids = as_bid_matrix(bid_matrix)
    if bids.shape[0] != 2:
        raise InvalidInstanceError("rfpa is defined for exactly two advertisers")
    if tick is None:
        tick = _default_tick(instance)
    v_all = instance.targets[advertiser] * instance.values[advertiser]
    bo_all = bids[1 - advertiser]
    free = (bo_all <= 0) & (v_all > tick)
    contested = (bo_all > 0) & (v_all > 0)
    if int(contested.sum()) > 3:
        raise InvalidInstanceError("grid oracle supports at most three contested queries")
    base_value = float(v_all[free].sum())
    base_spend = tick * int(free.sum())
    out = np.zeros_like(v_all)
    out[free] = tick
    idle = (bo_all > 0) & ~contested
    out[idle] = bo_all[idle] / alpha

    v = v_all[contested]
    bo = bo_all[contested]
    m = int(v.size)
    la = math.log(alpha)
    budget = base_value - base_spend
    if m == 0:
        return BestResponse(out, base_value, base_spend, "grid-oracle", {})

    target = log_step / la
    los = np.full(m, -1.0)
    his = np.full(m, 1.0)
    best_t = np.full(m, -1.0)
    best_val = budget if budget >= 0 else -np.inf
    keep = 48
    for _ in range(100):
        axes = []
        for j in range(m):
            ax = np.linspace(los[j], his[j], stage_points)
            axes.append(np.unique(np.clip(np.append(ax, best_t[j]), -1.0, 1.0)))
        grids = np.meshgrid(*axes, indexing="ij")
        T = np.stack([g.ravel() for g in grids], axis=-1)
        PI = 0.5 * (1.0 + T)
        B = bo * alpha ** T
        val = budget + PI @ v
        net = budget + (PI * (v[None, :] - B)).sum(axis=1)
        feasible = net >= -1e-12
        step = (his - los) / (stage_points - 1)
        if feasible.any():
            vals = np.where(feasible, val, -np.inf)
            i = int(np.argmax(vals))
            if vals[i] > best_val:
                best_val = float(vals[i])
                best_t = T[i].copy()
            top = np.argsort(vals)[-min(keep, int(feasible.sum())):]
            pts = np.vstack([T[top], best_t])
            los = np.maximum(-1.0, pts.min(axis=0) - step)
            his = np.minimum(1.0, pts.max(axis=0) + step)
        else:
            los = np.maximum(-1.0, best_t - 2.0 * step)
            his = np.minimum(1.0, best_t + 2.0 * step)
        if np.all(step <= target):
            break

    b = bo * alpha ** best_t
    pi = 0.5 * (1.0 + best_t)
    out[contested] = b
    value = base_value + float((pi * v).sum())
    spend = base_spend + float((pi * b).sum())
    return BestResponse(out, value, spend, "grid-oracle", {"log_step": log_step})


# ---------------------------------------------------------------------------
# fpa best response: overbid-by-a-tick knapsack
# ---------------------------------------------------------------------------

def _knapsack_exact(values: np.ndarray, weights: np.ndarray, unit: float,
                    tol: float) -> np.ndarray:
    """Pick the subset maximizing total value with total weight <= tol.
    Subset DP over the value discretized in steps of `unit`."""
    m = values.size
    units = np.maximum(1, np.rint(values / unit).astype(int))
    total = int(units.sum())
    INF = np.inf
    table = np.full((m + 1, total + 1), INF)
    table[0, 0] = 0.0
    for j in range(m):
        row = table[j].copy()
        u = units[j]
        shifted = row[:total + 1 - u] + weights[j]
        row[u:] = np.minimum(row[u:], shifted)
        table[j + 1] = row
    feasible = np.where(table[m] <= tol)[0]
    if feasible.size == 0:
        return np.zeros(m, dtype=bool)
    u = int(feasible.max())
    take = np.zeros(m, dtype=bool)
    for j in range(m, 0, -1):
        if table[j, u] == table[j - 1, u]:
            continue
        take[j - 1] = True
        u -= units[j - 1]
    return take


def _knapsack_greedy(values: np.ndarray, weights: np.ndarray, tol: float) -> np.ndarray:
    take = weights <= 0
    budget = -float(weights[take].sum())
    deficit = np.where(~take & (values > 0))[0]
    order = deficit[np.argsort(weights[deficit] / values[deficit])]
    for j in order:
        if weights[j] <= budget + tol:
            take[j] = True
            budget -= weights[j]
    return take


def fpa_best_response(instance: Instance, advertiser: int, bid_matrix,
                      *, tick: float | None = None, max_exact: int = 20,
                      ros_tol: float = 1e-9) -> BestResponse:
    """Choose the set of queries to win at one tick above the opponents.

    Winning query j costs p_j = (max opponent bid on j) + tick, so the task
    is a knapsack: maximize the total value of the winning set subject to
    sum(p_j - T v_j) <= 0.  Exact subset DP (values discretized at 1e-4 of
    the advertiser's max value) up to `max_exact` queries, greedy by
    ascending deficit per value beyond that.
    """
    bids = as_bid_matrix(bid_matrix)
    if tick is None:
        tick = _default_tick(instance)
    v = instance.values[advertiser]
    T = instance.targets[advertiser]
    price = _opponent_max(bids, advertiser) + tick
    weights = price - T * v
    active = v > 0
    scale = max(1.0, float((T * v).max(initial=0.0)), float(price.max(initial=0.0)))
    tol = ros_tol * scale

    idx = np.where(active)[0]
    if idx.size == 0:
        zero = np.zeros_like(v)
        return BestResponse(zero, 0.0, 0.0, "knapsack-dp", {"tick": tick})
    vals = v[idx]
    ws = weights[idx]
    if idx.size <= max_exact:
        unit = 1e-4 * float(vals.max())
        take = _knapsack_exact(vals, ws, unit, tol)
        method = "knapsack-dp"
    else:
        take = _knapsack_greedy(vals, ws, tol)
        method = "knapsack-greedy"
    chosen = idx[take]
    out = np.zeros_like(v)
    out[chosen] = price[chosen]
    value = float(v[chosen].sum())
    spend = float(price[chosen].sum())
    return BestResponse(out, value, spend, method, {"tick": tick})


# ---------------------------------------------------------------------------
# dispatch and deviation scans
# ---------------------------------------------------------------------------

def best_response(instance: Instance, advertiser: int, bid_matrix,
                  spec: MechanismSpec, **kwargs) -> BestResponse:
    """Route to the solver appropriate for the mechanism."""
    if spec.kind == RFPA:
        if spec.alpha == 1.0:
            return fpa_best_response(instance, advertiser, bid_matrix, **kwargs)
        return rfpa_best_response(instance, advertiser, bid_matrix, spec.alpha, **kwargs)
    if spec.kind == FPA:
        return fpa_best_response(instance, advertiser, bid_matrix, **kwargs)
    return uniform_best_response(instance, advertiser, bid_matrix, spec, **kwargs)


def _deviation_grid(bo: float, value: float, spec: MechanismSpec, points: int,
                    tick: float) -> np.ndarray:
    """Candidate single-query bids around the opponent's bid."""
    if spec.kind in (RFPA, RTRUTH):
        alpha = spec.alpha
        lo = 0.5 * bo / alpha
        hi = 2.0 * alpha * bo
    else:
        lo, hi = 0.5 * bo, 2.0 * max(bo, value)
    if hi <= 0:
        hi = max(value, tick, 1.0)
    lo = max(lo, 1e-12 * hi)
    grid = np.geomspace(lo, hi, points)
    extras = [0.0, bo, value, bo + tick]
    if bo > 0:
        extras += [bo * (1 - 1e-9), bo * (1 + 1e-9)]
    return np.unique(np.concatenate([grid, np.array(extras)]))


def check_undominated(instance: Instance, bid_matrix, spec: MechanismSpec, *,
                      points: int = 400, value_tol: float = 1e-5,
                      ros_tol: float = 1e-9) -> UndominatedReport:
    """Scan single-query deviations for every advertiser.

    A violation is a bid change on one query that raises the advertiser's
    total value by more than value_tol while keeping its overall ROS slack
    >= -ros_tol (both scaled by the instance's magnitude).  Bids must be
    ROS-feasible to start with.

    The scan certifies undominatedness only up to its grid resolution.
    """
    bids = as_bid_matrix(bid_matrix)
    n, m = bids.shape
    tick = _default_tick(instance)
    wp, pay = profile_outcomes(bids, spec)
    value = (wp * instance.values).sum(axis=1)
    spend = pay.sum(axis=1)
    scale = max(1.0, float((instance.targets[:, None] * instance.values).max()))
    slack0 = instance.targets * value - spend
    if np.any(slack0 < -ros_tol * scale):
        raise OraclePreconditionError("bids must be ROS-feasible for every advertiser")

    violations = []
    for i in range(n):
        Ti = instance.targets[i]
        for j in range(m):
            bo = float(np.delete(bids[:, j], i).max())
            cands = _deviation_grid(bo, Ti * instance.values[i, j], spec, points, tick)
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
                new_slack = slack0[i] + Ti * dv - dp
                if dv > value_tol * scale and new_slack >= -ros_tol * scale:
                    violations.append((i, j, float(b), float(dv)))
                    break
            col[i] = bids[i, j]
    return UndominatedReport(ok=not violations, violations=violations, grid_points=points)


@dataclass(frozen=True)
class BidBoundReport:
    """Necessary bid lower bounds at an undominated rfpa profile."""

    ok: bool
    sure_win_flags: list
    shared_flags: list


def check_equilibrium_bid_bounds(instance: Instance, bid_matrix, alpha: float,
                                 *, tol: float = 1e-6, pi_tol: float = 1e-9
                                 ) -> BidBoundReport:
    """Verify two necessary conditions on a two-advertiser rfpa profile.

    * A probability-1 winner must bid at least alpha times the loser's
      value, else the loser could profitably contest the query.
    * On a shared query (win probability strictly inside (0, 1)) each
      advertiser's bid is at least v / (1 + ln alpha + ln beta) with beta
      its own-to-opponent bid ratio: below that threshold, raising the bid
      gains more value than it costs.

    Win probabilities within pi_tol of 0 or 1 are treated as the boundary
    case; the shared-query threshold is meaningless when there is nothing
    left to win.
    """
    bids = as_bid_matrix(bid_matrix)
    if bids.shape[0] != 2:
        raise InvalidInstanceError("bid-bound check applies to two advertisers")
    la = math.log(alpha)
    sure, shared = [], []
    for j in range(bids.shape[1]):
        b = bids[:, j]
        if b.max() <= 0:
            continue
        out = query_outcome(MechanismSpec.rfpa(alpha), b)
        for i in (0, 1):
            o = 1 - i
            pi = out.win_prob[i]
            if pi >= 1.0 - pi_tol:
                need = alpha * instance.targets[o] * instance.values[o, j]
                if b[i] < need - tol:
                    sure.append((i, j, float(b[i]), float(need)))
            elif pi > pi_tol:
                beta = b[i] / b[o]
                need = instance.targets[i] * instance.values[i, j] / (1.0 + la + math.log(beta))
                if b[i] < need - tol:
                    shared.append((i, j, float(b[i]), float(need)))
    return BidBoundReport(ok=not (sure or shared), sure_win_flags=sure, shared_flags=shared)
