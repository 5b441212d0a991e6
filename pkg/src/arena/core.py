"""Instances, liquid welfare, and the plain-text instance format.

An instance is a matrix of advertiser-by-query values plus one target
return-on-spend multiplier per advertiser.  Advertiser i may spend at most
T_i times the value it obtains, so multiplying advertiser i's values by T_i
and setting T_i = 1 leaves the constraint and the liquid welfare unchanged.
All equilibrium machinery assumes normalized instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInstanceError

# absolute comparison tolerance for welfare bookkeeping
TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Instance:
    """Advertisers x queries valuations and per-advertiser ROS targets.

    values[i, j] is advertiser i's value for query j (non-negative, finite).
    targets[i] is advertiser i's target return-on-spend multiplier (> 0).
    Arrays are marked read-only after construction.
    """

    values: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        targets = np.atleast_1d(np.asarray(self.targets, dtype=float))
        if values.ndim != 2 or values.size == 0:
            raise InvalidInstanceError(f"values must be a 2-d matrix, got shape {values.shape}")
        if targets.shape != (values.shape[0],):
            raise InvalidInstanceError(
                f"need one target per advertiser: {targets.shape} vs {values.shape[0]} advertisers")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidInstanceError("values must be finite and non-negative")
        if not np.all(np.isfinite(targets)) or np.any(targets <= 0):
            raise InvalidInstanceError("targets must be finite and positive")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "targets", _frozen(targets))

    @property
    def num_advertisers(self) -> int:
        return self.values.shape[0]

    @property
    def num_queries(self) -> int:
        return self.values.shape[1]

    @property
    def is_normalized(self) -> bool:
        return bool(np.all(self.targets == 1.0))


@dataclass(frozen=True)
class BidProfile:
    """One bid per advertiser per query, same shape as the instance values."""

    bids: np.ndarray

    def __post_init__(self):
        bids = np.atleast_2d(np.asarray(self.bids, dtype=float))
        if not np.all(np.isfinite(bids)) or np.any(bids < 0):
            raise InvalidInstanceError("bids must be finite and non-negative")
        object.__setattr__(self, "bids", _frozen(bids))


def as_bid_matrix(bids) -> np.ndarray:
    """Accept a BidProfile or a raw array, return the (n, m) float matrix."""
    if isinstance(bids, BidProfile):
        return bids.bids
    return np.atleast_2d(np.asarray(bids, dtype=float))


@dataclass(frozen=True)
class QueryOutcome:
    """Result of running one query's auction: win probabilities and the
    expected payment charged to each advertiser."""

    win_prob: np.ndarray
    expected_payment: np.ndarray

    def __post_init__(self):
        wp = _frozen(np.atleast_1d(self.win_prob))
        pay = _frozen(np.atleast_1d(self.expected_payment))
        object.__setattr__(self, "win_prob", wp)
        object.__setattr__(self, "expected_payment", pay)


@dataclass(frozen=True)
class WelfareSummary:
    """Liquid welfare of an allocation, the offline optimum, and the
    per-advertiser value/spend bookkeeping behind them."""

    lw_alloc: float
    lw_opt: float
    value: np.ndarray = field(repr=False)
    spend: np.ndarray = field(repr=False)


def normalize(instance: Instance) -> Instance:
    """Fold each target into the value row: v'[i] = T_i * v[i], T'_i = 1."""
    return Instance(instance.values * instance.targets[:, None],
                    np.ones(instance.num_advertisers))


def liquid_welfare(instance: Instance, alloc) -> float:
    """Sum over advertisers of T_i times the expected value obtained under
    the (n, m) allocation matrix alloc (entries in [0, 1], column sums <= 1)."""
    alloc = np.asarray(alloc, dtype=float)
    if alloc.shape != instance.values.shape:
        raise InvalidInstanceError(
            f"allocation shape {alloc.shape} != values shape {instance.values.shape}")
    if np.any(alloc < -TOL) or np.any(alloc.sum(axis=0) > 1 + 1e-9):
        raise InvalidInstanceError("allocation entries must lie in [0, 1] with column sums <= 1")
    return float(np.sum(instance.targets[:, None] * alloc * instance.values))


def optimal_welfare(instance: Instance) -> tuple[float, np.ndarray]:
    """Best liquid welfare over all allocations: give each query to the
    advertiser maximizing T_i * v[i, j], ties to the lowest index.

    Returns (value, one-hot allocation matrix).
    """
    weighted = instance.targets[:, None] * instance.values
    winners = np.argmax(weighted, axis=0)  # argmax takes the lowest index on ties
    alloc = np.zeros_like(instance.values)
    alloc[winners, np.arange(instance.num_queries)] = 1.0
    return float(weighted.max(axis=0).sum()), alloc


def welfare_summary(instance: Instance, win_prob, expected_payment) -> WelfareSummary:
    """Bundle the realized liquid welfare with the offline optimum."""
    wp = np.asarray(win_prob, dtype=float)
    pay = np.asarray(expected_payment, dtype=float)
    value = (wp * instance.values).sum(axis=1)
    spend = pay.sum(axis=1)
    lw = float(np.sum(instance.targets * value))
    lw_opt, _ = optimal_welfare(instance)
    return WelfareSummary(lw_alloc=lw, lw_opt=lw_opt, value=value, spend=spend)


def ros_slack(instance: Instance, value, spend) -> np.ndarray:
    """Per-advertiser slack T_i * value_i - spend_i; >= 0 means the
    return-on-spend constraint is satisfied."""
    value = np.atleast_1d(np.asarray(value, dtype=float))
    spend = np.atleast_1d(np.asarray(spend, dtype=float))
    return instance.targets * value - spend


# ---------------------------------------------------------------------------
# plain-text instance files
#
#   advertisers=<n> queries=<m>
#   target <i> <T_i>          (one line per advertiser, 1-based index)
#   <v_i1> <v_i2> ... <v_im>  (one row per advertiser)
#
# Floats print with 17 significant digits so a round trip is bit-exact.
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_instance(instance: Instance) -> str:
    n, m = instance.values.shape
    lines = [f"advertisers={n} queries={m}"]
    for i in range(n):
        lines.append(f"target {i + 1} {_fmt(instance.targets[i])}")
    for i in range(n):
        lines.append(" ".join(_fmt(v) for v in instance.values[i]))
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> Instance:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise InvalidInstanceError("empty instance text")
    head = lines[0].split()
    try:
        kv = dict(part.split("=") for part in head)
        n, m = int(kv["advertisers"]), int(kv["queries"])
    except (ValueError, KeyError) as exc:
        raise InvalidInstanceError(f"bad header line: {lines[0]!r}") from exc
    if len(lines) != 1 + 2 * n:
        raise InvalidInstanceError(f"expected {1 + 2 * n} lines, got {len(lines)}")
    targets = np.empty(n)
    for i in range(n):
        parts = lines[1 + i].split()
        if len(parts) != 3 or parts[0] != "target" or int(parts[1]) != i + 1:
            raise InvalidInstanceError(f"bad target line: {lines[1 + i]!r}")
        targets[i] = float(parts[2])
    values = np.empty((n, m))
    for i in range(n):
        row = [float(x) for x in lines[1 + n + i].split()]
        if len(row) != m:
            raise InvalidInstanceError(f"value row {i} has {len(row)} entries, expected {m}")
        values[i] = row
    return Instance(values, targets)


def save_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_instance(instance))


def load_instance(path) -> Instance:
    with open(path, "r", encoding="ascii") as fh:
        return loads_instance(fh.read())
