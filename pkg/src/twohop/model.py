"""Analytic model of two-hop forwarding in a multi-class delay tolerant network.

A single source holds a packet that must reach a single sink within a
deadline.  Mobile relays are grouped into classes; contacts with the source
and with the sink follow independent Poisson processes whose rate depends on
the class mobility profile.  A forwarding policy gives, per class and per
(sub-)slot, the probability that the source hands a copy to a relay it meets.
Relays keep a copy for a local time-to-live and then discard it for good.

This module holds the domain types plus the closed-form evaluation of a
policy: delivery probability under the product-form per-slot approximation,
and expected energy (transmissions plus per-technology beaconing) that is
charged against a global budget.

Everything here is a pure function of immutable values (scenarios and
policies never mutate after construction), so concurrent use needs no
locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BUDGET_RTOL",
    "NodeClass",
    "Policy",
    "PolicyEvaluation",
    "Scenario",
    "ScenarioError",
    "Technology",
    "ThresholdPolicy",
    "budget_tolerance",
    "class_log_miss",
    "class_log_miss_table",
    "contact_rate",
    "delivery_probability",
    "energy_spent",
    "evaluate",
    "expand_threshold",
    "expected_holding",
    "expected_received",
    "extract_threshold",
    "holding_laplace",
    "is_costless",
    "q_no_receive",
    "threshold_energy",
    "threshold_objective",
]

# Relative slack applied to the budget when deciding feasibility; saturating
# thresholds are produced by root finding and only match the budget to solver
# tolerance.
BUDGET_RTOL = 1e-9

# Row chunk used when materialising threshold-by-slot matrices.
_CHUNK_CELLS = 4_000_000


def budget_tolerance(budget: float) -> float:
    """Absolute feasibility slack for a given budget."""
    return BUDGET_RTOL * max(1.0, budget)


class ScenarioError(ValueError):
    """Raised when a scenario or one of its components violates an invariant."""


@dataclass(frozen=True)
class Technology:
    """A radio technology shared by one or more node classes.

    ``beacon_cost`` is the energy charged per (whole) slot in which any class
    using this technology may transmit; neighbour discovery has to run during
    the whole slot regardless of how many classes share the radio.
    """

    ident: str
    beacon_cost: float

    def __post_init__(self):
        if not self.ident:
            raise ScenarioError("technology ident must be non-empty")
        if not (self.beacon_cost >= 0.0):
            raise ScenarioError(f"technology {self.ident!r}: beacon_cost must be >= 0")


@dataclass(frozen=True)
class NodeClass:
    """One category of mobile relays.

    ``ttl_slots`` counts sub-slots of the policy grid (a relay that receives a
    copy in sub-slot k still holds it during sub-slots k .. k+ttl_slots and
    then discards it permanently).  Scenario files carry the TTL in whole
    slots; the CLI converts on ingestion.
    """

    population: int
    ttl_slots: int
    speed: float       # m/s
    range_m: float     # communication range, m
    tx_cost: float     # energy per forwarded copy
    technology: str    # Technology.ident

    def __post_init__(self):
        if not (isinstance(self.population, int) and self.population >= 1):
            raise ScenarioError("population must be an integer >= 1")
        if not (isinstance(self.ttl_slots, int) and self.ttl_slots >= 1):
            raise ScenarioError("ttl_slots must be an integer >= 1")
        if not (self.speed > 0.0):
            raise ScenarioError("speed must be > 0")
        if not (self.range_m > 0.0):
            raise ScenarioError("range_m must be > 0")
        if not (self.tx_cost >= 0.0):
            raise ScenarioError("tx_cost must be >= 0")


@dataclass(frozen=True)
class Scenario:
    """A full problem instance.

    The horizon is split into ``slots = floor(deadline / slot_len)`` whole
    slots; with ``resolution`` m each slot is further split into m sub-slots,
    so policies live on a grid of ``slots * resolution`` sub-slots of length
    ``slot_len / resolution`` seconds.  All per-slot formulas below operate on
    that sub-slot grid.
    """

    classes: tuple[NodeClass, ...]
    technologies: tuple[Technology, ...]
    deadline: float       # seconds
    slot_len: float       # seconds
    arena_radius: float   # m
    budget: float         # energy units
    resolution: int = 1
    speed_constant: float = 1.3693

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "technologies", tuple(self.technologies))
        if not self.classes:
            raise ScenarioError("at least one class required")
        if not (self.deadline > 0.0):
            raise ScenarioError("deadline must be > 0")
        if not (self.slot_len > 0.0):
            raise ScenarioError("slot_len must be > 0")
        if math.floor(self.deadline / self.slot_len) < 1:
            raise ScenarioError("deadline shorter than one slot")
        if not (self.arena_radius > 0.0):
            raise ScenarioError("arena_radius must be > 0")
        if not (self.budget >= 0.0):
            raise ScenarioError("budget must be >= 0")
        if not (isinstance(self.resolution, int) and self.resolution >= 1):
            raise ScenarioError("resolution must be an integer >= 1")
        if not (self.speed_constant > 0.0):
            raise ScenarioError("speed_constant must be > 0")
        idents = [t.ident for t in self.technologies]
        if len(set(idents)) != len(idents):
            raise ScenarioError("technology idents must be unique")
        known = set(idents)
        for i, cls in enumerate(self.classes):
            if cls.technology not in known:
                raise ScenarioError(f"classes[{i}]: unknown technology {cls.technology!r}")

    @cached_property
    def slots(self) -> int:
        """Number of whole slots K."""
        return math.floor(self.deadline / self.slot_len)

    @cached_property
    def subslots(self) -> int:
        """Length of the policy grid."""
        return self.slots * self.resolution

    @cached_property
    def eff_slot(self) -> float:
        """Sub-slot duration in seconds."""
        return self.slot_len / self.resolution

    @property
    def max_threshold(self) -> int:
        """Largest admissible threshold (the final sub-slot stays silent)."""
        return self.subslots - 1

    @cached_property
    def rates(self) -> tuple[float, ...]:
        """Per-class contact rate at source and sink, 1/s."""
        return tuple(contact_rate(c, self) for c in self.classes)

    @cached_property
    def tech_by_id(self) -> dict[str, Technology]:
        return {t.ident: t for t in self.technologies}

    @cached_property
    def tech_members(self) -> dict[str, tuple[int, ...]]:
        """Class indices grouped by technology ident."""
        groups: dict[str, list[int]] = {t.ident: [] for t in self.technologies}
        for i, cls in enumerate(self.classes):
            groups[cls.technology].append(i)
        return {k: tuple(v) for k, v in groups.items()}

    def beacon_rate(self, tech_id: str) -> float:
        """Beacon energy per active sub-slot for one technology."""
        return self.tech_by_id[tech_id].beacon_cost / self.resolution


def is_costless(c: int, sc: Scenario) -> bool:
    """True when transmissions of class c consume no energy at all.

    Such a class is saturated to full transmission before any optimisation:
    the gain is monotone and the budget is untouched.
    """
    cls = sc.classes[c]
    return cls.tx_cost == 0.0 and sc.tech_by_id[cls.technology].beacon_cost == 0.0


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    """Per-class forwarding probabilities on the sub-slot grid.

    ``probs`` has shape (n_classes, n_subslots); entry (c, k) is the
    probability that the source forwards to a class-c relay met during
    sub-slot k.  The array is stored read-only.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != 2:
            raise ValueError("policy must be a 2-D array (classes x sub-slots)")
        if arr.min(initial=0.0) < -1e-12 or arr.max(initial=0.0) > 1.0 + 1e-12:
            raise ValueError("forwarding probabilities must lie in [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def n_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def n_subslots(self) -> int:
        return self.probs.shape[1]

    def mass(self, c: int) -> float:
        """Total transmission mass of class c (sum of its probabilities)."""
        return float(self.probs[c].sum())

    @staticmethod
    def zeros(sc: Scenario) -> "Policy":
        return Policy(np.zeros((len(sc.classes), sc.subslots)))


@dataclass(frozen=True)
class ThresholdPolicy:
    """The canonical policy form: transmit with probability 1 before the
    per-class threshold, with the fractional tail on the threshold sub-slot,
    and never afterwards."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(h) for h in self.thresholds))
        for h in self.thresholds:
            if not (h >= 0.0) or not math.isfinite(h):
                raise ValueError("thresholds must be finite and >= 0")

    @property
    def n_classes(self) -> int:
        return len(self.thresholds)

    def integer_part(self, c: int) -> int:
        return int(math.floor(self.thresholds[c]))

    def fractional_tail(self, c: int) -> float:
        h = self.thresholds[c]
        return h - math.floor(h)


def expand_threshold(tp: ThresholdPolicy, sc: Scenario) -> Policy:
    """Materialise a threshold policy on the scenario's sub-slot grid.

    Raises ValueError when a threshold falls outside [0, subslots - 1].
    """
    n = sc.subslots
    if tp.n_classes != len(sc.classes):
        raise ValueError("threshold count does not match scenario classes")
    rows = np.zeros((tp.n_classes, n))
    for c, h in enumerate(tp.thresholds):
        if h < -1e-12 or h > (n - 1) + 1e-12:
            raise ValueError(f"threshold {h} for class {c} outside [0, {n - 1}]")
        h = min(max(h, 0.0), float(n - 1))
        j = int(math.floor(h))
        rows[c, :j] = 1.0
        if j < n:
            rows[c, j] = h - j
    return Policy(rows)


def extract_threshold(pol: Policy, sc: Scenario, atol: float = 1e-9) -> ThresholdPolicy:
    """Inverse of expand_threshold; rejects vectors that are not threshold shaped."""
    hs = []
    for c in range(pol.n_classes):
        h = pol.mass(c)
        hs.append(h)
    cand = ThresholdPolicy(tuple(hs))
    back = expand_threshold(cand, sc)
    if not np.allclose(back.probs, pol.probs, atol=atol, rtol=0.0):
        raise ValueError("policy is not threshold shaped")
    return cand


# ---------------------------------------------------------------------------
# Elementary quantities
# ---------------------------------------------------------------------------

def contact_rate(cls: NodeClass, sc: Scenario) -> float:
    """Poisson contact rate (1/s) of one class-c node at source or sink:
    8 * w * R_c * v_c / (pi * L^2)."""
    return 8.0 * sc.speed_constant * cls.range_m * cls.speed / (math.pi * sc.arena_radius ** 2)


def q_no_receive(mu_c: Sequence[float], k: int, k2: int, lam: float, dt: float) -> float:
    """Probability that one relay receives nothing during sub-slots k..k2
    (inclusive): exp(-lam * dt * sum(mu_c[k:k2+1]))."""
    mu = np.asarray(mu_c, dtype=float)
    if not (0 <= k <= k2 < mu.shape[0]):
        raise ValueError(f"window [{k}, {k2}] outside policy of length {mu.shape[0]}")
    return math.exp(-lam * dt * float(mu[k:k2 + 1].sum()))


def expected_received(c: int, k: int, pol: Policy, sc: Scenario) -> float:
    """Expected number of class-c relays that got a copy by sub-slot k."""
    if not (0 <= k < sc.subslots):
        raise ValueError("slot index outside horizon")
    q = q_no_receive(pol.probs[c], 0, k, sc.rates[c], sc.eff_slot)
    return sc.classes[c].population * (1.0 - q)


def expected_holding(c: int, k: int, pol: Policy, sc: Scenario) -> float:
    """Expected number of class-c relays still holding a copy at sub-slot k.

    Only receptions within the trailing TTL window max(0, k - ttl)..k count;
    older copies have been discarded.
    """
    if not (0 <= k < sc.subslots):
        raise ValueError("slot index outside horizon")
    lo = max(0, k - sc.classes[c].ttl_slots)
    q = q_no_receive(pol.probs[c], lo, k, sc.rates[c], sc.eff_slot)
    return sc.classes[c].population * (1.0 - q)


def holding_laplace(s: float, c: int, h: int, pol: Policy, sc: Scenario) -> float:
    """E[exp(-s * Y)] for the class-c holding count Y at sub-slot h.

    Relays receive independently, so Y is binomial(population, p) with p the
    per-node holding probability; the expectation is the binomial moment
    generating function (1 - p * (1 - e^-s))^population.
    """
    if not (s > 0.0):
        raise ValueError("s must be > 0")
    lo = max(0, h - sc.classes[c].ttl_slots)
    p = 1.0 - q_no_receive(pol.probs[c], lo, h, sc.rates[c], sc.eff_slot)
    return (1.0 - p * -math.expm1(-s)) ** sc.classes[c].population


# ---------------------------------------------------------------------------
# Objective and budget functionals
# ---------------------------------------------------------------------------

def _class_log_miss_policy(c: int, k: int, pol: Policy, sc: Scenario) -> float:
    """log of the probability that class c never delivers within sub-slots
    0..k-1, under the per-slot product approximation."""
    cls = sc.classes[c]
    lam = sc.rates[c]
    dt = sc.eff_slot
    mu = pol.probs[c]
    csum = np.concatenate(([0.0], np.cumsum(mu)))
    ks = np.arange(k)
    lo = np.maximum(0, ks - cls.ttl_slots)
    w = csum[ks + 1] - csum[lo]
    p = -np.expm1(-lam * dt * w)
    g = -math.expm1(-lam * dt)
    return cls.population * float(np.log1p(-p * g).sum())


def delivery_probability(pol: Policy, k: int, sc: Scenario) -> float:
    """Probability that the sink has the packet by the end of sub-slot k-1.

    Product over classes and sub-slots of the holding-count Laplace
    transforms evaluated at s = lam_c * dt, subtracted from one.  The value
    is nondecreasing under any pointwise increase of the policy.
    """
    if not (1 <= k <= sc.subslots):
        raise ValueError("horizon k must lie in [1, subslots]")
    if pol.probs.shape != (len(sc.classes), sc.subslots):
        raise ValueError("policy shape does not match scenario")
    total = sum(_class_log_miss_policy(c, k, pol, sc) for c in range(len(sc.classes)))
    return -math.expm1(total)


def energy_spent(pol: Policy, sc: Scenario) -> float:
    """Expected energy drawn by a policy over the whole horizon.

    Transmission part: tx_cost * population * (reception probability over all
    sub-slots), summed over classes.  Beaconing part: for every technology and
    sub-slot, the per-sub-slot beacon share is paid whenever at least one of
    its classes could transmit (probability 1 - prod(1 - mu)).
    """
    if pol.probs.shape != (len(sc.classes), sc.subslots):
        raise ValueError("policy shape does not match scenario")
    dt = sc.eff_slot
    total = 0.0
    for c, cls in enumerate(sc.classes):
        mass = float(pol.probs[c].sum())
        total += cls.tx_cost * cls.population * -math.expm1(-sc.rates[c] * dt * mass)
    for tech in sc.technologies:
        members = sc.tech_members[tech.ident]
        if not members or tech.beacon_cost == 0.0:
            continue
        silent = np.prod(1.0 - pol.probs[list(members), :], axis=0)
        total += sc.beacon_rate(tech.ident) * float((1.0 - silent).sum())
    return total


def threshold_energy(thresholds: Sequence[float], sc: Scenario) -> float:
    """energy_spent for a threshold policy, in closed form (no expansion).

    The transmission mass of class c is its threshold; the beacon term of a
    technology covers max(floor(h)) full sub-slots plus the combined
    fractional tails sitting on that last sub-slot.
    """
    hs = [float(h) for h in thresholds]
    if len(hs) != len(sc.classes):
        raise ValueError("threshold count does not match scenario classes")
    dt = sc.eff_slot
    total = 0.0
    for c, cls in enumerate(sc.classes):
        total += cls.tx_cost * cls.population * -math.expm1(-sc.rates[c] * dt * hs[c])
    for tech in sc.technologies:
        members = sc.tech_members[tech.ident]
        if not members or tech.beacon_cost == 0.0:
            continue
        floors = [math.floor(hs[c]) for c in members]
        m = max(floors)
        tail = 1.0
        for c, f in zip(members, floors):
            if f == m:
                tail *= 1.0 - (hs[c] - f)
        total += sc.beacon_rate(tech.ident) * (m + 1.0 - tail)
    return total


# ---------------------------------------------------------------------------
# Fast per-class delivery factors for threshold policies
# ---------------------------------------------------------------------------

def class_log_miss(c: int, thresholds: Iterable[float], sc: Scenario) -> np.ndarray:
    """log miss factor of class c at horizon = subslots, for a batch of
    threshold values (real valued, fractional tails allowed).

    The factor is the product over sub-slots of the class Laplace transforms;
    delivery probability of a threshold profile H is
    1 - exp(sum_c class_log_miss(c, [H_c])).
    """
    cls = sc.classes[c]
    n = sc.subslots
    lam = sc.rates[c]
    dt = sc.eff_slot
    h = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if h.size and (h.min() < -1e-9 or h.max() > (n - 1) + 1e-9):
        raise ValueError("threshold outside policy grid")
    h = np.clip(h, 0.0, float(n - 1))
    j = np.floor(h)
    alpha = h - j
    g = -math.expm1(-lam * dt)
    k = np.arange(n)
    a = np.maximum(0, k - cls.ttl_slots)
    out = np.empty(h.shape[0])
    rows = max(1, _CHUNK_CELLS // max(n, 1))
    for start in range(0, h.shape[0], rows):
        stop = min(start + rows, h.shape[0])
        jj = j[start:stop, None]
        w = np.clip(np.minimum(k + 1, jj) - a, 0.0, None)
        w += alpha[start:stop, None] * ((a <= jj) & (jj <= k))
        p = -np.expm1(-lam * dt * w)
        out[start:stop] = cls.population * np.log1p(-p * g).sum(axis=1)
    return out


@lru_cache(maxsize=64)
def _log_miss_table_cached(sc: Scenario, c: int) -> np.ndarray:
    table = class_log_miss(c, np.arange(sc.subslots), sc)
    table.flags.writeable = False
    return table


def class_log_miss_table(c: int, sc: Scenario) -> np.ndarray:
    """class_log_miss at every integer threshold 0..subslots-1 (cached)."""
    return _log_miss_table_cached(sc, c)


def threshold_objective(thresholds: Sequence[float], sc: Scenario) -> float:
    """Delivery probability of a threshold profile at the full horizon."""
    total = sum(float(class_log_miss(c, [h], sc)[0]) for c, h in enumerate(thresholds))
    return -math.expm1(total)


# ---------------------------------------------------------------------------
# Evaluation record
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolicyEvaluation:
    """Delivery probability, expected energy, and the budget verdict."""

    delivery_prob: float
    energy_spent: float
    feasible: bool


def evaluate(pol: Policy | ThresholdPolicy, sc: Scenario) -> PolicyEvaluation:
    """Evaluate a policy (or threshold policy) against a scenario."""
    if isinstance(pol, ThresholdPolicy):
        pol = expand_threshold(pol, sc)
    f = delivery_probability(pol, sc.subslots, sc)
    e = energy_spent(pol, sc)
    return PolicyEvaluation(f, e, e <= sc.budget + budget_tolerance(sc.budget))
