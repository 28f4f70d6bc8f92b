"""Greedy construction of integer threshold policies.

The delivery objective, viewed as a set function over (class, sub-slot)
transmission pairs, is monotone and submodular: the gain of one extra
sub-slot shrinks as the policy grows.  Awarding sub-slots greedily therefore
carries the classic multiplicative guarantees; two award rules are provided,
the raw delivery gain and the gain normalised by the marginal energy cost
(the latter only meaningful without beaconing costs, whose slot cost is not
independent per class).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum

from .model import (
    Scenario,
    ThresholdPolicy,
    budget_tolerance,
    class_log_miss,
    class_log_miss_table,
    is_costless,
    threshold_energy,
    threshold_objective,
)
from .gridsearch import (
    BudgetExceededError,
    BudgetUnboundedError,
    PartialAssignment,
    boundary_threshold,
    saturating_threshold,
)

__all__ = [
    "COMBINED_GUARANTEE",
    "GreedyReport",
    "GreedyVariant",
    "cardinality_cap",
    "combined_best",
    "greedy_construct",
    "min_slots",
]

# Guarantee carried by the better of the two variants when beaconing is free:
# half of the classic 1 - 1/e factor.
COMBINED_GUARANTEE = 0.5 * (1.0 - 1.0 / math.e)

_SNAP = 1e-9


class GreedyVariant(str, Enum):
    """Award rule: raw delivery gain, or gain per unit of marginal energy."""

    GAIN = "gain"
    GAIN_PER_COST = "gain_per_cost"


@dataclass
class GreedyReport:
    """Result of a greedy construction run.

    ``online_bound`` is the guaranteed fraction 1 - e^(-iterations / cap) of
    the best integer profile, ``offline_bound`` the instance-only variant
    built from the per-class minimum slot counts.  When the fractional top-up
    ran, ``topup_class`` names the class whose threshold was extended to the
    budget boundary.
    """

    policy: ThresholdPolicy
    objective: float
    iterations: int
    cardinality_cap: int
    online_bound: float
    offline_bound: float
    variant: GreedyVariant
    wall_time: float = 0.0
    topup_class: int | None = None

    @property
    def fractional_topup(self) -> bool:
        return self.topup_class is not None


def _solo_capacity(c: int, sc: Scenario) -> float:
    """Saturating threshold of class c with everyone else silent."""
    try:
        return boundary_threshold(c, PartialAssignment(c), sc, unassigned="zero")
    except BudgetUnboundedError:
        return math.inf
    except BudgetExceededError:
        return 0.0


def cardinality_cap(sc: Scenario) -> int:
    """Slot-count cap W = min(max_c solo capacity, subslots - 1).

    No single class can afford more than its solo capacity, and no threshold
    exceeds the grid; the cap feeds the greedy certificates.
    """
    best = max(_solo_capacity(c, sc) for c in range(len(sc.classes)))
    if math.isinf(best):
        return sc.max_threshold
    return min(int(math.floor(best + _SNAP)), sc.max_threshold)


def min_slots(c: int, sc: Scenario) -> int:
    """Largest integer threshold class c can afford while every other class
    transmits in full; 0 when the others alone exhaust the budget."""
    others = {c2: sc.max_threshold for c2 in range(len(sc.classes)) if c2 != c}
    try:
        r = boundary_threshold(c, PartialAssignment(c, others), sc)
    except BudgetExceededError:
        return 0
    except BudgetUnboundedError:
        return sc.max_threshold
    return max(0, min(int(math.floor(r + _SNAP)), sc.max_threshold))


def greedy_construct(sc: Scenario, variant: GreedyVariant = GreedyVariant.GAIN,
                     *, fractional_topup: bool = True) -> GreedyReport:
    """Build an integer threshold policy by repeatedly awarding the next
    sub-slot to the class with the best gain, while the budget allows it.

    Classes whose transmissions are entirely free are saturated up front and
    excluded from the iteration count.  Ties in the arg max go to the lowest
    class index.  With ``fractional_topup`` the single class whose extension
    helps the objective most is afterwards pushed to the exact budget
    boundary (at most one fractional threshold; the certificates are computed
    from the integer iterations alone).
    """
    t0 = time.perf_counter()
    n_classes = len(sc.classes)
    n1 = sc.max_threshold
    dt = sc.eff_slot
    tol = budget_tolerance(sc.budget)
    if variant is GreedyVariant.GAIN_PER_COST:
        if any(t.beacon_cost > 0.0 for t in sc.technologies):
            raise ValueError("gain_per_cost requires all beacon costs to be zero")

    tables = [class_log_miss_table(c, sc) for c in range(n_classes)]
    k = [n1 if is_costless(c, sc) else 0 for c in range(n_classes)]
    costly = [c for c in range(n_classes) if not is_costless(c, sc)]
    log_miss = sum(tables[c][k[c]] for c in range(n_classes))
    energy = threshold_energy([float(x) for x in k], sc)

    # per-technology integer beacon coverage
    cover = {t.ident: max((k[c] for c in sc.tech_members[t.ident]), default=0)
             for t in sc.technologies}

    iterations = 0
    while True:
        best_c = -1
        best_score = 0.0
        best_energy = 0.0
        f_cur = -math.expm1(log_miss)
        for c in costly:
            if k[c] >= n1:
                continue
            cls = sc.classes[c]
            g = sc.rates[c] * dt
            tx_marg = cls.tx_cost * cls.population * (
                math.exp(-g * k[c]) - math.exp(-g * (k[c] + 1)))
            rate = sc.beacon_rate(cls.technology)
            beacon_marg = rate * max(0, k[c] + 1 - cover[cls.technology])
            e_new = energy + tx_marg + beacon_marg
            if e_new > sc.budget + tol:
                continue
            gain = -math.expm1(log_miss - tables[c][k[c]] + tables[c][k[c] + 1]) - f_cur
            if variant is GreedyVariant.GAIN_PER_COST:
                marg = cls.tx_cost * cls.population * math.exp(-g * k[c]) * -math.expm1(-g)
                score = gain / marg if marg > 0.0 else math.inf
            else:
                score = gain
            if best_c < 0 or score > best_score:
                best_c = c
                best_score = score
                best_energy = e_new
        if best_c < 0:
            break
        log_miss += tables[best_c][k[best_c] + 1] - tables[best_c][k[best_c]]
        k[best_c] += 1
        energy = best_energy
        cover[sc.classes[best_c].technology] = max(
            cover[sc.classes[best_c].technology], k[best_c])
        iterations += 1

    thresholds = [float(x) for x in k]

    topup_class = None
    if fractional_topup:
        best_val = log_miss
        best_h = None
        for c in costly:
            if k[c] >= n1:
                continue
            r = saturating_threshold(c, thresholds, sc)
            if r <= k[c] + 1e-12:
                continue
            val = log_miss - tables[c][k[c]] + float(class_log_miss(c, [r], sc)[0])
            if val < best_val:
                best_val = val
                best_h = r
                topup_class = c
        if topup_class is not None:
            thresholds[topup_class] = best_h

    w = cardinality_cap(sc)
    online = -math.expm1(-iterations / w) if w > 0 else 0.0
    offline = 0.0
    if w > 0:
        total_min = sum(min_slots(c, sc) for c in range(n_classes))
        offline = -math.expm1(-total_min / w)

    policy = ThresholdPolicy(tuple(thresholds))
    return GreedyReport(
        policy=policy,
        objective=threshold_objective(thresholds, sc),
        iterations=iterations,
        cardinality_cap=w,
        online_bound=online,
        offline_bound=offline,
        variant=variant,
        wall_time=time.perf_counter() - t0,
        topup_class=topup_class,
    )


def combined_best(sc: Scenario, *, fractional_topup: bool = True) -> GreedyReport:
    """Better of the two greedy variants; only valid without beaconing costs,
    where the pair carries the COMBINED_GUARANTEE factor of the best integer
    profile within budget."""
    if any(t.beacon_cost > 0.0 for t in sc.technologies):
        raise ValueError("combined greedy requires all beacon costs to be zero")
    first = greedy_construct(sc, GreedyVariant.GAIN, fractional_topup=fractional_topup)
    second = greedy_construct(sc, GreedyVariant.GAIN_PER_COST,
                              fractional_topup=fractional_topup)
    return first if first.objective >= second.objective else second
