"""Command-line front end: scenario files, solver runs, parameter sweeps,
and Monte Carlo validation, with CSV/JSON emission.

Exit codes: 0 success, 1 invalid input, 2 infeasible request or contract
violation (including solver timeouts), 3 internal numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from .model import (
    NodeClass,
    Policy,
    Scenario,
    ScenarioError,
    Technology,
    ThresholdPolicy,
    evaluate,
    expand_threshold,
    threshold_energy,
)
from .gridsearch import SolveTimeout, grid_search, ratio_bound, enumerate_saturating
from .greedy import GreedyVariant, combined_best, greedy_construct
from .baselines import arrival_rate_greedy, class_independent, uniform_policy
from .mcsim import SimConfig, validate

__all__ = [
    "ALGORITHMS",
    "CSV_FIELDS",
    "main",
    "parse_scenario",
    "render_scenario",
    "sample_scalability_scenario",
    "sample_table_scenario",
]

# =========================================================================
# Presets (experiment reconstruction)
# =========================================================================

# Mobility profiles, average speed in m/s.
MOBILITY_PRESETS = {
    "pedestrian": 1.5,
    "bicycle": 6.0,
    "vehicle": 9.0,
}

# Technology presets: communication range in metres.  The per-copy and
# per-slot energy figures are reconstructions (midpoints of the random
# sampling intervals used for scalability runs); override them in the
# scenario file for hardware-accurate numbers.
TECH_RANGE_M = {
    "zigbee": 15.0,
    "bluetooth": 50.0,
    "wifi-direct": 100.0,
}
DEFAULT_TX_COST = 0.15
DEFAULT_BEACON_COST = 5.5e-7

TABLE_DEADLINE_SLOTS = (25, 50, 100, 250)
TABLE_ARENA_RADII = (350.0, 500.0, 750.0, 1000.0)
TABLE_POPULATIONS = (9, 15, 20)
DEFAULT_SLOT_LEN = 10.0

CSV_FIELDS = ("instance_id", "algorithm", "objective", "upper_bound", "ratio",
              "energy", "wall_time_s", "work", "status")

VALIDATION_FIELDS = ("instance_id", "policy", "trials", "analytic_delivery",
                     "empirical_delivery", "delivery_gap", "delivery_ci",
                     "analytic_energy", "empirical_energy", "energy_gap",
                     "energy_ci", "flagged")

ALGORITHMS = ("grid", "greedy1", "greedy2", "combined", "arrival", "uniform")

UB_CLASS_CAP = 3


class CliInputError(ValueError):
    """Bad command line or input document."""


class CliRequestError(RuntimeError):
    """Valid input, but the requested combination cannot be served."""


# =========================================================================
# Scenario files
# =========================================================================

def _field(data: dict, path: str, key: str, kind, required: bool = True, default=None):
    if key not in data:
        if required:
            raise CliInputError(f"{path}.{key}: missing required key")
        return default
    value = data[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise CliInputError(f"{path}.{key}: expected an integer, got {value!r}")
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is list and isinstance(value, list):
        return value
    raise CliInputError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")


def parse_scenario(doc: dict, *, resolution_override: int | None = None) -> Scenario:
    """Build a Scenario from a scenario-file document.

    TTLs in the document are counted in whole slots and converted to the
    sub-slot grid here.  Errors carry the offending field path.
    """
    if not isinstance(doc, dict):
        raise CliInputError("scenario: top level must be an object")
    path = "scenario"
    deadline = _field(doc, path, "deadline_s", float)
    slot_len = _field(doc, path, "slot_len_s", float)
    arena = _field(doc, path, "arena_radius_m", float)
    budget = _field(doc, path, "budget", float)
    resolution = _field(doc, path, "resolution", int, required=False, default=1)
    if resolution_override is not None:
        resolution = resolution_override
    speed_constant = _field(doc, path, "speed_constant", float, required=False,
                            default=1.3693)

    tech_docs = _field(doc, path, "technologies", list)
    technologies = []
    for i, td in enumerate(tech_docs):
        tpath = f"technologies[{i}]"
        if not isinstance(td, dict):
            raise CliInputError(f"{tpath}: expected an object")
        technologies.append(Technology(
            ident=_field(td, tpath, "id", str),
            beacon_cost=_field(td, tpath, "beacon_cost", float),
        ))

    class_docs = _field(doc, path, "classes", list)
    if not class_docs:
        raise CliInputError("scenario.classes: at least one class required")
    classes = []
    for i, cd in enumerate(class_docs):
        cpath = f"classes[{i}]"
        if not isinstance(cd, dict):
            raise CliInputError(f"{cpath}: expected an object")
        ttl_slots = cd.get("ttl_slots")
        if not isinstance(ttl_slots, (int, float)) or isinstance(ttl_slots, bool):
            raise CliInputError(f"{cpath}.ttl_slots: expected a number")
        ttl_sub = int(round(ttl_slots * resolution))
        if abs(ttl_slots * resolution - ttl_sub) > 1e-9:
            raise CliInputError(
                f"{cpath}.ttl_slots: {ttl_slots} not representable at resolution {resolution}")
        try:
            classes.append(NodeClass(
                population=_field(cd, cpath, "population", int),
                ttl_slots=ttl_sub,
                speed=_field(cd, cpath, "speed_mps", float),
                range_m=_field(cd, cpath, "range_m", float),
                tx_cost=_field(cd, cpath, "tx_cost", float),
                technology=_field(cd, cpath, "technology", str),
            ))
        except ScenarioError as exc:
            raise CliInputError(f"{cpath}: {exc}") from exc

    try:
        return Scenario(
            classes=tuple(classes),
            technologies=tuple(technologies),
            deadline=deadline,
            slot_len=slot_len,
            arena_radius=arena,
            budget=budget,
            resolution=resolution,
            speed_constant=speed_constant,
        )
    except ScenarioError as exc:
        raise CliInputError(f"scenario: {exc}") from exc


def render_scenario(sc: Scenario) -> dict:
    """Inverse of parse_scenario (TTLs back in whole slots)."""
    return {
        "deadline_s": sc.deadline,
        "slot_len_s": sc.slot_len,
        "arena_radius_m": sc.arena_radius,
        "budget": sc.budget,
        "resolution": sc.resolution,
        "speed_constant": sc.speed_constant,
        "technologies": [{"id": t.ident, "beacon_cost": t.beacon_cost}
                         for t in sc.technologies],
        "classes": [{
            "population": c.population,
            "ttl_slots": c.ttl_slots // sc.resolution
            if c.ttl_slots % sc.resolution == 0 else c.ttl_slots / sc.resolution,
            "speed_mps": c.speed,
            "range_m": c.range_m,
            "tx_cost": c.tx_cost,
            "technology": c.technology,
        } for c in sc.classes],
    }


def load_scenario(path: str, resolution_override: int | None = None) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliInputError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(doc, resolution_override=resolution_override)


def preset_class(mobility: str, technology: str, population: int,
                 ttl_slots: int, resolution: int,
                 tx_cost: float = DEFAULT_TX_COST) -> NodeClass:
    """Node class built from a mobility and technology preset pair."""
    if mobility not in MOBILITY_PRESETS:
        raise CliInputError(f"unknown mobility preset {mobility!r}")
    if technology not in TECH_RANGE_M:
        raise CliInputError(f"unknown technology preset {technology!r}")
    return NodeClass(
        population=population,
        ttl_slots=ttl_slots * resolution,
        speed=MOBILITY_PRESETS[mobility],
        range_m=TECH_RANGE_M[technology],
        tx_cost=tx_cost,
        technology=technology,
    )


# =========================================================================
# Random instance samplers
# =========================================================================

def sample_table_scenario(rng: np.random.Generator, *, resolution: int = 5,
                          n_classes: int | None = None,
                          with_beacons: bool = True,
                          budget_frac: tuple[float, float] = (0.35, 0.8)
                          ) -> tuple[str, Scenario]:
    """One random instance over the tabulated experiment grid.

    Deadlines are slot counts; every class draws a distinct
    (mobility, technology) pair so contact rates never coincide.  The budget
    is a uniform fraction of the all-full transmission cost, which keeps the
    constraint binding without starving the instance.
    """
    k_slots = int(rng.choice(TABLE_DEADLINE_SLOTS))
    arena = float(rng.choice(TABLE_ARENA_RADII))
    pop = int(rng.choice(TABLE_POPULATIONS))
    n_cls = int(n_classes) if n_classes is not None else int(rng.integers(1, 4))
    combos = [(m, t) for m in MOBILITY_PRESETS for t in TECH_RANGE_M]
    picks = rng.choice(len(combos), size=n_cls, replace=False)

    beacon = DEFAULT_BEACON_COST if with_beacons else 0.0
    tech_ids = sorted({combos[p][1] for p in picks})
    technologies = tuple(Technology(t, beacon) for t in tech_ids)
    classes = tuple(
        preset_class(combos[p][0], combos[p][1], pop, k_slots, resolution)
        for p in picks)

    probe = Scenario(classes=classes, technologies=technologies,
                     deadline=k_slots * DEFAULT_SLOT_LEN, slot_len=DEFAULT_SLOT_LEN,
                     arena_radius=arena, budget=1.0, resolution=resolution)
    full_cost = threshold_energy([probe.max_threshold] * n_cls, probe)
    frac = float(rng.uniform(*budget_frac))
    sc = Scenario(classes=classes, technologies=technologies,
                  deadline=k_slots * DEFAULT_SLOT_LEN, slot_len=DEFAULT_SLOT_LEN,
                  arena_radius=arena, budget=frac * full_cost, resolution=resolution)
    ident = f"K{k_slots}_L{int(arena)}_N{pop}_C{n_cls}_b{frac:.2f}"
    return ident, sc


def sample_scalability_scenario(rng: np.random.Generator, n_classes: int, *,
                                resolution: int = 3, k_slots: int = 100,
                                population: int = 10, arena: float = 500.0,
                                budget_frac: tuple[float, float] = (0.3, 0.7)
                                ) -> tuple[str, Scenario]:
    """Random mobility and per-class technologies for scalability timing runs."""
    classes = []
    technologies = []
    for c in range(n_classes):
        tech_id = f"radio{c}"
        technologies.append(Technology(tech_id, float(rng.uniform(3e-7, 8e-7))))
        classes.append(NodeClass(
            population=population,
            ttl_slots=k_slots * resolution,
            speed=float(rng.uniform(1.0, 15.0)),
            range_m=float(rng.uniform(15.0, 50.0)),
            tx_cost=float(rng.uniform(0.05, 0.25)),
            technology=tech_id,
        ))
    probe = Scenario(classes=tuple(classes), technologies=tuple(technologies),
                     deadline=k_slots * DEFAULT_SLOT_LEN, slot_len=DEFAULT_SLOT_LEN,
                     arena_radius=arena, budget=1.0, resolution=resolution)
    full_cost = threshold_energy([probe.max_threshold] * n_classes, probe)
    frac = float(rng.uniform(*budget_frac))
    sc = Scenario(classes=tuple(classes), technologies=tuple(technologies),
                  deadline=k_slots * DEFAULT_SLOT_LEN, slot_len=DEFAULT_SLOT_LEN,
                  arena_radius=arena, budget=frac * full_cost, resolution=resolution)
    return f"scal_C{n_classes}_b{frac:.2f}", sc


# =========================================================================
# Algorithm dispatch
# =========================================================================

@dataclass
class AlgoResult:
    policy: ThresholdPolicy
    objective: float
    work: int
    extras: dict


def run_algorithm(name: str, sc: Scenario, *, timeout_s: float | None = None) -> AlgoResult:
    beacons_present = any(t.beacon_cost > 0.0 for t in sc.technologies)
    if name == "grid":
        rep = grid_search(sc, with_upper_bound=False, timeout_s=timeout_s)
        return AlgoResult(rep.policy, rep.objective, rep.enumerated,
                          {"ratio_bound": rep.ratio_bound})
    if name in ("greedy1", "greedy2"):
        variant = GreedyVariant.GAIN if name == "greedy1" else GreedyVariant.GAIN_PER_COST
        if variant is GreedyVariant.GAIN_PER_COST and beacons_present:
            raise CliRequestError("greedy2 requires a scenario without beacon costs")
        rep = greedy_construct(sc, variant)
        return AlgoResult(rep.policy, rep.objective, rep.iterations, {
            "cardinality_cap": rep.cardinality_cap,
            "online_bound": rep.online_bound,
            "offline_bound": rep.offline_bound,
            "fractional_topup": rep.fractional_topup,
        })
    if name == "combined":
        if beacons_present:
            raise CliRequestError("combined greedy requires a scenario without beacon costs")
        rep = combined_best(sc)
        return AlgoResult(rep.policy, rep.objective, rep.iterations, {
            "variant": rep.variant.value,
            "guarantee": 0.5 * (1.0 - 1.0 / math.e),
            "online_bound": rep.online_bound,
            "offline_bound": rep.offline_bound,
        })
    if name == "arrival":
        tp = arrival_rate_greedy(sc)
        ev = evaluate(tp, sc)
        return AlgoResult(tp, ev.delivery_prob, len(sc.classes), {})
    if name == "uniform":
        h = class_independent(sc)
        tp = uniform_policy(sc, h)
        ev = evaluate(tp, sc)
        return AlgoResult(tp, ev.delivery_prob, 1, {"common_threshold": h})
    raise CliInputError(f"unknown algorithm {name!r}")


def _result_row(instance_id: str, algorithm: str, res: AlgoResult | None,
                sc: Scenario, ub: float | None, wall: float | None,
                status: str = "ok") -> dict:
    row = {k: "" for k in CSV_FIELDS}
    row["instance_id"] = instance_id
    row["algorithm"] = algorithm
    row["status"] = status
    if res is not None:
        energy = threshold_energy(res.policy.thresholds, sc)
        row["objective"] = repr(res.objective)
        row["energy"] = repr(energy)
        row["work"] = res.work
        if ub is not None:
            row["upper_bound"] = repr(ub)
            row["ratio"] = repr(res.objective / ub) if ub > 0.0 else ""
    if wall is not None:
        row["wall_time_s"] = f"{wall:.6f}"
    return row


def _write_rows(rows, out_path: str | None, fields=CSV_FIELDS):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    data = buf.getvalue()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data)


def _write_json(obj, out_path: str | None):
    data = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data)


# =========================================================================
# Subcommands
# =========================================================================

def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario, args.resolution)
    names = [a.strip() for a in args.algorithm.split(",") if a.strip()]
    for name in names:
        if name not in ALGORITHMS:
            raise CliInputError(f"unknown algorithm {name!r} (choose from {ALGORITHMS})")

    ub = None
    if len(sc.classes) <= args.ub_cap:
        ub = grid_search(sc, with_upper_bound=True, timeout_s=args.timeout).upper_bound

    rows = []
    reports = []
    for name in names:
        t0 = time.perf_counter()
        res = run_algorithm(name, sc, timeout_s=args.timeout)
        wall = time.perf_counter() - t0
        rows.append(_result_row(args.instance_id, name, res, sc, ub, wall))
        reports.append({
            "instance_id": args.instance_id,
            "algorithm": name,
            "objective": res.objective,
            "upper_bound": ub,
            "ratio": (res.objective / ub) if ub else None,
            "energy": threshold_energy(res.policy.thresholds, sc),
            "feasible": evaluate(res.policy, sc).feasible,
            "thresholds_subslots": list(res.policy.thresholds),
            "thresholds_slots": [h / sc.resolution for h in res.policy.thresholds],
            "wall_time_s": wall,
            "work": res.work,
            **res.extras,
        })
    if args.format == "json":
        _write_json(reports if len(reports) > 1 else reports[0], args.out)
    else:
        _write_rows(rows, args.out)
    return 0


def cmd_sweep(args) -> int:
    rng = np.random.default_rng(args.seed)
    names = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for name in names:
        if name not in ALGORITHMS:
            raise CliInputError(f"unknown algorithm {name!r} (choose from {ALGORITHMS})")

    instances: list[tuple[str, Scenario]] = []
    if args.mode == "table":
        if args.count < 1:
            raise CliInputError("sweep: --count must be >= 1")
        for i in range(args.count):
            ident, sc = sample_table_scenario(
                rng, resolution=args.resolution,
                with_beacons=not args.no_beacons)
            instances.append((f"{ident}_i{i}", sc))
    else:
        sizes = [int(x) for x in args.classes.split(",") if x.strip()]
        if not sizes:
            raise CliInputError("sweep: --classes must list at least one size")
        for n_cls in sizes:
            ident, sc = sample_scalability_scenario(rng, n_cls, resolution=args.resolution)
            instances.append((ident, sc))

    rows = []
    for ident, sc in instances:
        ub = None
        if "grid" in names and len(sc.classes) <= args.ub_cap:
            try:
                ub = grid_search(sc, with_upper_bound=True,
                                 timeout_s=args.timeout).upper_bound
            except SolveTimeout:
                ub = None
        for name in names:
            t0 = time.perf_counter()
            try:
                res = run_algorithm(name, sc, timeout_s=args.timeout)
            except SolveTimeout:
                rows.append(_result_row(ident, name, None, sc, None, None,
                                        status="timeout"))
                continue
            except CliRequestError:
                rows.append(_result_row(ident, name, None, sc, None, None,
                                        status="inapplicable"))
                continue
            wall = (time.perf_counter() - t0) if args.timings else None
            rows.append(_result_row(ident, name, res, sc, ub, wall))
    _write_rows(rows, args.out)
    return 0


def _policy_from_source(args, sc: Scenario) -> tuple[str, Policy]:
    if args.policy_file:
        try:
            with open(args.policy_file, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliInputError(f"cannot read policy file: {exc}") from exc
        if isinstance(doc, dict) and "thresholds" in doc:
            th = doc["thresholds"]
            if not isinstance(th, list) or len(th) != len(sc.classes):
                raise CliInputError(
                    f"policy.thresholds: expected {len(sc.classes)} entries")
            try:
                return "file", expand_threshold(ThresholdPolicy(tuple(th)), sc)
            except ValueError as exc:
                raise CliInputError(f"policy.thresholds: {exc}") from exc
        if isinstance(doc, dict) and "policy" in doc:
            mat = np.asarray(doc["policy"], dtype=float)
            if mat.shape != (len(sc.classes), sc.subslots):
                raise CliInputError(
                    f"policy.policy: expected shape {(len(sc.classes), sc.subslots)},"
                    f" got {mat.shape}")
            return "file", Policy(mat)
        raise CliInputError("policy file needs a 'thresholds' or 'policy' key")
    res = run_algorithm(args.algorithm, sc)
    return args.algorithm, expand_threshold(res.policy, sc)


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario, args.resolution)
    label, pol = _policy_from_source(args, sc)
    cfg = SimConfig(trials=args.trials, seed=args.seed, record_holding=False)
    record = validate(sc, pol, cfg)
    row = {
        "instance_id": args.instance_id,
        "policy": label,
        "trials": record.trials,
        "analytic_delivery": repr(record.analytic_delivery),
        "empirical_delivery": repr(record.empirical_delivery),
        "delivery_gap": repr(record.delivery_gap),
        "delivery_ci": repr(record.delivery_ci),
        "analytic_energy": repr(record.analytic_energy),
        "empirical_energy": repr(record.empirical_energy),
        "energy_gap": repr(record.energy_gap),
        "energy_ci": repr(record.energy_ci),
        "flagged": str(record.flagged).lower(),
    }
    if args.format == "json":
        _write_json(row, args.out)
    else:
        _write_rows([row], args.out, fields=VALIDATION_FIELDS)
    return 0


def cmd_bound(args) -> int:
    classes = math.inf if args.classes.strip() in ("inf", "") else float(args.classes)
    value = ratio_bound(args.slots, args.resolution, classes)
    if args.format == "json" or args.out:
        _write_json({"slots": args.slots, "resolution": args.resolution,
                     "classes": args.classes, "ratio_bound": value}, args.out)
    else:
        sys.stdout.write(f"{value!r}\n")
    return 0


def cmd_validate_enum(args) -> int:
    import itertools

    from .model import budget_tolerance

    sc = load_scenario(args.scenario, args.resolution)
    n = sc.subslots
    n_classes = len(sc.classes)
    if n_classes < 2:
        raise CliInputError("validate-enum needs at least two classes")
    if n ** (n_classes - 1) > args.limit:
        raise CliInputError(
            f"instance too large for exhaustive validation ({n}^{n_classes - 1}"
            f" > {args.limit}); reduce slots, resolution, or classes")

    tol = budget_tolerance(sc.budget)
    mismatches = 0
    checked = 0
    for frac_c in range(n_classes):
        enumerated = {tuple(sorted(a.items())) for a, _ in enumerate_saturating(sc, frac_c)}
        others = [c for c in range(n_classes) if c != frac_c]
        brute = set()
        for combo in itertools.product(range(n), repeat=len(others)):
            assign = dict(zip(others, combo))
            base = [0.0] * n_classes
            for c, h in assign.items():
                base[c] = float(h)
            lo_energy = threshold_energy(base, sc)
            base[frac_c] = float(sc.max_threshold)
            hi_energy = threshold_energy(base, sc)
            if lo_energy <= sc.budget + tol and hi_energy >= sc.budget - tol:
                brute.add(tuple(sorted(assign.items())))
        checked += len(brute)
        if enumerated != brute:
            mismatches += len(enumerated.symmetric_difference(brute))
    sys.stdout.write(f"profiles checked: {checked}\nmismatches: {mismatches}\n")
    return 0 if mismatches == 0 else 2


# =========================================================================
# Entry point
# =========================================================================

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; remap to 1
        raise CliInputError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="twohop",
                     description="Two-hop forwarding policy solver toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--resolution", type=int, default=None,
                        help="override the scenario resolution")

    p = sub.add_parser("solve", parents=[common],
                       help="run solvers or baselines on one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--algorithm", default="grid",
                   help="comma-separated subset of " + ",".join(ALGORITHMS))
    p.add_argument("--instance-id", default="scenario")
    p.add_argument("--ub-cap", type=int, default=UB_CLASS_CAP,
                   help="compute the upper bound only up to this many classes")
    p.add_argument("--timeout", type=float, default=None,
                   help="wall-clock limit for the grid enumeration, seconds")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common],
                       help="run algorithms over sampled instance grids")
    p.add_argument("--mode", choices=("table", "scalability"), default="table")
    p.add_argument("--count", type=int, default=10, help="table-mode instance count")
    p.add_argument("--classes", default="2,4,8",
                   help="scalability-mode class counts, comma separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algorithms", default="grid,greedy1,arrival,uniform")
    p.add_argument("--no-beacons", action="store_true",
                   help="sample instances without beacon costs")
    p.add_argument("--ub-cap", type=int, default=UB_CLASS_CAP)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--timings", action="store_true",
                   help="record wall times (output no longer byte-reproducible)")
    p.set_defaults(func=cmd_sweep, resolution=5)

    p = sub.add_parser("simulate", parents=[common],
                       help="validate a policy against the contact-process simulator")
    p.add_argument("--scenario", required=True)
    p.add_argument("--algorithm", default="grid",
                   help="policy source algorithm (ignored with --policy-file)")
    p.add_argument("--policy-file", default=None,
                   help="JSON file with 'thresholds' or a full 'policy' matrix")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instance-id", default="scenario")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", parents=[common],
                       help="evaluate the grid-quality lower bound")
    p.add_argument("--slots", type=int, required=True)
    p.add_argument("--classes", default="inf")
    p.set_defaults(func=cmd_bound, resolution=1)

    p = sub.add_parser("validate-enum", parents=[common],
                       help="cross-check the enumeration against brute force (small instances)")
    p.add_argument("--scenario", required=True)
    p.add_argument("--limit", type=int, default=200_000)
    p.set_defaults(func=cmd_validate_enum)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CliRequestError, SolveTimeout) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        print(f"internal numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
