"""Solver-free feasibility checks, objective evaluation and a brute-force oracle.

Everything here works from the model's equations directly and shares no code
with the search in :mod:`meetsched.solver`; it is the referee the other
modules are tested against.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator

from .instance import ProblemInstance, StudentId, load_instance
from .schedule import Placement, Schedule, parse_schedule

__all__ = [
    "FAMILIES",
    "OracleResult",
    "ScheduleError",
    "Violation",
    "brute_force_optimum",
    "check_schedule",
    "decode_fixture",
    "evaluate_objective",
    "fixture_instance",
    "iter_feasible_schedules",
]

FAMILIES = ("eq1", "eq2", "eq3", "eq4", "eq9", "eq12")
WEEK_LOCAL = frozenset({"eq1", "eq2", "eq3", "eq4"})


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    constraint: str  # eq1 ... eq12, or "structural"
    bindings: tuple[tuple[str, int], ...]
    detail: str

    @property
    def row_id(self) -> str:
        return self.constraint + "".join(f"_{name}{value}" for name, value in self.bindings)


def _student_bindings(student: StudentId) -> list[tuple[str, int]]:
    return [("c", student.cohort_index + 1), ("i", student.member_index)]


def _structural(instance: ProblemInstance, schedule: Schedule) -> tuple[list[Violation], list[Placement]]:
    D, P = instance.days, instance.slots_per_day
    problems, good = [], []
    for n, p in enumerate(schedule.placements, start=1):
        where = [("n", n)]
        st = p.student
        if not 0 <= st.cohort_index < len(instance.cohorts):
            problems.append(Violation("structural", tuple(where), f"placement {n}: unknown cohort {st.cohort_index}"))
        elif not 1 <= st.member_index <= instance.cohorts[st.cohort_index].population:
            problems.append(Violation("structural", tuple(where), f"placement {n}: unknown member {st.member_index}"))
        elif not 1 <= p.day <= D:
            problems.append(Violation("structural", tuple(where), f"placement {n}: day {p.day} outside 1..{D}"))
        elif p.length < 1 or p.start_slot < 1 or p.start_slot + p.length - 1 > P:
            problems.append(Violation(
                "structural", tuple(where),
                f"placement {n}: slots {p.start_slot}..{p.start_slot + p.length - 1} outside 1..{P}",
            ))
        else:
            good.append(p)
    for day, slots in schedule.emergency.items():
        if not 1 <= day <= D:
            problems.append(Violation("structural", (("d", day),), f"emergency day {day} outside 1..{D}"))
            continue
        for k in slots:
            if not 1 <= k <= P:
                problems.append(Violation("structural", (("d", day), ("k", k)), f"emergency slot {k} outside 1..{P}"))
    return problems, good


def check_schedule(
    instance: ProblemInstance, schedule: Schedule, families: Iterable[str] | None = None
) -> list[Violation]:
    """Every failed constraint instantiation of ``schedule``.

    ``families`` restricts the check to a subset of eq tags; structural
    problems are always reported.
    """
    wanted = set(FAMILIES if families is None else families)
    D, P, L = instance.days, instance.slots_per_day, instance.emergency_quota
    out, placements = _structural(instance, schedule)
    emergency = {
        d: {k for k in slots if 1 <= k <= P}
        for d, slots in schedule.emergency.items() if 1 <= d <= D
    }

    if "eq1" in wanted:
        for j in range(1, D + 1):
            got = len(emergency.get(j, ()))
            if got != L:
                out.append(Violation("eq1", (("d", j),), f"day {j} has {got} emergency slots, needs {L}"))

    # covered[(student, day)] = set of slots; load counts every claim on a slot
    covered: dict[tuple[StudentId, int], set[int]] = {}
    load: dict[tuple[int, int], int] = {}
    for p in placements:
        cell = covered.setdefault((p.student, p.day), set())
        for k in p.slots:
            cell.add(k)
            load[(p.day, k)] = load.get((p.day, k), 0) + 1
    for d, slots in emergency.items():
        for k in slots:
            load[(d, k)] = load.get((d, k), 0) + 1

    if "eq2" in wanted:
        for (j, k), n in sorted(load.items()):
            cap = instance.availability[j - 1][k - 1]
            if n > cap:
                why = "unavailable" if cap == 0 else "double-booked"
                out.append(Violation("eq2", (("d", j), ("k", k)), f"day {j} slot {k} {why} ({n} claims)"))

    for student in instance.students:
        cohort = instance.cohort_of(student)
        R, T, B = cohort.slot_length, cohort.visits, cohort.gap
        ids = _student_bindings(student)
        per_day = {j: len(covered.get((student, j), ())) for j in range(1, D + 1)}
        for j in range(1, D + 1):
            slots = sorted(covered.get((student, j), ()))
            if "eq3" in wanted and len(slots) not in (0, R):
                out.append(Violation(
                    "eq3", tuple(ids + [("d", j)]),
                    f"{len(slots)} slots on day {j}, expected 0 or {R}",
                ))
            if "eq4" in wanted:
                for a, b in itertools.combinations(slots, 2):
                    if b >= a + R:
                        out.append(Violation(
                            "eq4", tuple(ids + [("d", j), ("k", a), ("h", b)]),
                            f"slots {a} and {b} on day {j} cannot belong to one {R}-slot visit",
                        ))
        if "eq9" in wanted:
            total = sum(per_day.values())
            if total != R * T:
                out.append(Violation("eq9", tuple(ids), f"{total} visit slots in total, expected {R * T}"))
        if "eq12" in wanted:
            for t in range(1, D - B + 1):
                window = sum(per_day[j] for j in range(t, t + B + 1))
                if window > R:
                    out.append(Violation(
                        "eq12", tuple(ids + [("t", t)]),
                        f"{window} visit slots in days {t}..{t + B}, at most {R} allowed",
                    ))
    return out


def evaluate_objective(instance: ProblemInstance, schedule: Schedule) -> int:
    """Twice the slot indices of all visit slots plus the emergency slot indices."""
    problems, _ = _structural(instance, schedule)
    if problems:
        raise ScheduleError("; ".join(v.detail for v in problems))
    visits = sum(k for p in schedule.placements for k in p.slots)
    return 2 * visits + sum(sum(slots) for slots in schedule.emergency.values())


# --------------------------------------------------------------------------
# brute-force oracle

@dataclass(frozen=True)
class OracleResult:
    status: str  # "optimal", "infeasible" or "budget_exceeded"
    objective: int | None
    schedule: Schedule | None
    nodes: int


class _BudgetExceeded(Exception):
    pass


class _Counter:
    def __init__(self, budget: int):
        self.budget = budget
        self.nodes = 0

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise _BudgetExceeded


def _visit_configs(instance: ProblemInstance, counter: _Counter) -> Iterator[list[Placement]]:
    """All visit placements satisfying eqs 2-14, enumerated student by student.

    Each student picks any ``visits``-subset of its (day, start) options; the
    only pruning is rejecting choices that already break a constraint.
    """
    D, P = instance.days, instance.slots_per_day
    F = instance.availability
    students = instance.students
    taken: set[tuple[int, int]] = set()
    chosen: list[Placement] = []

    def windows_ok(days: list[int], gap: int) -> bool:
        for t in range(1, D - gap + 1):
            if sum(1 for d in days if t <= d <= t + gap) > 1:
                return False
        return True

    def rec(n: int) -> Iterator[list[Placement]]:
        if n == len(students):
            yield list(chosen)
            return
        student = students[n]
        cohort = instance.cohort_of(student)
        R = cohort.slot_length
        options = [(j, k) for j in range(1, D + 1) for k in range(1, P - R + 2)]
        for combo in itertools.combinations(options, cohort.visits):
            counter.tick()
            days = [j for j, _ in combo]
            if len(set(days)) != len(days) or not windows_ok(days, cohort.gap):
                continue
            cells = [(j, k + r) for j, k in combo for r in range(R)]
            if any(F[j - 1][k - 1] == 0 or (j, k) in taken for j, k in cells):
                continue
            taken.update(cells)
            chosen.extend(Placement(student, j, k, R) for j, k in combo)
            yield from rec(n + 1)
            del chosen[len(chosen) - len(combo):]
            taken.difference_update(cells)

    yield from rec(0)


def _emergency_options(instance: ProblemInstance, placements: list[Placement], counter: _Counter) -> list[list[frozenset[int]]]:
    """Per day, every valid emergency slot set given the visits."""
    P, L = instance.slots_per_day, instance.emergency_quota
    busy = {(p.day, k) for p in placements for k in p.slots}
    out = []
    for j in range(1, instance.days + 1):
        day = []
        for combo in itertools.combinations(range(1, P + 1), L):
            counter.tick()
            if all(instance.availability[j - 1][k - 1] == 1 and (j, k) not in busy for k in combo):
                day.append(frozenset(combo))
        out.append(day)
    return out


def brute_force_optimum(instance: ProblemInstance, node_budget: int = 200_000) -> OracleResult:
    counter = _Counter(node_budget)
    best: tuple[int, Schedule] | None = None
    try:
        for placements in _visit_configs(instance, counter):
            options = _emergency_options(instance, placements, counter)
            if any(not day for day in options):
                continue
            # days are independent once visits are fixed, so the cheapest
            # product element is the cheapest set on each day
            emergency = {j: min(day, key=lambda s: (sum(s), sorted(s))) for j, day in enumerate(options, start=1)}
            schedule = Schedule(tuple(placements), emergency)
            value = evaluate_objective(instance, schedule)
            if best is None or value < best[0]:
                best = (value, schedule)
    except _BudgetExceeded:
        return OracleResult("budget_exceeded", None, None, counter.nodes)
    if best is None:
        return OracleResult("infeasible", None, None, counter.nodes)
    return OracleResult("optimal", best[0], best[1], counter.nodes)


def iter_feasible_schedules(instance: ProblemInstance, node_budget: int = 200_000) -> Iterator[Schedule]:
    """Every feasible schedule, one placement per visit.

    Raises RuntimeError when the enumeration exceeds ``node_budget`` nodes.
    """
    counter = _Counter(node_budget)
    try:
        for placements in _visit_configs(instance, counter):
            options = _emergency_options(instance, placements, counter)
            for choice in itertools.product(*options):
                counter.tick()
                yield Schedule(tuple(placements), dict(enumerate(choice, start=1)))
    except _BudgetExceeded:
        raise RuntimeError(f"enumeration exceeded {node_budget} nodes") from None


# --------------------------------------------------------------------------
# published timetables

_FIXTURES = {
    "table5": ("small.json", "table5.schedule.json"),
    "table9_week4": ("case_study_week.json", "table9_week4.schedule.json"),
}


def _fixture_text(name: str) -> str:
    return resources.files("meetsched").joinpath("fixtures").joinpath(name).read_text()


def fixture_instance(name: str) -> ProblemInstance:
    """Instance a named fixture is checked against (``small``, ``case_study``, ...)."""
    filename = _FIXTURES[name][0] if name in _FIXTURES else f"{name}.json"
    with resources.as_file(resources.files("meetsched").joinpath("fixtures").joinpath(filename)) as path:
        return load_instance(path)


def decode_fixture(named_fixture: str) -> Schedule:
    """The published timetable ``table5`` or ``table9_week4`` as a Schedule.

    ``table9_week4`` uses week-local day numbers 1-5 against a one-week copy of
    the case-study instance; only eq1-eq4 are meaningful for it.
    """
    if named_fixture not in _FIXTURES:
        raise KeyError(f"unknown fixture {named_fixture!r}; choose from {sorted(_FIXTURES)}")
    instance = fixture_instance(named_fixture)
    return parse_schedule(instance, _fixture_text(_FIXTURES[named_fixture][1]))


def table10_itinerary() -> list[dict[str, object]]:
    """The fifth master student's semester visits as (week, day, slots) rows."""
    return json.loads(_fixture_text("table10_master5.json"))["visits"]
