"""Explicit 0-1 linear program for the meeting scheduling model.

Every row carries an id of the form ``eq<N>_<bindings>``.  ``N`` tags the
family: 1 emergency quota, 2 slot capacity, 3 day marker (0 or R slots a
day), 4 contiguity, 9 total visit slots, 12 gap window.  The bindings are
1-based: ``d`` day, ``k``/``h`` slots, ``c`` cohort, ``i`` member, ``t``
window start.  Families apply to every cohort with the cohort as a binding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .instance import ProblemInstance, StudentId
from .schedule import Placement, Schedule

__all__ = [
    "ConstraintRow",
    "IlpModel",
    "Variable",
    "build_model",
    "decode_point",
    "encode_schedule",
    "export_lp",
    "model_stats",
    "row_id",
    "violated_rows",
]

LE, EQ, GE = "<=", "=", ">="


def row_id(family: str, bindings: Iterable[tuple[str, int]]) -> str:
    return family + "".join(f"_{name}{value}" for name, value in bindings)


def visit_name(cohort: int, member: int, day: int, slot: int) -> str:
    return f"X_{cohort + 1}_{member}_{day}_{slot}"


def emergency_name(day: int, slot: int) -> str:
    return f"E_{day}_{slot}"


def marker_name(cohort: int, member: int, day: int) -> str:
    return f"W_{cohort + 1}_{member}_{day}"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "visit", "emergency" or "day_marker"
    cohort: int | None = None  # 0-based position; names use 1-based
    member: int | None = None
    day: int | None = None
    slot: int | None = None


@dataclass(frozen=True)
class ConstraintRow:
    id: str
    terms: tuple[tuple[str, int], ...]
    sense: str
    rhs: int

    def satisfied(self, ones: set[str] | frozenset[str]) -> bool:
        lhs = sum(coef for name, coef in self.terms if name in ones)
        if self.sense == LE:
            return lhs <= self.rhs
        if self.sense == GE:
            return lhs >= self.rhs
        return lhs == self.rhs


@dataclass(frozen=True)
class IlpModel:
    variables: tuple[Variable, ...]
    constraints: tuple[ConstraintRow, ...]
    objective: tuple[tuple[str, int], ...]  # minimised
    instance: ProblemInstance = field(repr=False, compare=False)

    @cached_property
    def by_name(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    def objective_value(self, ones: set[str] | frozenset[str]) -> int:
        return sum(coef for name, coef in self.objective if name in ones)


def build_model(instance: ProblemInstance) -> IlpModel:
    D, P, L = instance.days, instance.slots_per_day, instance.emergency_quota
    F = instance.availability
    variables: list[Variable] = []
    rows: list[ConstraintRow] = []

    for s, cohort in enumerate(instance.cohorts):
        for i in range(1, cohort.population + 1):
            for j in range(1, D + 1):
                for k in range(1, P + 1):
                    variables.append(Variable(visit_name(s, i, j, k), "visit", s, i, j, k))
    for j in range(1, D + 1):
        for k in range(1, P + 1):
            variables.append(Variable(emergency_name(j, k), "emergency", day=j, slot=k))
    for s, cohort in enumerate(instance.cohorts):
        for i in range(1, cohort.population + 1):
            for j in range(1, D + 1):
                variables.append(Variable(marker_name(s, i, j), "day_marker", s, i, j))

    students = instance.students

    for j in range(1, D + 1):
        terms = tuple((emergency_name(j, k), 1) for k in range(1, P + 1))
        rows.append(ConstraintRow(row_id("eq1", [("d", j)]), terms, EQ, L))

    for j in range(1, D + 1):
        for k in range(1, P + 1):
            terms = [(visit_name(st.cohort_index, st.member_index, j, k), 1) for st in students]
            terms.append((emergency_name(j, k), 1))
            rows.append(ConstraintRow(row_id("eq2", [("d", j), ("k", k)]), tuple(terms), LE, F[j - 1][k - 1]))

    for s, cohort in enumerate(instance.cohorts):
        R, T, B = cohort.slot_length, cohort.visits, cohort.gap
        for i in range(1, cohort.population + 1):
            ids = [("c", s + 1), ("i", i)]
            for j in range(1, D + 1):
                terms = [(visit_name(s, i, j, k), 1) for k in range(1, P + 1)]
                terms.append((marker_name(s, i, j), -R))
                rows.append(ConstraintRow(row_id("eq3", ids + [("d", j)]), tuple(terms), EQ, 0))
            for j in range(1, D + 1):
                for k in range(1, P + 1):
                    for h in range(k + R, P + 1):
                        terms = ((visit_name(s, i, j, k), 1), (visit_name(s, i, j, h), 1))
                        rows.append(ConstraintRow(
                            row_id("eq4", ids + [("d", j), ("k", k), ("h", h)]), terms, LE, 1
                        ))
            terms = tuple(
                (visit_name(s, i, j, k), 1) for j in range(1, D + 1) for k in range(1, P + 1)
            )
            rows.append(ConstraintRow(row_id("eq9", ids), terms, EQ, R * T))
            for t in range(1, D - B + 1):
                terms = tuple(
                    (visit_name(s, i, j, k), 1) for j in range(t, t + B + 1) for k in range(1, P + 1)
                )
                rows.append(ConstraintRow(row_id("eq12", ids + [("t", t)]), terms, LE, R))

    objective = []
    for v in variables:
        if v.kind == "visit":
            objective.append((v.name, 2 * v.slot))
        elif v.kind == "emergency":
            objective.append((v.name, v.slot))

    return IlpModel(tuple(variables), tuple(rows), tuple(objective), instance)


def model_stats(model: IlpModel) -> tuple[int, int, int]:
    """(variable count, constraint count, nonzero count)."""
    return (
        len(model.variables),
        len(model.constraints),
        sum(len(row.terms) for row in model.constraints),
    )


def _lp_terms(terms: Iterable[tuple[str, int]], with_unit: bool) -> list[str]:
    out = []
    for n, (name, coef) in enumerate(terms):
        mag = abs(coef)
        body = f"{mag} {name}" if (with_unit or mag != 1) else name
        if n == 0:
            out.append(body if coef >= 0 else f"- {body}")
        else:
            out.append(f"{'+' if coef >= 0 else '-'} {body}")
    return out


def _wrap(head: str, pieces: list[str], tail: str = "", width: int = 250) -> list[str]:
    lines, current = [], head
    for piece in pieces:
        if len(current) + len(piece) + 1 > width and current.strip():
            lines.append(current)
            current = " "
        current = f"{current} {piece}" if current.strip() else f"{current}{piece}"
    if tail:
        current = f"{current} {tail}"
    lines.append(current)
    return lines


def export_lp(model: IlpModel) -> str:
    """Render the model in LP file format (Minimize / Subject To / Binary)."""
    lines = ["\\ periodic meeting schedule", "Minimize"]
    # every model has emergency variables, so the objective is never empty
    objective = [(name, coef) for name, coef in model.objective if coef != 0]
    lines += _wrap(" ", _lp_terms(objective, with_unit=True))
    lines.append("Subject To")
    for row in model.constraints:
        lines += _wrap(f" {row.id}:", _lp_terms(row.terms, with_unit=False), f"{row.sense} {row.rhs}")
    lines.append("Binary")
    lines += [f" {v.name}" for v in model.variables]
    lines.append("End")
    return "\n".join(lines) + "\n"


def encode_schedule(model: IlpModel, schedule: Schedule) -> frozenset[str]:
    """Names of the variables set to one by ``schedule``."""
    ones = set()
    for p in schedule.placements:
        s, i = p.student.cohort_index, p.student.member_index
        ones.add(marker_name(s, i, p.day))
        for k in p.slots:
            ones.add(visit_name(s, i, p.day, k))
    for day, slots in schedule.emergency.items():
        for k in slots:
            ones.add(emergency_name(day, k))
    unknown = ones - model.by_name.keys()
    if unknown:
        raise ValueError(f"schedule references variables outside the model: {sorted(unknown)[:3]}")
    return frozenset(ones)


def decode_point(model: IlpModel, ones: Iterable[str]) -> Schedule:
    """Turn a 0-1 point into a schedule, one placement per run of visit slots."""
    covered: dict[tuple[int, int, int], list[int]] = {}
    emergency: dict[int, set[int]] = {}
    for name in ones:
        v = model.by_name[name]
        if v.kind == "visit":
            covered.setdefault((v.cohort, v.member, v.day), []).append(v.slot)
        elif v.kind == "emergency":
            emergency.setdefault(v.day, set()).add(v.slot)
    placements = []
    for (s, i, j), slots in covered.items():
        slots.sort()
        start = prev = slots[0]
        for k in slots[1:] + [None]:
            if k is not None and k == prev + 1:
                prev = k
                continue
            placements.append(Placement(StudentId(s, i), j, start, prev - start + 1))
            if k is not None:
                start = prev = k
    return Schedule(tuple(placements), {d: frozenset(v) for d, v in emergency.items()})


def violated_rows(model: IlpModel, ones: set[str] | frozenset[str]) -> list[str]:
    return [row.id for row in model.constraints if not row.satisfied(ones)]

