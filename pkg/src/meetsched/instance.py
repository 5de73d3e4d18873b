"""Instance data model: cohorts, availability, config parsing and pre-checks."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

__all__ = [
    "CohortSpec",
    "Diagnostic",
    "InstanceError",
    "ProblemInstance",
    "StudentId",
    "load_instance",
    "parse_instance",
    "precheck",
    "serialize_instance",
    "tile_availability",
]


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data.

    ``field`` names the offending config field when one can be identified.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class CohortSpec:
    label: str
    population: int
    visits: int
    slot_length: int
    gap: int

    def __post_init__(self) -> None:
        if not isinstance(self.label, str) or not self.label:
            raise InstanceError("label must be a non-empty string", "cohorts.label")
        for name in ("population", "visits", "gap"):
            value = getattr(self, name)
            if not _is_int(value) or value < 0:
                raise InstanceError(f"must be a non-negative integer, got {value!r}", f"cohorts.{name}")
        if not _is_int(self.slot_length) or self.slot_length < 1:
            raise InstanceError(f"must be a positive integer, got {self.slot_length!r}", "cohorts.slot_length")

    @property
    def initial(self) -> str:
        return self.label[0].upper()


@dataclass(frozen=True, order=True)
class StudentId:
    """A student keyed by (cohort position, 1-based member index)."""

    cohort_index: int
    member_index: int


@dataclass(frozen=True)
class ProblemInstance:
    days: int
    slots_per_day: int
    emergency_quota: int
    availability: tuple[tuple[int, ...], ...]
    cohorts: tuple[CohortSpec, ...]
    # Row count of the weekly pattern the availability was tiled from, if any.
    week_length: int | None = None

    def __post_init__(self) -> None:
        for name in ("days", "slots_per_day"):
            value = getattr(self, name)
            if not _is_int(value) or value < 1:
                raise InstanceError(f"must be a positive integer, got {value!r}", name)
        if not _is_int(self.emergency_quota) or self.emergency_quota < 0:
            raise InstanceError(f"must be a non-negative integer, got {self.emergency_quota!r}", "emergency_quota")
        rows = tuple(tuple(row) for row in self.availability)
        object.__setattr__(self, "availability", rows)
        object.__setattr__(self, "cohorts", tuple(self.cohorts))
        _check_matrix(rows, "availability")
        if len(rows) != self.days:
            raise InstanceError(f"has {len(rows)} rows but days={self.days}", "availability")
        for j, row in enumerate(rows, start=1):
            if len(row) != self.slots_per_day:
                raise InstanceError(
                    f"row {j} has {len(row)} entries but slots_per_day={self.slots_per_day}", "availability"
                )
        labels = set()
        for cohort in self.cohorts:
            if not isinstance(cohort, CohortSpec):
                raise InstanceError("entries must be CohortSpec", "cohorts")
            if cohort.slot_length > self.slots_per_day:
                raise InstanceError(
                    f"cohort {cohort.label!r} slot_length {cohort.slot_length} exceeds slots_per_day",
                    "cohorts.slot_length",
                )
            if cohort.label in labels:
                raise InstanceError(f"duplicate cohort label {cohort.label!r}", "cohorts.label")
            labels.add(cohort.label)
        if self.week_length is not None and (
            not _is_int(self.week_length) or self.week_length < 1 or self.days % self.week_length
        ):
            raise InstanceError(f"week_length {self.week_length!r} does not divide days", "week_length")

    @property
    def students(self) -> list[StudentId]:
        return [
            StudentId(s, i)
            for s, cohort in enumerate(self.cohorts)
            for i in range(1, cohort.population + 1)
        ]

    def cohort_of(self, student: StudentId) -> CohortSpec:
        return self.cohorts[student.cohort_index]

    def cohort_index(self, label: str) -> int:
        for s, cohort in enumerate(self.cohorts):
            if cohort.label == label:
                return s
        raise KeyError(label)

    def available(self, day: int, slot: int) -> bool:
        """1-based lookup into the availability matrix."""
        return self.availability[day - 1][slot - 1] == 1

    def effective_gap(self, cohort: CohortSpec) -> int:
        """Day gap actually enforced by the window rows.

        Windows ``[t, t + gap]`` only exist for ``t <= days - gap``; when the
        horizon is not longer than the gap there are none and the only
        restriction left is one visit per day.
        """
        return cohort.gap if self.days > cohort.gap else 0

    @property
    def total_visits(self) -> int:
        return sum(c.population * c.visits for c in self.cohorts)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "fatal" or "warning"
    code: str
    message: str


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_matrix(rows: Sequence[Sequence[Any]], field: str) -> None:
    for j, row in enumerate(rows, start=1):
        for k, value in enumerate(row, start=1):
            if not _is_int(value) or value not in (0, 1):
                raise InstanceError(f"entry ({j}, {k}) is {value!r}, expected 0 or 1", field)


def tile_availability(weekly_pattern: Sequence[Sequence[int]], weeks: int) -> tuple[tuple[int, ...], ...]:
    """Repeat a W x P pattern ``weeks`` times along the day axis."""
    if not _is_int(weeks) or weeks < 1:
        raise InstanceError(f"must be a positive integer, got {weeks!r}", "weeks")
    rows = tuple(tuple(row) for row in weekly_pattern)
    if not rows:
        raise InstanceError("must contain at least one row", "weekly_pattern")
    _check_matrix(rows, "weekly_pattern")
    if len({len(row) for row in rows}) != 1:
        raise InstanceError("rows have differing lengths", "weekly_pattern")
    return rows * weeks


_TOP_FIELDS = {"days", "slots_per_day", "emergency_quota", "availability", "weekly_pattern", "weeks", "cohorts"}
_COHORT_FIELDS = ("label", "population", "visits", "slot_length", "gap")


def parse_instance(config_text: str) -> ProblemInstance:
    """Parse a JSON instance config into a validated ProblemInstance."""
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InstanceError("top level must be a JSON object")
    unknown = sorted(set(doc) - _TOP_FIELDS)
    if unknown:
        raise InstanceError(f"unknown field(s) {', '.join(unknown)}", unknown[0])
    for name in ("slots_per_day", "emergency_quota", "cohorts"):
        if name not in doc:
            raise InstanceError("missing required field", name)

    has_matrix = "availability" in doc
    has_pattern = "weekly_pattern" in doc or "weeks" in doc
    if has_matrix == has_pattern:
        raise InstanceError("give exactly one of availability or weekly_pattern+weeks", "availability")

    week_length = None
    if has_matrix:
        availability = _rows(doc["availability"], "availability")
        if "days" not in doc:
            raise InstanceError("missing required field", "days")
        days = doc["days"]
    else:
        if "weekly_pattern" not in doc or "weeks" not in doc:
            missing = "weeks" if "weekly_pattern" in doc else "weekly_pattern"
            raise InstanceError("missing required field", missing)
        pattern = _rows(doc["weekly_pattern"], "weekly_pattern")
        for j, row in enumerate(pattern, start=1):
            if len(row) != doc["slots_per_day"]:
                raise InstanceError(
                    f"row {j} has {len(row)} entries but slots_per_day={doc['slots_per_day']}", "weekly_pattern"
                )
        availability = tile_availability(pattern, doc["weeks"])
        week_length = len(pattern)
        days = doc.get("days", len(availability))
        if days != len(availability):
            raise InstanceError(f"days={days} but weekly_pattern x weeks gives {len(availability)}", "days")

    if not isinstance(doc["cohorts"], list):
        raise InstanceError("must be an array", "cohorts")
    cohorts = []
    for n, entry in enumerate(doc["cohorts"], start=1):
        if not isinstance(entry, dict):
            raise InstanceError(f"entry {n} must be an object", "cohorts")
        extra = sorted(set(entry) - set(_COHORT_FIELDS))
        if extra:
            raise InstanceError(f"entry {n} has unknown field(s) {', '.join(extra)}", f"cohorts.{extra[0]}")
        for name in _COHORT_FIELDS:
            if name not in entry:
                raise InstanceError(f"entry {n} is missing a field", f"cohorts.{name}")
        cohorts.append(CohortSpec(**{name: entry[name] for name in _COHORT_FIELDS}))

    return ProblemInstance(
        days=days,
        slots_per_day=doc["slots_per_day"],
        emergency_quota=doc["emergency_quota"],
        availability=availability,
        cohorts=tuple(cohorts),
        week_length=week_length,
    )


def _rows(value: Any, field: str) -> tuple[tuple[Any, ...], ...]:
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise InstanceError("must be an array of arrays", field)
    rows = tuple(tuple(row) for row in value)
    _check_matrix(rows, field)
    return rows


def serialize_instance(instance: ProblemInstance) -> str:
    doc: dict[str, Any] = {
        "days": instance.days,
        "slots_per_day": instance.slots_per_day,
        "emergency_quota": instance.emergency_quota,
    }
    if instance.week_length is not None:
        doc["weekly_pattern"] = [list(row) for row in instance.availability[: instance.week_length]]
        doc["weeks"] = instance.days // instance.week_length
    else:
        doc["availability"] = [list(row) for row in instance.availability]
    doc["cohorts"] = [{name: getattr(c, name) for name in _COHORT_FIELDS} for c in instance.cohorts]
    return json.dumps(doc, indent=2)


def load_instance(path: str | Path) -> ProblemInstance:
    return parse_instance(Path(path).read_text())


def _longest_run(row: Sequence[int]) -> int:
    best = run = 0
    for value in row:
        run = run + 1 if value else 0
        best = max(best, run)
    return best


def precheck(instance: ProblemInstance) -> list[Diagnostic]:
    """Screen an instance for necessary conditions of feasibility.

    An empty result only means nothing obviously infeasible was found.
    """
    out: list[Diagnostic] = []
    L = instance.emergency_quota
    for j, row in enumerate(instance.availability, start=1):
        if sum(row) < L:
            out.append(Diagnostic(
                "fatal", "emergency-capacity",
                f"day {j} has {sum(row)} available slots but {L} must be reserved for emergencies",
            ))

    demand = sum(c.population * c.visits * c.slot_length for c in instance.cohorts) + instance.days * L
    supply = sum(map(sum, instance.availability))
    if demand > supply:
        out.append(Diagnostic(
            "fatal", "total-capacity",
            f"{demand} slots demanded (visits plus emergencies) but only {supply} available",
        ))

    longest = max(_longest_run(row) for row in instance.availability)
    for cohort in instance.cohorts:
        if cohort.population == 0 or cohort.visits == 0:
            out.append(Diagnostic("warning", "empty-cohort", f"cohort {cohort.label!r} requires no visits"))
            continue
        if instance.days > cohort.gap:
            needed = (cohort.visits - 1) * (cohort.gap + 1) + 1
        else:
            # no gap windows fit in the horizon; only one visit per day remains
            needed = cohort.visits
        if needed > instance.days:
            out.append(Diagnostic(
                "fatal", "horizon-too-short",
                f"cohort {cohort.label!r} needs {needed} days for {cohort.visits} visits "
                f"with gap {cohort.gap}, horizon has {instance.days}",
            ))
        if cohort.slot_length > longest:
            out.append(Diagnostic(
                "fatal", "slot-length",
                f"cohort {cohort.label!r} needs {cohort.slot_length} consecutive slots, "
                f"longest available run is {longest}",
            ))
    return out
