"""Placements, schedules and the schedule JSON format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .instance import ProblemInstance, StudentId

__all__ = ["Placement", "Schedule", "ScheduleFormatError", "dump_schedule", "load_schedule", "parse_schedule"]


class ScheduleFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Placement:
    """One meeting: ``length`` consecutive slots from ``start_slot`` on ``day``."""

    student: StudentId
    day: int
    start_slot: int
    length: int

    @property
    def slots(self) -> range:
        return range(self.start_slot, self.start_slot + self.length)


@dataclass(frozen=True)
class Schedule:
    placements: tuple[Placement, ...] = ()
    emergency: Mapping[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "placements", tuple(self.placements))
        object.__setattr__(
            self, "emergency", {int(d): frozenset(s) for d, s in self.emergency.items() if s}
        )

    def canonical(self) -> tuple:
        """Hashable, order-insensitive form used for set comparisons."""
        return (
            tuple(sorted(self.placements)),
            tuple(sorted((d, tuple(sorted(s))) for d, s in self.emergency.items() if s)),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Schedule):
            return NotImplemented
        return self.canonical() == other.canonical()

    def __hash__(self) -> int:
        return hash(self.canonical())

    def for_student(self, student: StudentId) -> list[Placement]:
        return sorted(p for p in self.placements if p.student == student)

    def restrict_days(self, days: Iterable[int]) -> Schedule:
        keep = set(days)
        return Schedule(
            tuple(p for p in self.placements if p.day in keep),
            {d: s for d, s in self.emergency.items() if d in keep},
        )


def schedule_to_dict(instance: ProblemInstance, schedule: Schedule) -> dict[str, Any]:
    placements = [
        {
            "cohort": instance.cohorts[p.student.cohort_index].label,
            "member": p.student.member_index,
            "day": p.day,
            "start_slot": p.start_slot,
            "length": p.length,
        }
        for p in sorted(schedule.placements, key=lambda p: (p.day, p.start_slot, p.student))
    ]
    emergency = {str(d): sorted(schedule.emergency[d]) for d in sorted(schedule.emergency)}
    return {"placements": placements, "emergency": emergency}


def dump_schedule(instance: ProblemInstance, schedule: Schedule) -> str:
    return json.dumps(schedule_to_dict(instance, schedule), indent=1)


def parse_schedule(instance: ProblemInstance, text: str) -> Schedule:
    """Parse schedule JSON; cohort labels are resolved against ``instance``.

    Range checks are left to the validator so that out-of-range entries show
    up as structural violations instead of parse failures.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScheduleFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("placements"), list):
        raise ScheduleFormatError("expected an object with a 'placements' array")
    unknown = set(doc) - {"placements", "emergency", "note"}
    if unknown:
        raise ScheduleFormatError(f"unknown field(s): {', '.join(sorted(unknown))}")
    placements = []
    for n, item in enumerate(doc["placements"], start=1):
        try:
            cohort = instance.cohort_index(item["cohort"])
            placements.append(Placement(
                StudentId(cohort, int(item["member"])),
                int(item["day"]),
                int(item["start_slot"]),
                int(item["length"]),
            ))
        except KeyError as exc:
            raise ScheduleFormatError(f"placement {n}: missing or unknown {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ScheduleFormatError(f"placement {n}: {exc}") from exc
    emergency: dict[int, frozenset[int]] = {}
    raw = doc.get("emergency", {})
    if not isinstance(raw, dict):
        raise ScheduleFormatError("'emergency' must map day numbers to slot lists")
    for day, slots in raw.items():
        try:
            emergency[int(day)] = frozenset(int(k) for k in slots)
        except (TypeError, ValueError) as exc:
            raise ScheduleFormatError(f"emergency day {day!r}: {exc}") from exc
    return Schedule(tuple(placements), emergency)


def load_schedule(instance: ProblemInstance, path: str | Path) -> Schedule:
    return parse_schedule(instance, Path(path).read_text())
