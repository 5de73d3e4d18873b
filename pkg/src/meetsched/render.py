"""Plain-text timetables: a day-by-slot grid and a per-student itinerary."""

from __future__ import annotations

from dataclasses import dataclass

from .instance import ProblemInstance, StudentId
from .schedule import Schedule

__all__ = ["RenderOptions", "WEEKDAYS", "cell_labels", "day_name", "render", "week_days", "week_of_day"]

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday")
UNAVAILABLE = "*"
EMERGENCY = "E"


@dataclass(frozen=True)
class RenderOptions:
    scope: str = "full"  # "full", "week" or "student"
    week: int | None = None  # 1-based, scope == "week"
    student: StudentId | None = None  # scope == "student"
    style: str = "grid"  # "grid" or "itinerary"

    def check(self, instance: ProblemInstance) -> None:
        if self.style not in ("grid", "itinerary"):
            raise ValueError(f"unknown style {self.style!r}")
        if self.scope == "week":
            weeks = instance.days // _week_length(instance)
            if self.week is None or not 1 <= self.week <= weeks:
                raise ValueError(f"week must be in 1..{weeks}, got {self.week!r}")
        elif self.scope == "student":
            st = self.student
            if (st is None or not 0 <= st.cohort_index < len(instance.cohorts)
                    or not 1 <= st.member_index <= instance.cohorts[st.cohort_index].population):
                raise ValueError(f"no such student {st!r}")
        elif self.scope != "full":
            raise ValueError(f"unknown scope {self.scope!r}")


def _week_length(instance: ProblemInstance) -> int:
    # instances given as a plain matrix form a single week
    return instance.week_length or instance.days


def week_of_day(instance: ProblemInstance, day: int) -> tuple[int, int]:
    """(week, day within week), both 1-based, under the tiling convention."""
    w = _week_length(instance)
    return (day - 1) // w + 1, (day - 1) % w + 1


def week_days(instance: ProblemInstance, week: int) -> range:
    w = _week_length(instance)
    return range((week - 1) * w + 1, week * w + 1)


def day_name(day: int) -> str:
    """Workday name; day indices cycle through the five workdays."""
    return WEEKDAYS[(day - 1) % len(WEEKDAYS)]


def cell_labels(instance: ProblemInstance) -> dict[StudentId, str]:
    """``U1``-style labels; cohorts sharing an initial fall back to ``label#member``."""
    initials = [c.initial for c in instance.cohorts]
    out = {}
    for st in instance.students:
        cohort = instance.cohort_of(st)
        if initials.count(cohort.initial) == 1:
            out[st] = f"{cohort.initial}{st.member_index}"
        else:
            out[st] = f"{cohort.label}#{st.member_index}"
    return out


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _grid(instance: ProblemInstance, schedule: Schedule, days: list[int], student: StudentId | None) -> str:
    P = instance.slots_per_day
    names = cell_labels(instance)
    cells: dict[tuple[int, int], list[str]] = {}
    for p in sorted(schedule.placements):
        if student is not None and p.student != student:
            continue
        for k in p.slots:
            cells.setdefault((p.day, k), []).append(names.get(p.student, "?"))
    if student is None:
        for d, slots in schedule.emergency.items():
            for k in slots:
                cells.setdefault((d, k), []).append(EMERGENCY)
    rows = [["Day", "Weekday"] + [str(k) for k in range(1, P + 1)]]
    for j in days:
        row = [str(j), day_name(j)]
        for k in range(1, P + 1):
            claims = cells.get((j, k))
            if claims:
                row.append("/".join(claims))
            elif not instance.available(j, k):
                row.append(UNAVAILABLE)
            else:
                row.append("")
        rows.append(row)
    return _table(rows)


def _itinerary(instance: ProblemInstance, schedule: Schedule, days: set[int], students: list[StudentId]) -> str:
    names = cell_labels(instance)
    blocks = []
    for st in students:
        visits = [p for p in schedule.for_student(st) if p.day in days]
        cohort = instance.cohort_of(st)
        head = f"{names[st]} ({cohort.label} {st.member_index}, {len(visits)} visits)"
        if not visits:
            blocks.append(head + "\n")
            continue
        rows = [["Week"], ["Day"], ["Slot"]]
        for p in visits:
            week, dow = week_of_day(instance, p.day)
            rows[0].append(str(week))
            rows[1].append(str(dow))
            rows[2].append(",".join(str(k) for k in p.slots))
        blocks.append(head + "\n" + _table(rows))
    return "\n".join(blocks)


def render(instance: ProblemInstance, schedule: Schedule, options: RenderOptions | None = None) -> str:
    options = options or RenderOptions()
    options.check(instance)
    if options.scope == "week":
        days = list(week_days(instance, options.week))
    else:
        days = list(range(1, instance.days + 1))
    if options.style == "itinerary":
        students = [options.student] if options.scope == "student" else instance.students
        return _itinerary(instance, schedule, set(days), students)
    if options.scope == "student":
        days = sorted({p.day for p in schedule.for_student(options.student)})
        return _grid(instance, schedule, days, options.student)
    return _grid(instance, schedule, days, None)
