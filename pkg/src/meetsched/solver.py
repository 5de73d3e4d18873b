"""Exact branch-and-bound over meeting placements.

The search sweeps the horizon day by day and decides which students meet on
each day.  Two facts make this exact while keeping the tree small:

* Once the multiset of visit lengths on a day is known, the cheapest layout
  packs every availability run from its first slot and puts the emergency
  slots on the lowest remaining free slots.  Who sits where inside a run
  does not change the cost, so a day is fully described by its visitors.
* Students of one cohort with the same number of outstanding visits who are
  both allowed to meet today are interchangeable; only one representative
  per such class is ever branched on.

The bound spreads the outstanding slot-units over the remaining days using
each day's convex marginal cost (cost of one more occupied slot, emergency
slots included), which is exact for the relaxation without contiguity,
student or gap restrictions.  When the instance is small enough, a second
bound is tabulated up front: the exact cost of spreading the outstanding
visits, counted per slot length, over the remaining days with every day
packed exactly.  It keeps contiguity and drops only the per-student gap and
visit-count rules.  A node uses the larger of the two.

Search runs as an incumbent dive followed by iterative deepening on the
objective: each pass explores only nodes whose bound is within the current
cutoff, so the first leaf of a pass is optimal.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .instance import ProblemInstance, StudentId
from .schedule import Placement, Schedule

__all__ = [
    "OPTIMAL",
    "FEASIBLE",
    "INFEASIBLE",
    "TIMEOUT_NO_SOLUTION",
    "Partial",
    "PropagationResult",
    "SolveParams",
    "SolveResult",
    "SolveStats",
    "complete_emergency",
    "lower_bound",
    "propagate",
    "solve",
]

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIMEOUT_NO_SOLUTION = "timeout_no_solution"

_INF = math.inf
# the count table is skipped above this many array cell updates or cells
_TABLE_WORK = 50_000_000
_TABLE_CELLS = 4_000_000


@dataclass(frozen=True)
class SolveParams:
    time_limit: float = 0.0  # seconds, 0 = unlimited
    thread_count: int = 1
    deterministic: bool = False
    log_interval: float | None = 5.0  # seconds between progress lines; 0 = every node, None = off

    def __post_init__(self) -> None:
        if not isinstance(self.thread_count, int) or self.thread_count < 1:
            raise ValueError(f"thread_count must be >= 1, got {self.thread_count!r}")
        if self.time_limit < 0:
            raise ValueError(f"time_limit must be >= 0, got {self.time_limit!r}")
        if self.log_interval is not None and self.log_interval < 0:
            raise ValueError(f"log_interval must be >= 0 or None, got {self.log_interval!r}")


@dataclass
class SolveStats:
    nodes: int = 0
    prunings: int = 0
    wall_time: float = 0.0
    passes: int = 0


@dataclass(frozen=True)
class SolveResult:
    status: str
    objective: int | None
    lower_bound: int
    schedule: Schedule | None
    stats: SolveStats = field(default_factory=SolveStats)


# --------------------------------------------------------------------------
# generic propagation and bounding over arbitrary partial assignments

@dataclass(frozen=True)
class Partial:
    """Fixed placements and fixed emergency slots; everything else is open."""

    placements: tuple[Placement, ...] = ()
    emergency: Mapping[int, frozenset[int]] = field(default_factory=dict)


@dataclass(frozen=True)
class PropagationResult:
    consistent: bool
    candidates: Mapping[StudentId, tuple[tuple[int, int], ...]] | None = None
    remaining: Mapping[StudentId, int] | None = None
    reason: str = ""


def _occupancy(instance: ProblemInstance, partial: Partial) -> tuple[set[tuple[int, int]] | None, str]:
    busy: set[tuple[int, int]] = set()
    claims = [(p.day, k) for p in partial.placements for k in p.slots]
    claims += [(d, k) for d, slots in partial.emergency.items() for k in slots]
    for j, k in claims:
        if not (1 <= j <= instance.days and 1 <= k <= instance.slots_per_day) or not instance.available(j, k):
            return None, f"day {j} slot {k} is not available"
        if (j, k) in busy:
            return None, f"day {j} slot {k} is claimed twice"
        busy.add((j, k))
    return busy, ""


def propagate(instance: ProblemInstance, partial: Partial) -> PropagationResult:
    """Candidate (day, start) placements per student that survive the fixings.

    Removes candidates that overlap fixed slots or unavailable slots, that
    conflict with a fixed visit of the same student through the gap windows,
    or that would leave a day without room for its emergency quota.  Sound
    but not complete.
    """
    D, P, L = instance.days, instance.slots_per_day, instance.emergency_quota
    busy, why = _occupancy(instance, partial)
    if busy is None:
        return PropagationResult(False, reason=why)

    free = {j: sum(1 for k in range(1, P + 1) if instance.available(j, k) and (j, k) not in busy)
            for j in range(1, D + 1)}
    need_e = {}
    for j in range(1, D + 1):
        fixed_e = len(partial.emergency.get(j, ()))
        if fixed_e > L:
            return PropagationResult(False, reason=f"day {j} has {fixed_e} emergency slots, quota is {L}")
        need_e[j] = L - fixed_e
        if free[j] < need_e[j]:
            return PropagationResult(False, reason=f"day {j} cannot host {L} emergency slots")

    fixed_days: dict[StudentId, list[int]] = {}
    for p in partial.placements:
        cohort = instance.cohort_of(p.student)
        if p.length != cohort.slot_length:
            return PropagationResult(False, reason=f"placement {p} has the wrong length")
        fixed_days.setdefault(p.student, []).append(p.day)

    candidates: dict[StudentId, tuple[tuple[int, int], ...]] = {}
    remaining: dict[StudentId, int] = {}
    for student in instance.students:
        cohort = instance.cohort_of(student)
        R, gap = cohort.slot_length, instance.effective_gap(cohort)
        days = sorted(fixed_days.get(student, ()))
        if any(b - a <= gap for a, b in zip(days, days[1:])):
            return PropagationResult(False, reason=f"fixed visits of {student} violate the gap")
        r = cohort.visits - len(days)
        if r < 0:
            return PropagationResult(False, reason=f"{student} has more fixed visits than required")
        remaining[student] = r
        found = []
        if r:
            for j in range(1, D + 1):
                if any(abs(j - d) <= gap for d in days) or free[j] - R < need_e[j]:
                    continue
                for k in range(1, P - R + 2):
                    if all(instance.available(j, h) and (j, h) not in busy for h in range(k, k + R)):
                        found.append((j, k))
            # most visits placeable on pairwise-spaced candidate days, taken greedily
            fit, last = 0, -_INF
            for j in sorted({j for j, _ in found}):
                if j - last > gap:
                    fit, last = fit + 1, j
            if fit < r:
                return PropagationResult(
                    False, reason=f"{student} needs {r} more visits, candidates allow {fit}"
                )
        candidates[student] = tuple(found)
    return PropagationResult(True, candidates, remaining)


def _day_marginals(slots: Sequence[int], quota: int) -> tuple[int, list[int]]:
    """Cost of the emergency quota alone and the increasing cost of each
    further visit slot when the day's free slots are filled from the left."""
    base = sum(slots[:quota])
    return base, [slots[n] + slots[n + quota] for n in range(len(slots) - quota)]


def lower_bound(instance: ProblemInstance, partial: Partial) -> int:
    """Admissible bound on every completion of ``partial``.

    Fixed items contribute their exact cost; the outstanding visit slots and
    emergency quotas are relaxed to the cheapest free slots per day.  For a
    partial with no completion any value is admissible; the relaxed figure is
    returned regardless.
    """
    D, P, L = instance.days, instance.slots_per_day, instance.emergency_quota
    fixed = 2 * sum(k for p in partial.placements for k in p.slots)
    fixed += sum(sum(slots) for slots in partial.emergency.values())

    prop = propagate(instance, partial)
    busy, _ = _occupancy(instance, partial)
    busy = busy or set()
    if prop.consistent:
        units = sum(instance.cohort_of(st).slot_length * r for st, r in prop.remaining.items())
        day_room = {j: 0 for j in range(1, D + 1)}
        for st, cands in prop.candidates.items():
            R = instance.cohort_of(st).slot_length
            for j in {j for j, _ in cands}:
                day_room[j] += R
    else:
        units = sum(
            c.population * c.visits * c.slot_length for c in instance.cohorts
        ) - sum(p.length for p in partial.placements)
        day_room = {j: P for j in range(1, D + 1)}

    total = fixed
    marginals: list[int] = []
    for j in range(1, D + 1):
        slots = [k for k in range(1, P + 1) if instance.available(j, k) and (j, k) not in busy]
        quota = max(0, L - len(partial.emergency.get(j, ())))
        if len(slots) < quota:
            continue
        base, marg = _day_marginals(slots, quota)
        total += base
        marginals.extend(marg[: day_room[j]])
    marginals.sort()
    total += sum(marginals[: max(units, 0)])
    return total


def complete_emergency(instance: ProblemInstance, day: int, occupied: set[int] | frozenset[int]) -> frozenset[int] | None:
    """The quota of lowest-indexed free available slots on ``day``, or None."""
    free = [k for k in range(1, instance.slots_per_day + 1)
            if instance.available(day, k) and k not in occupied]
    if len(free) < instance.emergency_quota:
        return None
    return frozenset(free[: instance.emergency_quota])


# --------------------------------------------------------------------------
# day packing

def _runs(row: Sequence[int]) -> tuple[tuple[int, int], ...]:
    runs, start = [], None
    for k, value in enumerate(list(row) + [0], start=1):
        if value and start is None:
            start = k
        elif not value and start is not None:
            runs.append((start, k - start))
            start = None
    return tuple(runs)


def _compositions(count: int, caps: Sequence[int], size: int) -> Iterator[tuple[int, ...]]:
    """Ways to split ``count`` items of ``size`` over runs with spare ``caps``."""
    if not caps:
        if count == 0:
            yield ()
        return
    for here in range(min(count, caps[0] // size), -1, -1):
        for rest in _compositions(count - here, caps[1:], size):
            yield (here,) + rest


def _pack_day(row: Sequence[int], quota: int, lengths: Sequence[int], counts: Sequence[int]):
    """Cheapest layout of the given visit lengths plus the emergency quota.

    Returns ``(cost, layout)`` with ``layout[r][t]`` the number of type-``t``
    visits packed into run ``r``, or None when nothing fits.
    """
    runs = _runs(row)
    states: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = {
        tuple(0 for _ in runs): tuple(() for _ in runs)
    }
    for size, count in zip(lengths, counts):
        nxt: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = {}
        for used, layout in states.items():
            caps = [length - u for (_, length), u in zip(runs, used)]
            for split in _compositions(count, caps, size):
                key = tuple(u + n * size for u, n in zip(used, split))
                if key not in nxt:
                    nxt[key] = tuple(lay + (n,) for lay, n in zip(layout, split))
        states = nxt
        if not states:
            return None
    best = None
    for used, layout in states.items():
        visit = 0
        free: list[int] = []
        for (start, length), u in zip(runs, used):
            visit += sum(range(start, start + u))
            free.extend(range(start + u, start + length))
        if len(free) < quota:
            continue
        free.sort()
        cost = 2 * visit + sum(free[:quota])
        if best is None or (cost, used) < (best[0], best[2]):
            best = (cost, layout, used)
    return None if best is None else (best[0], best[1])


# --------------------------------------------------------------------------
# search

class _Timeout(Exception):
    pass


class _Found(Exception):
    pass


class _Stopped(Exception):
    pass


class _DiveLimit(Exception):
    pass


class _Static:
    """Precomputed, read-only data shared by all workers."""

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.D = instance.days
        self.L = instance.emergency_quota
        self.lengths = tuple(sorted({c.slot_length for c in instance.cohorts
                                     if c.population and c.visits}))
        self.cohorts = [s for s, c in enumerate(instance.cohorts) if c.population and c.visits]
        self.length_of = {s: self.lengths.index(instance.cohorts[s].slot_length) for s in self.cohorts}
        self.students = [st for st in instance.students if st.cohort_index in self.cohorts]
        self.R = [instance.cohort_of(st).slot_length for st in self.students]
        self.T = [instance.cohort_of(st).visits for st in self.students]
        self.gap = [instance.effective_gap(instance.cohort_of(st)) for st in self.students]
        self.by_cohort = {s: [n for n, st in enumerate(self.students) if st.cohort_index == s]
                          for s in self.cohorts}
        self.rows = instance.availability
        self.runs = [_runs(row) for row in self.rows]
        self._pack_cache: dict = {}
        self._lock = threading.Lock()

        self.day_ok = all(sum(row) >= self.L for row in self.rows)
        slots = [[k for k, v in enumerate(row, start=1) if v] for row in self.rows]
        self.rest_base = [0] * (self.D + 1)
        self.rest_prefix: list[list[int]] = [[0]] * (self.D + 1)
        merged: list[int] = []
        for j in range(self.D - 1, -1, -1):
            if len(slots[j]) < self.L:
                continue
            base, marg = _day_marginals(slots[j], self.L)
            self.rest_base[j] = self.rest_base[j + 1] + base
            merged = list(heapq.merge(merged, marg))
            self.rest_prefix[j] = [0] + list(itertools.accumulate(merged))
        for j in range(self.D - 1, -1, -1):
            if len(slots[j]) < self.L:
                self.rest_base[j] = self.rest_base[j + 1]
                self.rest_prefix[j] = self.rest_prefix[j + 1]

        self.strides: tuple[int, ...] = ()
        self.table: list[list[float]] | None = None

    def totals(self) -> list[int]:
        """Outstanding visits per slot length at the root."""
        out = [0] * len(self.lengths)
        for R, T in zip(self.R, self.T):
            out[self.lengths.index(R)] += T
        return out

    def build_table(self, deadline: float = _INF) -> bool:
        """Tabulate the per-length count bound for every day and every vector
        of outstanding visit counts.  Returns False when it is too large or
        the deadline passes, leaving only the fluid bound."""
        totals = self.totals()
        caps = [0] * len(self.lengths)
        for R in self.R:
            caps[self.lengths.index(R)] += 1
        shape = tuple(t + 1 for t in totals)
        options = list(itertools.product(*[range(min(c, t) + 1) for c, t in zip(caps, totals)]))
        cells = math.prod(shape)
        if cells * (self.D + 1) > _TABLE_CELLS or cells * len(options) * self.D > _TABLE_WORK:
            return False
        after = np.full(shape, _INF)
        after[(0,) * len(shape)] = 0.0
        tables = [after.ravel().tolist()]
        for j in range(self.D - 1, -1, -1):
            if time.monotonic() > deadline:
                return False
            here = np.full(shape, _INF)
            for counts in options:
                packed = self.pack(j, counts)
                if packed is None:
                    continue
                dst = tuple(slice(c, None) for c in counts)
                src = tuple(slice(0, n - c) for n, c in zip(shape, counts))
                here[dst] = np.minimum(here[dst], after[src] + packed[0])
            after = here
            tables.append(here.ravel().tolist())
        tables.reverse()
        self.strides = tuple(int(x) // 8 for x in np.empty(shape).strides)
        self.table = tables
        return True

    def rest_bound(self, day: int, units: int, counts: Sequence[int] | None = None) -> float:
        """Bound on days ``day..D-1`` (0-based) holding ``units`` visit slots,
        ``counts[t]`` of them being visits of the t-th length."""
        prefix = self.rest_prefix[day]
        if units >= len(prefix):
            return _INF
        bound = self.rest_base[day] + prefix[units]
        if self.table is not None and counts is not None:
            exact = self.table[day][sum(c * s for c, s in zip(counts, self.strides))]
            if exact > bound:
                return exact if exact == _INF else int(exact)
        return bound

    def pack(self, day: int, counts: tuple[int, ...]):
        key = (self.rows[day], counts)
        hit = self._pack_cache.get(key, False)
        if hit is False:
            hit = _pack_day(self.rows[day], self.L, self.lengths, counts)
            with self._lock:
                self._pack_cache[key] = hit
        return hit

    def layout_schedule(self, trail: Sequence[tuple]) -> Schedule:
        """Concrete placements for the per-day (visitors, layout) choices."""
        placements = []
        emergency = {}
        for j, (chosen, layout, _) in enumerate(trail):
            by_type: dict[int, list[int]] = {t: [] for t in range(len(self.lengths))}
            for n in sorted(chosen, key=lambda n: self.students[n]):
                by_type[self.lengths.index(self.R[n])].append(n)
            occupied: set[int] = set()
            for (start, _), per_type in zip(self.runs[j], layout or ()):
                here = []
                for t, count in enumerate(per_type):
                    here += by_type[t][:count]
                    by_type[t] = by_type[t][count:]
                k = start
                for n in sorted(here, key=lambda n: self.students[n]):
                    placements.append(Placement(self.students[n], j + 1, k, self.R[n]))
                    occupied.update(range(k, k + self.R[n]))
                    k += self.R[n]
            e = complete_emergency(self.instance, j + 1, occupied)
            if e:
                emergency[j + 1] = e
        return Schedule(tuple(placements), emergency)


class _Shared:
    """Incumbent and progress state shared between workers."""

    def __init__(self, params: SolveParams, start: float):
        self.lock = threading.Lock()
        self.params = params
        self.start = start
        self.deadline = start + params.time_limit if params.time_limit > 0 else _INF
        self.incumbent: int | None = None
        self.schedule: Schedule | None = None
        self.bound = 0
        self.stats = SolveStats()
        self.next_log = start
        self.node_limit: float = _INF
        self.stop = threading.Event()

    def offer(self, cost: int, schedule_fn) -> bool:
        with self.lock:
            if self.incumbent is None or cost < self.incumbent:
                self.incumbent = cost
                self.schedule = schedule_fn()
                return True
        return False

    def raise_bound(self, value: float) -> None:
        with self.lock:
            if value != _INF and value > self.bound:
                self.bound = int(value)

    def tick(self) -> None:
        self.stats.nodes += 1
        if self.stop.is_set():
            raise _Stopped
        if self.stats.nodes > self.node_limit:
            raise _DiveLimit
        now = time.monotonic()
        if now > self.deadline:
            raise _Timeout
        interval = self.params.log_interval
        if interval is not None and now >= self.next_log:
            self.next_log = now + interval
            self.emit()

    def emit(self) -> None:
        inc, bound = self.incumbent, self.bound
        if inc is not None:
            bound = min(bound, inc)
            gap = f"{100.0 * (inc - bound) / inc:.2f}%" if inc else "0.00%"
        else:
            gap = "inf"
        log.info("nodes=%d incumbent=%s bound=%d gap=%s",
                 self.stats.nodes, "-" if inc is None else inc, bound, gap)


class _Worker:
    """Depth-first search over days with mutable per-student state."""

    def __init__(self, static: _Static, shared: _Shared):
        self.st = static
        self.sh = shared
        n = len(static.students)
        self.r = list(static.T)
        self.last = [-(10 ** 9)] * n
        self.cost = 0
        self.units = sum(R * T for R, T in zip(static.R, static.T))
        self.left = static.totals()
        self.trail: list[tuple[tuple[int, ...], tuple]] = []
        self.cutoff: float = _INF
        self.next_cutoff: float = _INF

    # -- node evaluation -------------------------------------------------

    def _alive(self, day: int) -> bool:
        """Every student can still fit its visits, and the days pinned down
        for students without slack can host those visits together."""
        D1 = self.st.D - 1
        pinned: dict[int, list[int]] = {}
        for n, r in enumerate(self.r):
            if r:
                g = self.st.gap[n] + 1
                earliest = max(day, self.last[n] + g)
                slack = D1 - (earliest + (r - 1) * g)
                if slack < 0:
                    return False
                if slack == 0:
                    t = self.st.lengths.index(self.st.R[n])
                    for j in range(earliest, D1 + 1, g):
                        pinned.setdefault(j, [0] * len(self.st.lengths))[t] += 1
        for j, counts in pinned.items():
            if self.st.pack(j, tuple(counts)) is None:
                return False
        return True

    def _classes(self, day: int):
        """Per cohort: list of (members, forced) classes of interchangeable
        eligible students, most urgent first."""
        D1 = self.st.D - 1
        out = {}
        for s in self.st.cohorts:
            groups: dict[int, list[int]] = {}
            for n in self.st.by_cohort[s]:
                r = self.r[n]
                if r and day - self.last[n] >= self.st.gap[n] + 1:
                    groups.setdefault(r, []).append(n)
            classes = []
            for r in sorted(groups, reverse=True):
                g = self.st.gap[groups[r][0]] + 1
                forced = day + 1 + (r - 1) * g > D1
                classes.append((groups[r], forced))
            out[s] = classes
        return out

    def children(self, day: int):
        """Feasible visitor-count vectors for ``day`` sorted by bound."""
        classes = self._classes(day)
        ranges = []
        for s in self.st.cohorts:
            lo = sum(len(m) for m, forced in classes[s] if forced)
            hi = sum(len(m) for m, _ in classes[s])
            ranges.append(range(lo, hi + 1))
        # each cohort's share of the outstanding units, used to keep pace
        share = {}
        for s in self.st.cohorts:
            left = sum(self.r[n] for n in self.st.by_cohort[s]) * self.st.instance.cohorts[s].slot_length
            share[s] = left / self.units if self.units else 0.0
        out = []
        for vector in itertools.product(*ranges):
            counts = [0] * len(self.st.lengths)
            units = 0
            for s, c in zip(self.st.cohorts, vector):
                counts[self.st.length_of[s]] += c
                units += c * self.st.instance.cohorts[s].slot_length
            packed = self.st.pack(day, tuple(counts))
            if packed is None:
                continue
            day_cost, layout = packed
            rest = [a - b for a, b in zip(self.left, counts)]
            bound = self.cost + day_cost + self.st.rest_bound(day + 1, self.units - units, rest)
            if bound == _INF:
                continue
            drift = sum(abs(c * self.st.instance.cohorts[s].slot_length - units * share[s])
                        for s, c in zip(self.st.cohorts, vector))
            out.append((bound, -units, vector, day_cost, layout, drift))
        out.sort(key=lambda c: (c[0], c[5], c[2]))
        return classes, [c[:5] for c in out]

    @staticmethod
    def _splits(classes, count: int) -> Iterator[list[int]]:
        """Ways to draw ``count`` students from classes, urgent classes first."""
        sizes = [len(m) for m, _ in classes]
        forced = [f for _, f in classes]

        def rec(i: int, left: int) -> Iterator[list[int]]:
            if i == len(sizes):
                if left == 0:
                    yield []
                return
            tail = sum(sizes[i + 1:])
            top = min(sizes[i], left)
            low = sizes[i] if forced[i] else max(0, left - tail)
            for take in range(top, low - 1, -1):
                for rest in rec(i + 1, left - take):
                    yield [take] + rest

        yield from rec(0, count)

    def _selections(self, classes, vector) -> Iterator[list[int]]:
        per_cohort = []
        for s, c in zip(self.st.cohorts, vector):
            options = []
            for split in self._splits(classes[s], c):
                chosen = []
                for (members, _), take in zip(classes[s], split):
                    chosen += members[:take]
                options.append(chosen)
            per_cohort.append(options)
        for combo in itertools.product(*per_cohort):
            yield [n for part in combo for n in part]

    # -- search ------------------------------------------------------------

    def dfs(self, day: int) -> None:
        sh = self.sh
        sh.tick()
        if day == self.st.D:
            if self.units == 0:
                sh.offer(self.cost, lambda: self.st.layout_schedule(self.trail))
                if self.cost <= self.cutoff:
                    raise _Found
            return
        if not self._alive(day):
            sh.stats.prunings += 1
            return
        classes, kids = self.children(day)
        for bound, neg_units, vector, day_cost, layout in kids:
            inc = sh.incumbent
            if inc is not None and bound >= inc:
                sh.stats.prunings += 1
                break
            if bound > self.cutoff:
                self.next_cutoff = min(self.next_cutoff, bound)
                sh.stats.prunings += 1
                break
            for chosen in self._selections(classes, vector):
                self._push(day, chosen, day_cost, layout, -neg_units)
                try:
                    self.dfs(day + 1)
                finally:
                    self._pop(day, chosen, day_cost, -neg_units)
                inc = sh.incumbent
                if inc is not None and bound >= inc:
                    break

    def _push(self, day, chosen, day_cost, layout, units):
        saved = tuple(self.last[n] for n in chosen)
        for n in chosen:
            self.r[n] -= 1
            self.last[n] = day
            self.left[self.st.lengths.index(self.st.R[n])] -= 1
        self.cost += day_cost
        self.units -= units
        self.trail.append((tuple(chosen), layout, saved))

    def _pop(self, day, chosen, day_cost, units):
        _, _, saved = self.trail.pop()
        for n, prev in zip(chosen, saved):
            self.r[n] += 1
            self.last[n] = prev
            self.left[self.st.lengths.index(self.st.R[n])] += 1
        self.cost -= day_cost
        self.units += units

    def root_tasks(self):
        """Root children expanded into (vector bound, selection, cost, layout, units)."""
        classes, kids = self.children(0)
        for bound, neg_units, vector, day_cost, layout in kids:
            for chosen in self._selections(classes, vector):
                yield bound, chosen, day_cost, layout, -neg_units


def _dive(static: _Static, shared: _Shared, node_limit: int) -> None:
    """Cutoff-free depth-first search for an early incumbent."""
    shared.node_limit = shared.stats.nodes + node_limit
    try:
        _Worker(static, shared).dfs(0)
    except (_DiveLimit, _Found):
        pass
    finally:
        shared.node_limit = _INF


def _run_pass(static: _Static, shared: _Shared, cutoff: float, threads: int) -> tuple[bool, float]:
    """One iterative-deepening pass; returns (leaf found, smallest pruned bound).

    With several threads the root's children are handed out one at a time;
    the first leaf stops every worker.
    """
    if threads == 1:
        worker = _Worker(static, shared)
        worker.cutoff = cutoff
        try:
            worker.dfs(0)
        except _Found:
            return True, worker.next_cutoff
        return False, worker.next_cutoff

    tasks = _Worker(static, shared).root_tasks()
    task_lock = threading.Lock()
    outcomes: list[BaseException | None] = []
    cutoffs: list[float] = []

    def work() -> None:
        worker = _Worker(static, shared)
        worker.cutoff = cutoff
        outcome: BaseException | None = None
        try:
            while True:
                with task_lock:
                    task = next(tasks, None)
                if task is None:
                    break
                bound, chosen, day_cost, layout, units = task
                inc = shared.incumbent
                if inc is not None and bound >= inc:
                    continue
                if bound > cutoff:
                    worker.next_cutoff = min(worker.next_cutoff, bound)
                    continue
                worker._push(0, chosen, day_cost, layout, units)
                try:
                    worker.dfs(1)
                finally:
                    worker._pop(0, chosen, day_cost, units)
        except _Stopped:
            pass
        except BaseException as exc:
            outcome = exc
            shared.stop.set()
        with task_lock:
            outcomes.append(outcome)
            cutoffs.append(worker.next_cutoff)

    pool = [threading.Thread(target=work, daemon=True) for _ in range(threads)]
    for t in pool:
        t.start()
    for t in pool:
        t.join()
    shared.stop.clear()
    for exc in outcomes:
        if exc is not None and not isinstance(exc, (_Found, _Timeout)):
            raise exc
    if any(isinstance(exc, _Found) for exc in outcomes):
        return True, min(cutoffs)
    if any(isinstance(exc, _Timeout) for exc in outcomes):
        raise _Timeout
    return False, min(cutoffs, default=_INF)


def solve(instance: ProblemInstance, params: SolveParams | None = None) -> SolveResult:
    """Optimal schedule, or the best found within the time limit."""
    params = params or SolveParams()
    start = time.monotonic()
    shared = _Shared(params, start)
    threads = 1 if params.deterministic else params.thread_count

    def finish(status: str) -> SolveResult:
        shared.stats.wall_time = time.monotonic() - start
        if status == OPTIMAL:
            shared.bound = shared.incumbent
        if params.log_interval is not None:
            shared.emit()
        bound = shared.bound if shared.incumbent is None else min(shared.bound, shared.incumbent)
        return SolveResult(status, shared.incumbent, bound, shared.schedule, shared.stats)

    prop = propagate(instance, Partial())
    if not prop.consistent:
        log.debug("root propagation: %s", prop.reason)
        return finish(INFEASIBLE)
    static = _Static(instance)
    if static.build_table(shared.deadline):
        log.debug("count table built for %d days", instance.days)
    root = static.rest_bound(0, sum(R * T for R, T in zip(static.R, static.T)), static.totals())
    if not static.day_ok or root == _INF:
        return finish(INFEASIBLE)
    shared.raise_bound(max(root, lower_bound(instance, Partial())))

    try:
        if not _Worker(static, shared)._alive(0):
            return finish(INFEASIBLE)
        _dive(static, shared, node_limit=max(200, 20 * instance.days))
        if shared.incumbent is not None and shared.incumbent <= shared.bound:
            return finish(OPTIMAL)
        cutoff: float = shared.bound
        while True:
            shared.stats.passes += 1
            found, nxt = _run_pass(static, shared, cutoff, threads)
            if found:
                return finish(OPTIMAL)
            if shared.incumbent is not None and nxt >= shared.incumbent:
                return finish(OPTIMAL)
            if nxt == _INF:
                return finish(OPTIMAL if shared.incumbent is not None else INFEASIBLE)
            shared.raise_bound(nxt)
            cutoff = nxt
    except _Timeout:
        return finish(FEASIBLE if shared.incumbent is not None else TIMEOUT_NO_SOLUTION)
