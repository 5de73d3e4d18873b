"""Test-only helpers: instance generators and referees independent of the package."""

from __future__ import annotations

import random
import re
from typing import Iterator

from meetsched.ilp import IlpModel
from meetsched.instance import CohortSpec, InstanceError, ProblemInstance, StudentId
from meetsched.render import WEEKDAYS, cell_labels
from meetsched.schedule import Placement, Schedule
from meetsched.validator import brute_force_optimum

ORACLE_BUDGET = 200_000


def random_tiny(rng: random.Random) -> ProblemInstance:
    """D <= 4, P <= 5, at most five visits in total."""
    while True:
        D, P = rng.randint(1, 4), rng.randint(1, 5)
        L = rng.choice([0, 0, 1, 1, 2])
        density = rng.choice([0.7, 0.85, 1.0])
        F = [[1 if rng.random() < density else 0 for _ in range(P)] for _ in range(D)]
        cohorts = []
        budget = 5
        for s in range(rng.randint(0, 3)):
            N = rng.randint(0, 2)
            T = rng.randint(0, 3)
            if N * T > budget:
                T = budget // N if N else T
            budget -= N * T
            cohorts.append(CohortSpec(f"{'uvwxyz'[s]}c", N, T, rng.randint(1, min(P, 3)), rng.randint(0, 3)))
        try:
            return ProblemInstance(D, P, L, F, cohorts)
        except InstanceError:
            continue


def tiny_suite(seed: int, count: int) -> list[tuple[ProblemInstance, object]]:
    """``count`` random tiny instances the oracle can settle, with its verdicts."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        inst = random_tiny(rng)
        verdict = brute_force_optimum(inst, ORACLE_BUDGET)
        if verdict.status != "budget_exceeded":
            out.append((inst, verdict))
    return out


def enumerate_points(model: IlpModel, limit: int = 500_000) -> list[frozenset[str]]:
    return list(iter_points(model, limit))


def iter_points(model: IlpModel, limit: int = 500_000) -> Iterator[frozenset[str]]:
    """All 0-1 points satisfying every row, by row-bounded backtracking.

    Works on the raw rows only; knows nothing about schedules.
    """
    # day-major, each student's day marker ahead of its slots, emergencies last
    kind_rank = {"day_marker": 0, "visit": 1, "emergency": 2}
    ordered = sorted(
        model.variables,
        key=lambda v: (v.day, v.kind == "emergency", v.cohort or 0, v.member or 0, kind_rank[v.kind], v.slot or 0),
    )
    names = [v.name for v in ordered]
    index = {n: i for i, n in enumerate(names)}
    rows = [(tuple((index[n], c) for n, c in row.terms), row.sense, row.rhs) for row in model.constraints]
    touching: list[list[int]] = [[] for _ in names]
    for r, (terms, _, _) in enumerate(rows):
        for i, _ in terms:
            touching[i].append(r)
    current = [0] * len(rows)
    pos_rest = [sum(c for _, c in t if c > 0) for t, _, _ in rows]
    neg_rest = [sum(c for _, c in t if c < 0) for t, _, _ in rows]
    coef = [dict(t) for t, _, _ in rows]

    def ok(r: int) -> bool:
        _, sense, rhs = rows[r]
        lo, hi = current[r] + neg_rest[r], current[r] + pos_rest[r]
        if sense == "<=":
            return lo <= rhs
        if sense == ">=":
            return hi >= rhs
        return lo <= rhs <= hi

    if not all(ok(r) for r in range(len(rows))):
        return
    chosen: list[int] = []
    nodes = 0

    def rec(i: int) -> Iterator[frozenset[str]]:
        nonlocal nodes
        nodes += 1
        if nodes > limit:
            raise RuntimeError("enumeration limit")
        if i == len(names):
            yield frozenset(names[j] for j in chosen)
            return
        for value in (0, 1):
            for r in touching[i]:
                c = coef[r][i]
                if c > 0:
                    pos_rest[r] -= c
                else:
                    neg_rest[r] -= c
                current[r] += c * value
            if value:
                chosen.append(i)
            if all(ok(r) for r in touching[i]):
                yield from rec(i + 1)
            if value:
                chosen.pop()
            for r in touching[i]:
                c = coef[r][i]
                if c > 0:
                    pos_rest[r] += c
                else:
                    neg_rest[r] += c
                current[r] -= c * value

    yield from rec(0)


def highs_optimum(model: IlpModel) -> int | None:
    """Optimum of the built model via HiGHS (scipy), or None if infeasible."""
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    idx = {v.name: n for n, v in enumerate(model.variables)}
    c = np.zeros(len(idx))
    for name, value in model.objective:
        c[idx[name]] = value
    A = lil_matrix((len(model.constraints), len(idx)))
    lo, hi = [], []
    for r, row in enumerate(model.constraints):
        for name, value in row.terms:
            A[r, idx[name]] = value
        lo.append(-np.inf if row.sense == "<=" else row.rhs)
        hi.append(np.inf if row.sense == ">=" else row.rhs)
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lo, hi),
               integrality=np.ones(len(idx)), bounds=Bounds(0, 1))
    if res.status == 2:
        return None
    assert res.status == 0, res.message
    return round(res.fun)


_ROW = re.compile(r"^(\d+)\s*\|\s*(\w+)\s*\|(.*)$")


def parse_grid(instance: ProblemInstance, text: str) -> tuple[Schedule, dict[tuple[int, int], str]]:
    """Read a rendered grid back into placements, emergencies and raw cells."""
    by_label = {label: st for st, label in cell_labels(instance).items()}
    runs: dict[tuple[StudentId, int], list[int]] = {}
    emergency: dict[int, set[int]] = {}
    cells: dict[tuple[int, int], str] = {}
    for line in text.splitlines()[2:]:
        m = _ROW.match(line)
        assert m, line
        day = int(m.group(1))
        assert m.group(2) in WEEKDAYS
        values = [v.strip() for v in m.group(3).split("|")]
        values += [""] * (instance.slots_per_day - len(values))
        for k, value in enumerate(values, start=1):
            cells[(day, k)] = value
            if value == "E":
                emergency.setdefault(day, set()).add(k)
            elif value not in ("", "*"):
                runs.setdefault((by_label[value], day), []).append(k)
    placements = []
    for (st, day), slots in runs.items():
        slots.sort()
        assert slots == list(range(slots[0], slots[-1] + 1))
        placements.append(Placement(st, day, slots[0], len(slots)))
    return Schedule(tuple(placements), emergency), cells
