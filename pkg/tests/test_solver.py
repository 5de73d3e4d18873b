import itertools
import logging
import random
import re

import pytest

from meetsched import CohortSpec, Placement, ProblemInstance, Schedule, StudentId
from meetsched.ilp import build_model
from meetsched.instance import InstanceError
from meetsched.schedule import dump_schedule
from meetsched.solver import (
    FEASIBLE,
    INFEASIBLE,
    OPTIMAL,
    TIMEOUT_NO_SOLUTION,
    Partial,
    _Static,
    SolveParams,
    complete_emergency,
    lower_bound,
    propagate,
    solve,
)
from meetsched.validator import (
    check_schedule,
    decode_fixture,
    evaluate_objective,
    fixture_instance,
    iter_feasible_schedules,
)

from support import highs_optimum, tiny_suite

QUIET = SolveParams(log_interval=None)
LOG_LINE = re.compile(r"nodes=(\d+) incumbent=(\d+|-) bound=(\d+) gap=(\S+)")


def random_mid(rng: random.Random) -> ProblemInstance:
    while True:
        D, P = rng.randint(5, 12), rng.randint(3, 8)
        F = [[1 if rng.random() < 0.85 else 0 for _ in range(P)] for _ in range(D)]
        cohorts = [CohortSpec(f"c{s}", rng.randint(1, 3), rng.randint(1, 3), rng.randint(1, 3), rng.randint(0, 3))
                   for s in range(rng.randint(1, 3))]
        try:
            return ProblemInstance(D, P, rng.choice([0, 1, 1, 2]), F, cohorts)
        except InstanceError:
            continue


def assert_result_invariants(inst, result):
    if result.status in (OPTIMAL, FEASIBLE):
        assert result.schedule is not None
        assert check_schedule(inst, result.schedule) == []
        assert evaluate_objective(inst, result.schedule) == result.objective
        assert result.lower_bound <= result.objective
        if result.status == OPTIMAL:
            assert result.lower_bound == result.objective
    else:
        assert result.schedule is None and result.objective is None


# ---------------------------------------------------------------- solve

def test_small_example_is_139():
    inst = fixture_instance("small")
    result = solve(inst, QUIET)
    assert (result.status, result.objective, result.lower_bound) == (OPTIMAL, 139, 139)
    assert_result_invariants(inst, result)


def test_one_undergrad_two_slots():
    inst = ProblemInstance(1, 2, 1, [[1, 1]], (CohortSpec("undergraduate", 1, 1, 1, 0),))
    result = solve(inst, QUIET)
    assert (result.status, result.objective) == (OPTIMAL, 4)
    assert result.schedule.placements == (Placement(StudentId(0, 1), 1, 1, 1),)
    assert result.schedule.emergency == {1: {2}}


def test_two_visits_two_days_gap_one_is_infeasible():
    inst = ProblemInstance(2, 2, 0, [[1, 1]] * 2, (CohortSpec("undergraduate", 1, 2, 1, 1),))
    result = solve(inst, QUIET)
    assert result.status == INFEASIBLE
    assert result.schedule is None


def test_empty_instance_solves_to_zero():
    result = solve(ProblemInstance(1, 1, 0, [[1]], ()), QUIET)
    assert (result.status, result.objective, result.lower_bound) == (OPTIMAL, 0, 0)


def test_no_room_for_emergencies_is_infeasible():
    inst = ProblemInstance(2, 3, 2, [[1, 1, 1], [1, 0, 0]], ())
    assert solve(inst, QUIET).status == INFEASIBLE


def test_thread_count_must_be_positive():
    with pytest.raises(ValueError):
        SolveParams(thread_count=0)
    with pytest.raises(ValueError):
        SolveParams(time_limit=-1)


def test_tiny_suite_matches_oracle():
    for inst, verdict in tiny_suite(seed=5, count=60):
        result = solve(inst, QUIET)
        assert (result.status, result.objective) == (verdict.status, verdict.objective), inst
        assert_result_invariants(inst, result)


def test_time_limit_reports_a_status_not_an_error():
    inst = fixture_instance("case_study")
    result = solve(inst, SolveParams(time_limit=1e-6, log_interval=None))
    assert result.status in (FEASIBLE, TIMEOUT_NO_SOLUTION, OPTIMAL)
    assert_result_invariants(inst, result)
    assert result.lower_bound > 0


def test_infeasible_through_pinned_days():
    # c0 has no slack: both members must meet on days 1, 6, 11 and 16, and
    # day 11 has room for only one three-slot visit; the LP relaxation is feasible
    F = [[1, 1, 1, 1, 1, 1, 1, 1], [1, 1, 1, 1, 0, 1, 1, 1], [1, 1, 1, 1, 1, 1, 1, 1],
         [1, 1, 0, 1, 1, 0, 1, 1], [0, 1, 1, 1, 1, 1, 1, 1], [1, 1, 1, 1, 1, 1, 1, 1],
         [1, 1, 1, 1, 0, 1, 1, 1], [1, 1, 1, 0, 1, 1, 0, 1], [1, 1, 1, 1, 1, 1, 1, 1],
         [1, 1, 1, 1, 1, 1, 1, 0], [1, 1, 1, 1, 1, 0, 1, 1], [1, 1, 0, 1, 1, 1, 1, 1],
         [1, 1, 1, 1, 1, 0, 1, 1], [1, 1, 1, 0, 1, 1, 1, 1], [1, 1, 1, 1, 1, 1, 1, 1],
         [0, 1, 1, 1, 1, 1, 1, 1]]
    cohorts = (CohortSpec("c0", 2, 4, 3, 4), CohortSpec("c1", 2, 2, 2, 3), CohortSpec("c2", 4, 3, 3, 1))
    inst = ProblemInstance(16, 8, 0, F, cohorts)
    result = solve(inst, SolveParams(time_limit=60, log_interval=None))
    assert result.status == INFEASIBLE
    assert result.schedule is None
    assert highs_optimum(build_model(inst)) is None


def test_count_table_closes_contiguity_gap():
    # the LP relaxation and the fluid bound both stop at 137 because they
    # split the three-slot visits; packing whole visits per day gives 149
    F = [[1, 1, 1, 0, 1], [1, 1, 1, 1, 0], [1, 1, 1, 1, 1], [1, 1, 1, 1, 0], [1, 1, 1, 1, 1],
         [1, 0, 1, 1, 1], [1, 0, 1, 1, 1], [1, 1, 0, 1, 1], [1, 1, 0, 0, 1], [1, 1, 1, 1, 1],
         [1, 1, 1, 1, 1], [1, 1, 1, 1, 1], [1, 1, 1, 1, 1], [1, 1, 1, 0, 1], [1, 1, 1, 1, 1],
         [1, 1, 1, 1, 1], [1, 0, 1, 1, 1], [1, 1, 1, 1, 1], [0, 1, 1, 1, 1]]
    cohorts = (CohortSpec("c0", 3, 4, 1, 2), CohortSpec("c1", 4, 1, 3, 3), CohortSpec("c2", 2, 1, 3, 3))
    inst = ProblemInstance(19, 5, 1, F, cohorts)
    static = _Static(inst)
    units = sum(R * T for R, T in zip(static.R, static.T))
    assert static.rest_bound(0, units) == 137
    assert static.build_table()
    assert static.rest_bound(0, units, static.totals()) == 149
    result = solve(inst, SolveParams(time_limit=60, log_interval=None))
    assert (result.status, result.objective, result.lower_bound) == (OPTIMAL, 149, 149)
    assert result.stats.nodes < 2_000
    assert highs_optimum(build_model(inst)) == 149


def test_count_table_never_exceeds_the_optimum():
    built = 0
    for inst, verdict in tiny_suite(seed=31, count=80):
        static = _Static(inst)
        if not static.build_table():
            continue
        built += 1
        units = sum(R * T for R, T in zip(static.R, static.T))
        root = static.rest_bound(0, units, static.totals())
        if verdict.status == "optimal":
            assert root <= verdict.objective, inst
    assert built == 80


def test_count_table_is_skipped_when_too_large():
    assert _Static(fixture_instance("small")).build_table()
    static = _Static(fixture_instance("case_study"))
    assert not static.build_table()
    assert static.table is None


def test_deterministic_runs_are_byte_identical():
    inst = fixture_instance("small")
    runs = [solve(inst, SolveParams(deterministic=True, thread_count=4, log_interval=None)) for _ in range(3)]
    dumps = {dump_schedule(inst, r.schedule) for r in runs}
    assert len(dumps) == 1


@pytest.mark.parametrize("seed", range(5))
def test_threads_agree_on_status_and_objective(seed):
    inst = random_mid(random.Random(seed))
    one = solve(inst, SolveParams(time_limit=60, log_interval=None))
    four = solve(inst, SolveParams(time_limit=60, thread_count=4, log_interval=None))
    assert (one.status, one.objective) == (four.status, four.objective)
    assert_result_invariants(inst, four)


def parse_log(records):
    out = []
    for rec in records:
        m = LOG_LINE.fullmatch(rec.getMessage())
        if m:
            inc = None if m.group(2) == "-" else int(m.group(2))
            out.append((int(m.group(1)), inc, int(m.group(3)), m.group(4)))
    return out


def assert_monotone(lines):
    incumbents = [inc for _, inc, _, _ in lines if inc is not None]
    bounds = [b for _, _, b, _ in lines]
    nodes = [n for n, _, _, _ in lines]
    assert incumbents == sorted(incumbents, reverse=True)
    assert bounds == sorted(bounds)
    assert nodes == sorted(nodes)
    for _, inc, b, gap in lines:
        assert (gap == "inf") == (inc is None)
        if inc is not None:
            assert b <= inc


def test_progress_log_is_monotone(caplog):
    inst = random_mid(random.Random(3))
    with caplog.at_level(logging.INFO, logger="meetsched.solver"):
        result = solve(inst, SolveParams(log_interval=0))
    lines = parse_log(caplog.records)
    assert len(lines) >= 2
    assert_monotone(lines)
    if result.status == OPTIMAL:
        assert lines[-1][1] == lines[-1][2] == result.objective
        assert lines[-1][3] == "0.00%"


def test_logging_can_be_switched_off(caplog):
    with caplog.at_level(logging.INFO, logger="meetsched.solver"):
        solve(fixture_instance("small"), QUIET)
    assert parse_log(caplog.records) == []


# ---------------------------------------------------------------- emergency completion

def test_complete_emergency_takes_lowest_free_slots():
    inst = ProblemInstance(1, 6, 2, [[1, 0, 1, 1, 1, 1]], ())
    assert complete_emergency(inst, 1, {1, 3}) == {4, 5}
    assert complete_emergency(inst, 1, {1, 3, 4, 5}) is None


def per_day_minimum(inst, day, occupied):
    free = [k for k in range(1, inst.slots_per_day + 1) if inst.available(day, k) and k not in occupied]
    return min(sum(c) for c in itertools.combinations(free, inst.emergency_quota))


def test_solver_emergency_choice_is_per_day_optimal():
    instances = [fixture_instance("small")] + [random_mid(random.Random(s)) for s in range(8)]
    for inst in instances:
        result = solve(inst, SolveParams(time_limit=60, log_interval=None))
        if result.schedule is None:
            continue
        for day in range(1, inst.days + 1):
            occupied = {k for p in result.schedule.placements if p.day == day for k in p.slots}
            chosen = result.schedule.emergency.get(day, frozenset())
            assert sum(chosen) == per_day_minimum(inst, day, occupied)


# ---------------------------------------------------------------- propagate and bound

def test_propagate_clears_the_gap_window():
    inst = ProblemInstance(9, 2, 0, [[1, 1]] * 9, (CohortSpec("phd", 1, 2, 1, 2),))
    st_ = StudentId(0, 1)
    result = propagate(inst, Partial((Placement(st_, 3, 1, 1),)))
    assert result.consistent
    assert {j for j, _ in result.candidates[st_]} == {6, 7, 8, 9}
    assert result.remaining[st_] == 1


def test_propagate_keeps_room_for_emergencies():
    st_ = StudentId(0, 1)
    cohorts = (CohortSpec("m", 2, 1, 2, 0),)
    # with three slots the fixed visit alone leaves one slot for a quota of two
    tight = ProblemInstance(1, 3, 2, [[1, 1, 1]], cohorts)
    assert not propagate(tight, Partial((Placement(st_, 1, 1, 2),))).consistent
    roomy = ProblemInstance(2, 4, 2, [[1, 1, 1, 1]] * 2, cohorts)
    result = propagate(roomy, Partial((Placement(st_, 1, 1, 2),)))
    assert result.consistent
    assert {j for j, _ in result.candidates[StudentId(0, 2)]} == {2}


def test_propagate_reports_contradictions():
    inst = ProblemInstance(3, 2, 0, [[1, 1]] * 3, (CohortSpec("u", 1, 2, 1, 1),))
    st_ = StudentId(0, 1)
    assert not propagate(inst, Partial((Placement(st_, 2, 1, 1),))).consistent
    assert not propagate(inst, Partial((Placement(st_, 1, 1, 1), Placement(st_, 2, 1, 1)))).consistent
    assert propagate(inst, Partial((Placement(st_, 1, 1, 1),))).consistent


def test_lower_bound_examples():
    assert lower_bound(ProblemInstance(1, 1, 0, [[1]], ()), Partial()) == 0
    inst = fixture_instance("small")
    table5 = decode_fixture("table5")
    assert lower_bound(inst, Partial(table5.placements, table5.emergency)) == 139
    assert lower_bound(inst, Partial()) <= 139


def random_partials(rng, schedule, count):
    items = [("p", p) for p in schedule.placements] + [
        ("e", (d, k)) for d, slots in schedule.emergency.items() for k in slots
    ]
    for _ in range(count):
        chosen = [it for it in items if rng.random() < 0.4]
        placements = tuple(v for kind, v in chosen if kind == "p")
        emergency = {}
        for kind, v in chosen:
            if kind == "e":
                emergency.setdefault(v[0], set()).add(v[1])
        yield Partial(placements, {d: frozenset(s) for d, s in emergency.items()})


def extends(schedule, partial):
    if not set(partial.placements) <= set(schedule.placements):
        return False
    return all(slots <= schedule.emergency.get(d, frozenset()) for d, slots in partial.emergency.items())


def test_propagate_and_bound_are_sound_against_enumeration():
    rng = random.Random(17)
    checked = 0
    for inst, verdict in tiny_suite(seed=23, count=80):
        if verdict.status != "optimal":
            continue
        try:
            feasible = list(iter_feasible_schedules(inst, node_budget=20_000))
        except RuntimeError:
            continue
        for partial in random_partials(rng, rng.choice(feasible), 4):
            completions = [s for s in feasible if extends(s, partial)]
            assert completions
            best = min(evaluate_objective(inst, s) for s in completions)
            assert lower_bound(inst, partial) <= best
            prop = propagate(inst, partial)
            assert prop.consistent
            fixed = set(partial.placements)
            for s in completions:
                for p in s.placements:
                    if p not in fixed:
                        assert (p.day, p.start_slot) in prop.candidates[p.student]
            checked += 1
    assert checked >= 100
