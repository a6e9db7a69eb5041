import itertools

import numpy as np
import pytest

from comanip.assign import (
    AssignmentInfeasibleError,
    AssignmentSearch,
    NoCoverError,
    allocate,
    min_cover,
    next_alternative,
    segment_cover,
)
from comanip.coverage import ParamIntervalSet, RobotCoverage, rasterize, sample_grid


def iv(*pairs) -> ParamIntervalSet:
    return ParamIntervalSet.from_intervals(pairs)


def brute_force_min_k(sets: dict[str, ParamIntervalSet], resolution: int) -> int | None:
    """Oracle: full subset enumeration with python int bitsets."""
    grid = sample_grid(resolution)
    bits = {}
    for gid, s in sets.items():
        val = 0
        for k, t in enumerate(grid):
            if s.contains(t, tol=0.25 / resolution):
                val |= 1 << k
        bits[gid] = val
    full = (1 << len(grid)) - 1
    ids = list(sets)
    for size in range(1, len(ids) + 1):
        for combo in itertools.combinations(ids, size):
            acc = 0
            for g in combo:
                acc |= bits[g]
            if acc == full:
                return size
    return None


def coverage_from_sets(sets: dict[str, ParamIntervalSet], robot: int,
                       resolution: int) -> RobotCoverage:
    grid = sample_grid(resolution)
    union = ParamIntervalSet.empty()
    masks = {}
    for gid, s in sets.items():
        union = union.union(s)
        masks[gid] = rasterize(s, grid)
    return RobotCoverage(robot, resolution, dict(sets), union, masks)


def random_family(rng, n_sets, resolution):
    sets = {}
    for i in range(n_sets):
        ivs = []
        for _ in range(rng.integers(1, 4)):
            a = rng.uniform(-0.2, 1.0)
            b = a + rng.uniform(0.15, 0.8)
            ivs.append((max(a, 0.0), min(max(b, 0.0), 1.0)))
        sets[f"g{i:02d}"] = ParamIntervalSet.from_intervals(ivs)
    return sets


class TestMinCover:
    def test_single_full_set(self):
        out = min_cover({"g1": ParamIntervalSet.full()}, resolution=21)
        assert out.covers[0] == ("g1",)
        assert out.min_size == 1
        assert out.exact

    def test_two_set_cover(self):
        out = min_cover({"g1": iv((0.0, 0.5)), "g2": iv((0.4, 1.0))}, resolution=21)
        assert out.min_size == 2
        assert out.covers[0] == ("g1", "g2")

    def test_gap_raises(self):
        with pytest.raises(NoCoverError) as exc:
            min_cover({"g1": iv((0.0, 0.4)), "g2": iv((0.6, 1.0))}, resolution=21)
        assert not exc.value.gaps.is_empty()

    def test_random_families_match_bruteforce(self, rng):
        checked = 0
        for _ in range(40):
            sets = random_family(rng, int(rng.integers(2, 13)), 101)
            expected = brute_force_min_k(sets, 101)
            if expected is None:
                with pytest.raises(NoCoverError):
                    min_cover(sets, resolution=101)
            else:
                out = min_cover(sets, resolution=101)
                assert out.min_size == expected
                checked += 1
        assert checked >= 10

    def test_all_min_covers_irreducible(self, rng):
        sets = {
            "a": iv((0.0, 0.6)),
            "b": iv((0.5, 1.0)),
            "c": iv((0.0, 1.0)),
            "d": iv((0.2, 0.8)),
        }
        out = min_cover(sets, resolution=51)
        assert out.covers[0] == ("c",)
        # the size-2 cover {a, b} survives; {c, x} is reducible and must not
        assert ("a", "b") in out.covers
        for cover in out.covers:
            if len(cover) > 1:
                assert "c" not in cover


class TestSegmentation:
    def test_orders_by_position_and_midpoint_handover(self):
        res = 21
        grid = sample_grid(res)
        sets = {"g1": iv((0.4, 1.0)), "g2": iv((0.0, 0.5))}
        masks = {g: rasterize(s, grid) for g, s in sets.items()}
        scheme = segment_cover(("g1", "g2"), masks, grid, owner=0)
        assert scheme is not None
        assert scheme.grasp_ids() == ("g2", "g1")
        # handover at the middle of the overlap [0.4, 0.5]
        h = scheme.segments[0].end
        assert 0.4 <= h <= 0.5
        assert abs(h - 0.45) <= grid[1] - grid[0]

    def test_abutting_without_shared_sample_fails(self):
        res = 11
        grid = sample_grid(res)
        masks = {
            "g1": np.array([True] * 5 + [False] * 6),
            "g2": np.array([False] * 5 + [True] * 6),
        }
        assert segment_cover(("g1", "g2"), masks, grid, owner=0) is None


class TestAllocate:
    def test_fig4_shape(self):
        # gamma(g1)=[0.4,1], gamma(g2)=[0,0.5], gamma(g3)=[0,1], two robots
        sets = {"g1": iv((0.4, 1.0)), "g2": iv((0.0, 0.5)), "g3": iv((0.0, 1.0))}
        covs = [coverage_from_sets(sets, r, 201) for r in range(2)]
        assignment, _ = allocate(covs, leader=0)
        assert assignment.total_regrasps == 1
        shapes = sorted(s.grasp_ids() for s in assignment.schemes)
        assert shapes == [("g2", "g1"), ("g3",)]
        # every handover sits inside the feasible overlap of both grasps
        for ev in assignment.regrasp_events:
            assert sets[ev.from_grasp].contains(ev.t, tol=1e-9)
            assert sets[ev.to_grasp].contains(ev.t, tol=1e-9)

    def test_single_robot_full_grasp_zero_regrasps(self):
        covs = [coverage_from_sets({"g1": ParamIntervalSet.full()}, 0, 51)]
        assignment, _ = allocate(covs)
        assert assignment.total_regrasps == 0
        assert assignment.schemes[0].grasp_ids() == ("g1",)

    def test_two_robots_two_full_grasps_distinct(self):
        sets = {"g1": ParamIntervalSet.full(), "g2": ParamIntervalSet.full()}
        covs = [coverage_from_sets(sets, r, 51) for r in range(2)]
        assignment, _ = allocate(covs)
        assert assignment.total_regrasps == 0
        ids = sorted(s.grasp_ids() for s in assignment.schemes)
        assert ids == [("g1",), ("g2",)]

    def test_zero_regrasp_priority(self, rng):
        # whenever n distinct full-cover grasps exist, zero regrasps win
        for _ in range(10):
            n = int(rng.integers(1, 4))
            sets = {}
            for i in range(n):
                sets[f"full{i}"] = ParamIntervalSet.full()
            for i in range(int(rng.integers(0, 4))):
                a = rng.uniform(0, 0.5)
                sets[f"part{i}"] = iv((a, min(1.0, a + rng.uniform(0.1, 0.4))))
            covs = [coverage_from_sets(sets, r, 51) for r in range(n)]
            assignment, _ = allocate(covs)
            assert assignment.total_regrasps == 0

    def test_shared_grasp_must_not_collide_in_time(self):
        # only g_share covers the middle; both robots would need it at once
        sets = {
            "a": iv((0.0, 0.45)),
            "b": iv((0.55, 1.0)),
            "share": iv((0.3, 0.7)),
        }
        covs = [coverage_from_sets(sets, r, 101) for r in range(2)]
        with pytest.raises(AssignmentInfeasibleError):
            allocate(covs)

    def test_regrasp_count_identity(self):
        sets = {"g1": iv((0.0, 0.4)), "g2": iv((0.3, 0.7)), "g3": iv((0.6, 1.0)),
                "g4": iv((0.0, 1.0))}
        covs = [coverage_from_sets(sets, r, 101) for r in range(2)]
        assignment, _ = allocate(covs)
        assert assignment.total_regrasps == sum(
            len(s.segments) - 1 for s in assignment.schemes
        )
        assert assignment.total_regrasps == 2  # one robot g4, other g1-g2-g3


class TestNextAlternative:
    def test_unique_optimum_then_exhausted(self):
        covs = [coverage_from_sets({"g1": ParamIntervalSet.full()}, 0, 21)]
        first, search = allocate(covs)
        assert first.rank == 0 and first.optimal
        assert next_alternative(search) is None

    def test_symmetric_pair_returned_once(self):
        sets = {"g1": ParamIntervalSet.full(), "g2": ParamIntervalSet.full()}
        covs = [coverage_from_sets(sets, r, 21) for r in range(2)]
        first, search = allocate(covs)
        second = next_alternative(search)
        assert second is not None
        assert second.rank == 1 and not second.optimal
        a = tuple(s.grasp_ids() for s in first.schemes)
        b = tuple(s.grasp_ids() for s in second.schemes)
        assert a != b
        assert next_alternative(search) is None

    def test_monotone_totals_and_no_repeats(self, rng):
        sets = random_family(rng, 6, 51)
        union = ParamIntervalSet.empty()
        for s in sets.values():
            union = union.union(s)
        if not union.covers_unit():
            sets["gfix"] = ParamIntervalSet.full()
        covs = [coverage_from_sets(sets, r, 51) for r in range(2)]
        search = AssignmentSearch(covs)
        seen = set()
        totals = []
        while True:
            a = search.next_assignment()
            if a is None:
                break
            key = tuple(
                tuple((s.grasp_id, s.start_index, s.end_index) for s in sch.segments)
                for sch in a.schemes
            )
            assert key not in seen
            seen.add(key)
            totals.append(sum(len(s.segments) for s in a.schemes))
        assert totals == sorted(totals)
