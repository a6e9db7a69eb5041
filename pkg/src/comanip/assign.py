"""Minimum-regrasp grasp selection and allocation to robots.

Covering the trajectory with as few grasp segments as possible is a set
cover problem over the sample grid; every robot needs its own full cover
(all robots hold the object throughout), and no two robots may use the
same grasp at the same time.  Enumeration is exact for small grasp sets
with a flagged greedy fallback above that.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .coverage import (
    DEFAULT_RESOLUTION,
    ParamIntervalSet,
    RobotCoverage,
    rasterize,
    sample_grid,
)

EXACT_COVER_LIMIT = 20
MAX_COVER_SIZE_SLACK = 2  # keep irreducible covers up to min_k + slack
MAX_COVERS_PER_ROBOT = 2000
MAX_COMBINATIONS = 500_000


class NoCoverError(Exception):
    """The union of coverable segments misses part of [0, 1]."""

    def __init__(self, gaps: ParamIntervalSet, robot_index: int | None = None):
        self.gaps = gaps
        self.robot_index = robot_index
        where = f" for robot {robot_index}" if robot_index is not None else ""
        spans = ", ".join(f"[{a:.4f}, {b:.4f}]" for a, b in gaps.intervals)
        super().__init__(f"trajectory not coverable{where}; uncovered: {spans or 'all'}")


class AssignmentInfeasibleError(Exception):
    """No combination of covers satisfies the distinct-grasp constraint."""


@dataclass(frozen=True)
class Segment:
    grasp_id: str
    start: float
    end: float
    start_index: int
    end_index: int


@dataclass(frozen=True)
class CoverScheme:
    owner: int
    segments: tuple[Segment, ...]

    @property
    def regrasps(self) -> int:
        return len(self.segments) - 1

    def grasp_ids(self) -> tuple[str, ...]:
        return tuple(s.grasp_id for s in self.segments)


@dataclass(frozen=True)
class RegraspEvent:
    robot: int
    t: float
    grid_index: int
    from_grasp: str
    to_grasp: str


@dataclass(frozen=True)
class Assignment:
    schemes: tuple[CoverScheme, ...]
    regrasp_events: tuple[RegraspEvent, ...]
    rank: int
    optimal: bool

    @property
    def total_regrasps(self) -> int:
        return sum(s.regrasps for s in self.schemes)


@dataclass(frozen=True)
class CoverSearch:
    """min_cover output: irreducible covers ordered by (size, ids)."""

    covers: tuple[tuple[str, ...], ...]
    exact: bool

    @property
    def min_size(self) -> int:
        return len(self.covers[0]) if self.covers else 0


def _masks_from_sets(sets: dict[str, ParamIntervalSet], grid: np.ndarray) -> dict[str, np.ndarray]:
    return {gid: rasterize(ivs, grid) for gid, ivs in sets.items()}


def _greedy_cover(masks: dict[str, np.ndarray]) -> tuple[str, ...]:
    remaining = np.ones(len(next(iter(masks.values()))), dtype=bool)
    chosen: list[str] = []
    ids = sorted(masks)
    while remaining.any():
        best = max(ids, key=lambda g: (int((masks[g] & remaining).sum()), g))
        gain = int((masks[best] & remaining).sum())
        if gain == 0:
            break
        chosen.append(best)
        remaining &= ~masks[best]
    return tuple(sorted(chosen))


def min_cover(sets: dict[str, ParamIntervalSet],
              resolution: int = DEFAULT_RESOLUTION) -> CoverSearch:
    """All irreducible covers of [0, 1] by the given interval sets.

    Exact bitmask enumeration over the sample grid for up to
    EXACT_COVER_LIMIT sets; a single greedy cover flagged non-exact above.
    Raises NoCoverError when even the union of all sets has gaps.
    """
    if not sets:
        raise ValueError("need at least one grasp interval set")
    grid = sample_grid(resolution)
    masks = _masks_from_sets(sets, grid)
    union = np.zeros(len(grid), dtype=bool)
    for m in masks.values():
        union |= m
    if not union.all():
        merge_eps = 1.0 / (2.0 * resolution)
        from .coverage import intervals_from_mask

        raise NoCoverError(intervals_from_mask(~union, grid, merge_eps))

    ids = sorted(sets)
    if len(ids) > EXACT_COVER_LIMIT:
        return CoverSearch((_greedy_cover(masks),), exact=False)

    covers: list[tuple[str, ...]] = []
    min_k: int | None = None
    for size in range(1, len(ids) + 1):
        if min_k is not None and size > min_k + MAX_COVER_SIZE_SLACK:
            break
        for combo in itertools.combinations(ids, size):
            acc = np.zeros(len(grid), dtype=bool)
            for g in combo:
                acc |= masks[g]
            if not acc.all():
                continue
            if min_k is not None and size > min_k:
                # larger covers must be irreducible to be worth keeping
                reducible = False
                for drop in combo:
                    acc2 = np.zeros(len(grid), dtype=bool)
                    for g in combo:
                        if g != drop:
                            acc2 |= masks[g]
                    if acc2.all():
                        reducible = True
                        break
                if reducible:
                    continue
            if min_k is None:
                min_k = size
            covers.append(combo)
            if len(covers) >= MAX_COVERS_PER_ROBOT:
                return CoverSearch(tuple(covers), exact=True)
    return CoverSearch(tuple(covers), exact=True)


# -- segmentation of one cover into ordered segments ---------------------------

def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    start = None
    for k, ok in enumerate(mask):
        if ok and start is None:
            start = k
        elif not ok and start is not None:
            runs.append((start, k - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def segment_cover(cover: tuple[str, ...], masks: dict[str, np.ndarray],
                  grid: np.ndarray, owner: int) -> CoverScheme | None:
    """Order a cover into segments with handovers at shared feasible samples.

    Greedy sweep: always continue with the run reaching furthest among those
    sharing a grid point with the current one; handovers land at the middle
    of the feasible overlap.  Returns None when no ordering connects (covers
    that only abut between grid points cannot hand over).
    """
    pieces = []
    for gid in cover:
        for run in _runs(masks[gid]):
            pieces.append((gid, run[0], run[1]))
    last = len(grid) - 1

    # first piece: starts at 0, reaches furthest
    cands = [p for p in pieces if p[1] == 0]
    if not cands:
        return None
    cur = max(cands, key=lambda p: (p[2], p[0]))
    chosen = [cur]
    handovers: list[int] = []
    while cur[2] < last:
        nxt_cands = [
            p for p in pieces
            if p is not cur and p[1] <= cur[2] and p[2] > cur[2]
        ]
        if not nxt_cands:
            return None
        nxt = max(nxt_cands, key=lambda p: (p[2], p[0]))
        h = (nxt[1] + cur[2]) // 2
        if handovers and h <= handovers[-1]:
            h = handovers[-1] + 1
        if not (nxt[1] <= h <= cur[2]):
            return None
        handovers.append(h)
        chosen.append(nxt)
        cur = nxt

    bounds = [0] + handovers + [last]
    segments = tuple(
        Segment(p[0], float(grid[bounds[i]]), float(grid[bounds[i + 1]]),
                bounds[i], bounds[i + 1])
        for i, p in enumerate(chosen)
    )
    return CoverScheme(owner, segments)


def _schedules(scheme: CoverScheme, n_samples: int,
               ordinal: dict[str, int]) -> tuple[np.ndarray, np.ndarray]:
    """Primary grasp per sample and incoming grasp at handover samples."""
    primary = np.full(n_samples, -1, dtype=np.int64)
    incoming = np.full(n_samples, -1, dtype=np.int64)
    for i, seg in enumerate(scheme.segments):
        lo = 0 if i == 0 else scheme.segments[i - 1].end_index + 1
        primary[lo:seg.end_index + 1] = ordinal[seg.grasp_id]
        if i > 0:
            incoming[scheme.segments[i - 1].end_index] = ordinal[seg.grasp_id]
    return primary, incoming


def _conflicts(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]) -> bool:
    pa, sa = a
    pb, sb = b
    clash = pa == pb
    clash |= (sa >= 0) & (sa == pb)
    clash |= (sb >= 0) & (sb == pa)
    clash |= (sa >= 0) & (sa == sb)
    return bool(clash.any())


class AssignmentSearch:
    """Deterministic stream of Eq.-9-consistent assignments, best first.

    Order: ascending total segment count, then leader segment count, then
    the lexicographic tuple of per-robot grasp sequences.
    """

    def __init__(self, coverages: list[RobotCoverage], leader: int = 0,
                 resolution: int | None = None):
        if not coverages:
            raise ValueError("need coverage for at least one robot")
        if len({cov.resolution for cov in coverages}) != 1:
            raise ValueError("coverage resolutions differ between robots")
        self.n = len(coverages)
        self.leader = leader
        res = resolution or coverages[0].resolution
        self.grid = sample_grid(res)
        self.exact = True

        all_ids = sorted({g for cov in coverages for g in cov.per_grasp})
        self._ordinal = {g: i for i, g in enumerate(all_ids)}

        per_robot_schemes: list[list[CoverScheme]] = []
        for cov in coverages:
            try:
                search = min_cover(cov.per_grasp, res)
            except NoCoverError as err:
                raise NoCoverError(err.gaps, robot_index=cov.robot_index) from None
            self.exact = self.exact and search.exact
            masks = _masks_from_sets(cov.per_grasp, self.grid)
            schemes = []
            seen = set()
            for cover in search.covers:
                scheme = segment_cover(cover, masks, self.grid, cov.robot_index)
                if scheme is None:
                    continue
                key = tuple((s.grasp_id, s.start_index, s.end_index) for s in scheme.segments)
                if key in seen:
                    continue
                seen.add(key)
                schemes.append(scheme)
            if not schemes:
                raise AssignmentInfeasibleError(
                    f"robot {cov.robot_index} has no connectable cover"
                )
            per_robot_schemes.append(schemes)

        total = 1
        for lst in per_robot_schemes:
            total *= len(lst)
        if total > MAX_COMBINATIONS:
            # keep the search bounded; schemes are already ordered small-first
            per_robot_schemes = [lst[:16] for lst in per_robot_schemes]
            self.exact = False

        combos = list(itertools.product(*per_robot_schemes))
        combos.sort(key=self._combo_key)
        self._combos = combos
        self._pos = 0
        self._sched_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._rank = 0

    def _combo_key(self, combo):
        total = sum(len(s.segments) for s in combo)
        leader_segs = len(combo[self.leader].segments)
        return (total, leader_segs, tuple(s.grasp_ids() for s in combo))

    def _schedule(self, scheme: CoverScheme) -> tuple[np.ndarray, np.ndarray]:
        key = id(scheme)
        if key not in self._sched_cache:
            self._sched_cache[key] = _schedules(scheme, len(self.grid), self._ordinal)
        return self._sched_cache[key]

    def next_assignment(self) -> Assignment | None:
        while self._pos < len(self._combos):
            combo = self._combos[self._pos]
            self._pos += 1
            scheds = [self._schedule(s) for s in combo]
            ok = True
            for i in range(self.n):
                for j in range(i + 1, self.n):
                    if _conflicts(scheds[i], scheds[j]):
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            events = []
            for scheme in combo:
                for i in range(1, len(scheme.segments)):
                    prev, seg = scheme.segments[i - 1], scheme.segments[i]
                    events.append(
                        RegraspEvent(scheme.owner, prev.end, prev.end_index,
                                     prev.grasp_id, seg.grasp_id)
                    )
            events.sort(key=lambda e: (e.grid_index, e.robot))
            rank = self._rank
            self._rank += 1
            return Assignment(tuple(combo), tuple(events), rank, optimal=(rank == 0))
        return None


def allocate(coverages: list[RobotCoverage], leader: int = 0,
             resolution: int | None = None) -> tuple[Assignment, AssignmentSearch]:
    """Best assignment plus the search handle for alternatives.

    Raises NoCoverError when some robot cannot cover [0, 1] at all and
    AssignmentInfeasibleError when no combination satisfies distinctness.
    """
    search = AssignmentSearch(coverages, leader, resolution)
    first = search.next_assignment()
    if first is None:
        raise AssignmentInfeasibleError(
            "no assignment satisfies the distinct-grasp constraint"
        )
    return first, search


def next_alternative(search: AssignmentSearch) -> Assignment | None:
    """The next-best unattempted assignment, or None when exhausted."""
    return search.next_assignment()
