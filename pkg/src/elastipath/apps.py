"""Interactive applications built on the solver and tracer.

Three procedures share one pattern: lift user points to oriented pairs,
run early-aborted marches, and join the chosen lifts by traced geodesics.

* closed contour detection: greedy nearest-neighbor tour over the lifted
  seed pairs, one march per chosen vertex, closed back to the start;
* perceptual grouping: the same greedy walk, except the start vertex is
  re-inserted so the walk can close on it, and leftover seeds seed new
  groups until the budget or the pool is exhausted;
* tubular extraction: both lifts of one physical source propagate once,
  each end keeps whichever of its two lifts the front reaches first.

Because the metric is asymmetric, the orientation sign of every chosen
lift matters; junctions are smooth by construction since consecutive
segments share the exact lifted vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SeedError, TraceError
from .features import (
    Image,
    OrientedFluxResult,
    optimal_orientation,
    oriented_flux,
    speed_function,
    steerable_edge_response,
)
from .grid import (
    GridSpec3,
    LiftedIndex,
    LiftedPoint,
    antipode,
    index_to_point,
    point_to_nearest_index,
)
from .metrics import DataDrivenElasticaMetric, ElasticaParams, MetricBase
from .solver import fast_march
from .stencils import StencilPolicy
from .tracer import LiftedPath, path_energy, trace_geodesic


@dataclass(frozen=True)
class SeedSpec:
    """User seed: physical position plus an optional orientation."""

    x: float
    y: float
    theta: float | None = None


@dataclass
class OrientedSeedSet:
    """Antipodal lift pairs of distinct physical seed points (grid-snapped)."""

    lifts: list        # lifts[i][0] = (x_i, theta_i), lifts[i][1] = antipode
    grid: GridSpec3

    @classmethod
    def from_seeds(cls, seeds, grid: GridSpec3) -> "OrientedSeedSet":
        pts = []
        seen = set()
        for s in seeds:
            if s.theta is None:
                raise SeedError(f"seed ({s.x}, {s.y}) is missing an orientation")
            idx = point_to_nearest_index(LiftedPoint(s.x, s.y, s.theta), grid)
            if (idx.i, idx.j) in seen:
                raise SeedError(f"duplicate physical seed at pixel ({idx.i}, {idx.j})")
            seen.add((idx.i, idx.j))
            snapped = index_to_point(idx, grid)
            pts.append((snapped, antipode(snapped)))
        self = cls(lifts=pts, grid=grid)
        return self

    def __len__(self):
        return len(self.lifts)

    def lift(self, i: int, s: int) -> LiftedPoint:
        return self.lifts[i][s]


@dataclass
class ContourResult:
    chi: list                      # ordered (from_lift, to_lift) pairs
    segments: list                 # LiftedPath per pair, source -> target
    energies: list
    vertex_order: list             # (seed index, lift sign) per chosen vertex
    closed: bool
    solve_count: int

    def concatenated(self) -> np.ndarray:
        return np.vstack([s.as_array() for s in self.segments])


@dataclass
class Group:
    vertex_order: list
    chi: list
    segments: list
    energies: list
    closed: bool


@dataclass
class GroupingResult:
    groups: list
    solve_count: int


@dataclass
class TubularResult:
    centerlines: list              # LiftedPath or None per end
    chosen_lifts: list             # (source lift sign, end lift sign) or None
    energies: list
    errors: list                   # per-end message or None
    source_lifts: tuple
    solve_count: int


# ---------------------------------------------------------------------------
# Metric construction from images
# ---------------------------------------------------------------------------

@dataclass
class BoundaryFeatures:
    response: object
    speed: object
    metric: DataDrivenElasticaMetric
    grid: GridSpec3


@dataclass
class TubularFeatures:
    flux: OrientedFluxResult
    speed: object
    metric: DataDrivenElasticaMetric
    theta_map: np.ndarray
    grid: GridSpec3


def boundary_metric(img: Image, params: ElasticaParams, sigma: float = 2.0,
                    order: int = 5, eta: float = 10.0, p: float = 2.0,
                    n_theta: int = 72) -> BoundaryFeatures:
    """Edge-driven curvature-penalized metric for contour applications."""
    grid = GridSpec3(img.grid, n_theta)
    resp = steerable_edge_response(img, sigma, order=order, n_theta=n_theta)
    speed = speed_function(resp, eta=eta, p=p)
    metric = DataDrivenElasticaMetric(params, grid, speed.phi)
    return BoundaryFeatures(response=resp, speed=speed, metric=metric, grid=grid)


def tubular_metric(img: Image, params: ElasticaParams, sigma: float = 1.0,
                   radii=tuple(range(1, 9)), eta: float = 10.0, p: float = 2.0,
                   n_theta: int = 72) -> TubularFeatures:
    """Flux-driven metric plus the optimal-orientation map for centerlines."""
    grid = GridSpec3(img.grid, n_theta)
    flux = oriented_flux(img, sigma, radii=radii, n_theta=n_theta)
    speed = speed_function(flux.response, eta=eta, p=p)
    metric = DataDrivenElasticaMetric(params, grid, speed.phi)
    theta_map = optimal_orientation(flux.response)
    return TubularFeatures(flux=flux, speed=speed, metric=metric,
                           theta_map=theta_map, grid=grid)


# ---------------------------------------------------------------------------
# Greedy vertex selection machinery
# ---------------------------------------------------------------------------

def _march_to_candidates(metric, source: LiftedPoint, candidates: dict,
                         policy) -> tuple:
    """March from one lift until the first candidate is reached.

    ``candidates`` maps (seed, sign) -> LiftedPoint.  Returns the winning
    key, its arrival value and the action map (None if nothing reachable).
    Ties on the arrival value resolve to the lowest (seed, sign).
    """
    if not candidates:
        return None, math.inf, None
    amap, _ = fast_march(metric, [source], stops=[list(candidates.values())],
                         policy=policy)
    best_key, best_val = None, math.inf
    for key in sorted(candidates):
        p = candidates[key]
        idx = point_to_nearest_index(p, metric.grid)
        if amap.is_accepted(idx):
            val = amap.value_at(idx)
            if val < best_val - 1e-15:
                best_key, best_val = key, val
    return best_key, best_val, amap


def _first_pair(seeds: OrientedSeedSet, metric, start: int, active: dict, policy):
    """First two tour vertices: march from both lifts of the start seed and
    keep the side whose nearest candidate arrives sooner."""
    results = []
    for sign in (0, 1):
        src = seeds.lift(start, sign)
        key, val, amap = _march_to_candidates(metric, src, active, policy)
        results.append((val, sign, key, amap))
    results.sort(key=lambda r: (r[0], r[1]))
    val, sign, key, amap = results[0]
    if key is None:
        raise SeedError("no seed is reachable from the start point")
    return (start, sign), key, amap


def _trace_segment(amap, metric, source: LiftedPoint, target: LiftedPoint,
                   policy) -> LiftedPath:
    return trace_geodesic(amap, metric, target, source_set=[source], policy=policy)


# ---------------------------------------------------------------------------
# Applications
# ---------------------------------------------------------------------------

def detect_closed_contour(seeds: OrientedSeedSet, metric: MetricBase,
                          policy: StencilPolicy | None = None) -> ContourResult:
    """Greedy piecewise-geodesic closed contour through all lifted seeds.

    Starts at seed 0, picks the winning lift of the first pair, then
    repeatedly marches from the newest vertex to the nearest remaining
    seed (removing both of its lifts), and closes back to the first
    vertex.  Junctions share exact lifted endpoints.
    """
    m = len(seeds)
    if m < 2:
        raise SeedError("closed contour detection needs at least 2 seeds")
    active = {(i, s): seeds.lift(i, s) for i in range(1, m) for s in (0, 1)}
    q1_key, q2_key, amap = _first_pair(seeds, metric, 0, active, policy)
    solves = 2

    order = [q1_key, q2_key]
    chi, segments, energies = [], [], []
    q1 = seeds.lift(*q1_key)
    q2 = seeds.lift(*q2_key)
    seg = _trace_segment(amap, metric, q1, q2, policy)
    chi.append((q1, q2))
    segments.append(seg)
    energies.append(path_energy(seg, metric).value)
    for s in (0, 1):
        active.pop((q2_key[0], s), None)

    prev = q2
    while active:
        key, _, amap = _march_to_candidates(metric, prev, active, policy)
        solves += 1
        if key is None:
            raise SeedError(
                f"seed {sorted(active)[0][0]} is unreachable from the current vertex"
            )
        nxt = seeds.lift(*key)
        seg = _trace_segment(amap, metric, prev, nxt, policy)
        chi.append((prev, nxt))
        segments.append(seg)
        energies.append(path_energy(seg, metric).value)
        order.append(key)
        for s in (0, 1):
            active.pop((key[0], s), None)
        prev = nxt

    # close the tour back to the first vertex
    amap, _ = fast_march(metric, [prev], stops=[q1], policy=policy)
    solves += 1
    idx = point_to_nearest_index(q1, metric.grid)
    if not amap.is_accepted(idx):
        raise SeedError("closing vertex is unreachable")
    seg = _trace_segment(amap, metric, prev, q1, policy)
    chi.append((prev, q1))
    segments.append(seg)
    energies.append(path_energy(seg, metric).value)

    return ContourResult(chi=chi, segments=segments, energies=energies,
                         vertex_order=order, closed=True, solve_count=solves)


def perceptual_grouping(seeds: OrientedSeedSet, n_max: int, metric: MetricBase,
                        policy: StencilPolicy | None = None) -> GroupingResult:
    """Partition (part of) the seed set into closed curves, greedily.

    Each group starts from the lowest-index unused seed; its start lift is
    re-inserted into the pool so the walk can close on it.  Groups are
    reported open if the pool empties before the start vertex recurs.
    Seeds may stay unused.
    """
    if len(seeds) < 2:
        raise SeedError("perceptual grouping needs at least 2 seeds")
    remaining = {(i, s): seeds.lift(i, s) for i in range(len(seeds)) for s in (0, 1)}
    groups = []
    solves = 0

    while len(groups) < n_max and remaining:
        start_seed = min(i for (i, _s) in remaining)
        for s in (0, 1):
            remaining.pop((start_seed, s), None)
        if not remaining:
            break
        try:
            q1_key, q2_key, amap = _first_pair(seeds, metric, start_seed, remaining, policy)
        except SeedError:
            break
        solves += 2
        q1 = seeds.lift(*q1_key)
        order = [q1_key, q2_key]
        chi, segments, energies = [], [], []
        prev = seeds.lift(*q2_key)
        seg = _trace_segment(amap, metric, q1, prev, policy)
        chi.append((q1, prev))
        segments.append(seg)
        energies.append(path_energy(seg, metric).value)
        for s in (0, 1):
            remaining.pop((q2_key[0], s), None)
        remaining[q1_key] = q1  # allow the walk to close on the start lift

        closed = False
        while True:
            key, _, amap = _march_to_candidates(metric, prev, remaining, policy)
            solves += 1
            if key is None:
                break
            nxt = seeds.lift(*key)
            seg = _trace_segment(amap, metric, prev, nxt, policy)
            chi.append((prev, nxt))
            segments.append(seg)
            energies.append(path_energy(seg, metric).value)
            if key == q1_key:
                remaining.pop(key, None)
                closed = True
                break
            order.append(key)
            for s in (0, 1):
                remaining.pop((key[0], s), None)
            prev = nxt
        groups.append(Group(vertex_order=order, chi=chi, segments=segments,
                            energies=energies, closed=closed))
    return GroupingResult(groups=groups, solve_count=solves)


def extract_tubular(source_xy, ends_xy, features: TubularFeatures,
                    metric: MetricBase | None = None,
                    manual_thetas: dict | None = None,
                    policy: StencilPolicy | None = None) -> TubularResult:
    """Centerlines from one source to each end, one march for all of them.

    Physical points are lifted with the optimal-orientation map (or a
    manual override); both source lifts propagate together and each end
    keeps whichever of its two lifts is reached first.  Ends the front
    cannot reach get a per-end error and a None path.
    """
    metric = metric or features.metric
    grid = features.grid
    manual = manual_thetas or {}

    def lift_pair(pt, key):
        if key in manual:
            th = manual[key]
        else:
            idx_i = int(round(pt[0] / grid.spacing))
            idx_j = int(round(pt[1] / grid.spacing))
            th = float(features.theta_map[idx_i, idx_j])
        base = index_to_point(
            point_to_nearest_index(LiftedPoint(pt[0], pt[1], th), grid), grid
        )
        return base, antipode(base)

    s_bar = lift_pair(source_xy, "source")
    end_pairs = [lift_pair(p, n) for n, p in enumerate(ends_xy)]

    stops = [list(pair) for pair in end_pairs]
    amap, _ = fast_march(metric, list(s_bar), stops=stops, policy=policy)

    centerlines, chosen, energies, errors = [], [], [], []
    for pair in end_pairs:
        vals = []
        for s, p in enumerate(pair):
            idx = point_to_nearest_index(p, grid)
            vals.append((amap.value_at(idx) if amap.is_accepted(idx) else math.inf, s))
        vals.sort()
        if not math.isfinite(vals[0][0]):
            centerlines.append(None)
            chosen.append(None)
            energies.append(math.inf)
            errors.append("end point unreachable")
            continue
        s_win = vals[0][1]
        target = pair[s_win]
        try:
            seg = trace_geodesic(amap, metric, target, source_set=list(s_bar),
                                 policy=policy)
            src_sign = 0
            if seg.points:
                first = seg.points[0]
                if (abs(first.x - s_bar[1].x) < 1e-9 and abs(first.y - s_bar[1].y) < 1e-9
                        and abs(first.theta - s_bar[1].theta) < 1e-9):
                    src_sign = 1
            centerlines.append(seg)
            chosen.append((src_sign, s_win))
            energies.append(path_energy(seg, metric).value)
            errors.append(None)
        except TraceError as err:
            centerlines.append(None)
            chosen.append(None)
            energies.append(math.inf)
            errors.append(str(err))
    return TubularResult(centerlines=centerlines, chosen_lifts=chosen,
                         energies=energies, errors=errors,
                         source_lifts=s_bar, solve_count=1)
