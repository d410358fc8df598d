"""Geodesic extraction from a solved action map, and path energies.

Back-tracking integrates x' proportional to minus the optimal direction of
the metric against the interpolated gradient of the action map (Heun
steps, a quarter cell per step), falling back to discrete descent (a jump
to the minimizing boundary point of the current cell's stencil) whenever
the continuous flow stalls near weakly-causal corners.  Traced paths are
reversed into source-to-target order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ElastipathError, TraceError
from .grid import GridSpec3, LiftedIndex, LiftedPoint, LiftedVector, wrap_angle
from .interp import bilinear, trilinear
from .metrics import MetricBase, optimal_direction
from .solver import ActionMap
from .stencils import StencilPolicy, StencilSet

TWO_PI = 2.0 * math.pi

DEFAULT_STEP_FACTOR = 0.25   # of one grid cell, in grid units
STALL_WINDOW = 10            # consecutive low-progress steps before fallback


@dataclass
class LiftedPath:
    """Ordered lifted points from source to target with the arc step used."""

    points: list
    step: float

    def __len__(self):
        return len(self.points)

    def spatial(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points])

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y, p.theta] for p in self.points])


@dataclass
class PathEnergy:
    value: float
    contributions: list = field(default_factory=list)


def wrapped_delta(a: float, b: float) -> float:
    """Shortest signed angular step from a to b."""
    d = math.fmod(b - a, TWO_PI)
    if d > math.pi:
        d -= TWO_PI
    elif d <= -math.pi:
        d += TWO_PI
    return d


# ---------------------------------------------------------------------------
# Gradient field
# ---------------------------------------------------------------------------

def _finite_differences(U: np.ndarray, axis: int, spacing: float, periodic: bool) -> np.ndarray:
    """Central differences, one-sided where a neighbor is missing or +inf."""
    if periodic:
        up = np.roll(U, -1, axis=axis)
        dn = np.roll(U, 1, axis=axis)
    else:
        pad = [(0, 0)] * U.ndim
        pad[axis] = (0, 1)
        up = np.pad(U, pad, constant_values=np.inf)
        idx = [slice(None)] * U.ndim
        idx[axis] = slice(1, None)
        up = up[tuple(idx)]
        pad = [(0, 0)] * U.ndim
        pad[axis] = (1, 0)
        dn = np.pad(U, pad, constant_values=np.inf)
        idx[axis] = slice(0, U.shape[axis])
        dn = dn[tuple(idx)]
    ok_up = np.isfinite(up)
    ok_dn = np.isfinite(dn)
    with np.errstate(invalid="ignore"):
        central = (up - dn) / (2 * spacing)
        fwd = (up - U) / spacing
        bwd = (U - dn) / spacing
    g = np.where(ok_up & ok_dn, central, np.where(ok_up, fwd, np.where(ok_dn, bwd, 0.0)))
    return np.where(np.isfinite(U), np.where(np.isfinite(g), g, 0.0), 0.0)


def gradient_field(amap: ActionMap) -> np.ndarray:
    """Per-node gradient of the action map (theta axis periodic)."""
    U = amap.values
    grid = amap.grid
    if amap.lifted:
        gx = _finite_differences(U, 0, grid.spacing, False)
        gy = _finite_differences(U, 1, grid.spacing, False)
        gt = _finite_differences(U, 2, grid.theta_step, True)
        return np.stack([gx, gy, gt], axis=-1)
    gx = _finite_differences(U, 0, grid.spacing, False)
    gy = _finite_differences(U, 1, grid.spacing, False)
    return np.stack([gx, gy], axis=-1)


# ---------------------------------------------------------------------------
# Tracing
# ---------------------------------------------------------------------------

def _near_source(p, sources, grid, lifted: bool) -> LiftedIndex | None:
    h = grid.spacing
    for s in sources:
        if abs(p[0] - s.i * h) <= h and abs(p[1] - s.j * h) <= h:
            if not lifted:
                return s
            if abs(wrapped_delta(s.k * grid.theta_step, p[2])) <= grid.theta_step:
                return s
    return None


def trace_geodesic(amap: ActionMap, metric: MetricBase, target, source_set=None,
                   step_factor: float = DEFAULT_STEP_FACTOR, max_steps: int = 200_000,
                   policy: StencilPolicy | None = None) -> LiftedPath:
    """Back-track the geodesic from target into the source set and reverse it.

    ``source_set`` defaults to the map's own sources.  Raises TraceError
    (carrying the partial path) if the descent exceeds ``max_steps``.
    """
    grid = amap.grid
    lifted = amap.lifted
    h = grid.spacing
    ts = grid.theta_step if lifted else 1.0
    if source_set is None:
        sources = list(amap.sources)
        source_points = [None] * len(sources)
    else:
        sources, source_points = [], []
        for s in source_set:
            if isinstance(s, LiftedIndex):
                sources.append(s)
                source_points.append(None)
            else:
                sources.append(_point_index(s, grid, lifted))
                source_points.append(s if isinstance(s, LiftedPoint) else None)

    t_idx = _point_index(target, grid, lifted)
    if not amap.is_accepted(t_idx):
        raise TraceError(f"target {target} was not reached by the solve")

    finite_max = np.nanmax(np.where(np.isfinite(amap.values), amap.values, np.nan))
    U_f = np.where(np.isfinite(amap.values), amap.values, 2.0 * finite_max + 1.0)
    G = gradient_field(amap)
    stencils = StencilSet(grid, metric, policy or StencilPolicy())

    def u_at(p):
        if lifted:
            return float(trilinear(U_f, grid, p[0], p[1], p[2]))
        return float(bilinear(U_f, grid, p[0], p[1]))

    def grad_at(p):
        if lifted:
            return np.asarray(trilinear(G, grid, p[0], p[1], p[2]), dtype=float)
        return np.asarray(bilinear(G, grid, p[0], p[1]), dtype=float)

    def unit_dir(p):
        g = grad_at(p)
        if not np.all(np.isfinite(g)) or not np.any(g):
            return None
        point = LiftedPoint(p[0], p[1], p[2]) if lifted else (p[0], p[1])
        try:
            psi = optimal_direction(metric, point, g)
        except Exception:
            return None
        d = -psi
        if lifted:
            gu = np.array([d[0] / h, d[1] / h, d[2] / ts])
        else:
            gu = d / h
        n = float(np.linalg.norm(gu))
        if n < 1e-14:
            return None
        return gu / n

    def advance(p, gu, factor):
        q = list(p)
        q[0] = min(max(q[0] + gu[0] * factor * h, 0.0), (grid.width - 1) * h)
        q[1] = min(max(q[1] + gu[1] * factor * h, 0.0), (grid.height - 1) * h)
        if lifted:
            q[2] = wrap_angle(q[2] + gu[2] * factor * ts)
        return q

    if lifted:
        p = [target.x, target.y, target.theta] if isinstance(target, LiftedPoint) else list(target)
    else:
        p = [target[0], target[1]] if not isinstance(target, LiftedPoint) else [target.x, target.y]

    connect_radius = max(2.0, float(max(
        (st.radius() for st in [stencils.get(s) for s in sources]), default=2
    )))

    def direct_connect(p):
        """Close with a straight segment once one is consistent with the map.

        Within a stencil radius of the source the interpolated gradient
        degenerates (the value cone's upwind side is steep); when a source
        lift is in that window and the straight closing segment costs no
        more than the remaining value (with slack), take it.
        """
        u_here = u_at(p)
        for s in sources:
            dx = s.i * h - p[0]
            dy = s.j * h - p[1]
            if abs(dx) > connect_radius * h or abs(dy) > connect_radius * h:
                continue
            if lifted:
                dth = wrapped_delta(p[2], s.k * ts)
                mid = LiftedPoint(p[0] + dx / 2, p[1] + dy / 2,
                                  wrap_angle(p[2] + dth / 2))
                cost = metric.eval(mid, LiftedVector((-dx, -dy), -dth))
            else:
                mid = (p[0] + dx / 2, p[1] + dy / 2)
                cost = metric.eval(mid, (-dx, -dy))
            if cost <= 1.25 * u_here + 1e-9:
                return s
        return None

    pts = [list(p)]
    stall = 0
    flips = 0
    last_gu = None
    discrete_mode = False
    u_prev = u_at(p)
    eps_progress = 1e-6 * max(u_prev, 1.0)

    src_hit = _near_source(p, sources, grid, lifted)
    if src_hit is None:
        src_hit = direct_connect(p)
    for _ in range(max_steps):
        if src_hit is not None:
            break
        if discrete_mode:
            p = _discrete_jump(p, amap, metric, stencils, grid, lifted)
            if p is None:
                raise TraceError("discrete descent found no finite neighbor",
                                 partial_path=_finish(pts, grid, lifted, step_factor))
            pts.append(list(p))
            src_hit = _near_source(p, sources, grid, lifted)
            if src_hit is None:
                src_hit = direct_connect(p)
            continue

        gu = unit_dir(p)
        if gu is None:
            discrete_mode = True
            continue
        mid = advance(p, gu, step_factor)
        gu2 = unit_dir(mid)
        if gu2 is not None:
            avg = gu + gu2
            n = float(np.linalg.norm(avg))
            if n > 1e-14:
                gu = avg / n
        # direction reversals mean the interpolated flow is oscillating
        # (value-cone corner); hand over to discrete descent
        if last_gu is not None and float(gu[:2] @ last_gu[:2]) < 0.0:
            flips += 1
            if flips >= 2:
                discrete_mode = True
                continue
        else:
            flips = 0
        last_gu = gu
        p = advance(p, gu, step_factor)
        pts.append(list(p))
        src_hit = _near_source(p, sources, grid, lifted)
        if src_hit is None:
            src_hit = direct_connect(p)

        u_now = u_at(p)
        if u_prev - u_now < eps_progress:
            stall += 1
            if stall >= STALL_WINDOW:
                discrete_mode = True
        else:
            stall = 0
        u_prev = u_now
    else:
        raise TraceError(f"descent did not reach a source within {max_steps} steps",
                         partial_path=_finish(pts, grid, lifted, step_factor))

    if src_hit is not None:
        exact = None
        for s, sp in zip(sources, source_points):
            if s == src_hit and sp is not None:
                exact = sp
                break
        if exact is not None:
            pts.append([exact.x, exact.y, exact.theta] if lifted else [exact.x, exact.y])
        elif lifted:
            pts.append([src_hit.i * h, src_hit.j * h, src_hit.k * ts])
        else:
            pts.append([src_hit.i * h, src_hit.j * h])
    pts.reverse()
    return _finish(pts, grid, lifted, step_factor)


def _point_index(p, grid, lifted: bool) -> LiftedIndex:
    from .grid import point_to_nearest_index
    if lifted:
        lp = p if isinstance(p, LiftedPoint) else LiftedPoint(p[0], p[1], p[2])
        return point_to_nearest_index(lp, grid)
    x, y = (p.x, p.y) if isinstance(p, LiftedPoint) else (p[0], p[1])
    return LiftedIndex(int(round(x / grid.spacing)), int(round(y / grid.spacing)), 0)


def _finish(pts, grid, lifted: bool, step_factor: float) -> LiftedPath:
    out = []
    for q in pts:
        if lifted:
            out.append(LiftedPoint(q[0], q[1], q[2]))
        else:
            out.append(LiftedPoint(q[0], q[1], 0.0))
    if len(out) == 1:
        out.append(out[0])
    return LiftedPath(points=out, step=step_factor * grid.spacing)


def _discrete_jump(p, amap, metric, stencils, grid, lifted):
    """Jump to the minimizing boundary point of the nearest node's stencil."""
    idx = _point_index(LiftedPoint(p[0], p[1], p[2] if lifted else 0.0), grid, lifted)
    st = stencils.get(idx)
    best_val, best_point = _hopf_lax_argmin(idx, amap, st, metric, grid, lifted)
    if best_point is None:
        # fall back to the best finite vertex
        best = None
        for v in st.vertices:
            val = amap.value_at(v)
            if math.isfinite(val) and (best is None or val < best[0]):
                best = (val, v)
        if best is None:
            return None
        v = best[1]
        return [v.i * grid.spacing, v.j * grid.spacing,
                v.k * grid.theta_step if lifted else 0.0]
    return best_point


def _hopf_lax_argmin(x: LiftedIndex, amap: ActionMap, S, metric, grid, lifted):
    """Minimizing boundary point of the local update (continuous coordinates)."""
    h = grid.spacing
    ts = grid.theta_step if lifted else 1.0
    K = grid.n_theta if lifted else 1
    best = (math.inf, None)
    vals = np.array([amap.value_at(v) for v in S.vertices])
    # reuse the public operator for the value, then localize the argmin by
    # dense barycentric sampling of each face (tracer-side only)
    faces = set()
    for facet in list(S.boundary_facets) + list(S.extra_faces):
        f = tuple(facet)
        faces.add(f)
        for a in range(len(f)):
            faces.add((f[a],))
            for b in range(a + 1, len(f)):
                faces.add((min(f[a], f[b]), max(f[a], f[b])))
    if lifted:
        from .grid import index_to_point
        xp = index_to_point(x, grid)
        M, omega = metric.randers_at(xp)
    else:
        M2, omega2 = metric.randers_at((x.i * h, x.j * h))
        M = np.eye(3)
        M[:2, :2] = M2
        omega = np.zeros(3)
        omega[:2] = omega2

    drel = np.zeros((len(S.vertices), 3))
    for n, v in enumerate(S.vertices):
        dk = ((v.k - x.k + K // 2) % K - K // 2) if lifted else 0
        drel[n] = [-(v.i - x.i) * h, -(v.j - x.j) * h, -dk * ts]

    bgrid = np.linspace(0.0, 1.0, 9)
    for f in faces:
        c = vals[list(f)]
        if not np.all(np.isfinite(c)):
            continue
        D = drel[list(f)]
        if len(f) == 1:
            w = D[0]
            val = c[0] + math.sqrt(w @ M @ w) - omega @ w
            if val < best[0]:
                best = (val, [x, f, np.array([1.0])])
            continue
        if len(f) == 2:
            for t in bgrid:
                b = np.array([1 - t, t])
                w = b @ D
                val = float(b @ c + math.sqrt(w @ M @ w) - omega @ w)
                if val < best[0]:
                    best = (val, [x, f, b])
        else:
            for t1 in bgrid:
                for t2 in bgrid:
                    if t1 + t2 > 1.0:
                        continue
                    b = np.array([1 - t1 - t2, t1, t2])
                    w = b @ D
                    val = float(b @ c + math.sqrt(w @ M @ w) - omega @ w)
                    if val < best[0]:
                        best = (val, [x, f, b])
    if best[1] is None:
        return math.inf, None
    x, f, b = best[1]
    px = x.i * h
    py = x.j * h
    pt = x.k * ts if lifted else 0.0
    yx = px - float(b @ drel[list(f), 0])
    yy = py - float(b @ drel[list(f), 1])
    yt = pt - float(b @ drel[list(f), 2]) if lifted else 0.0
    return best[0], [yx, yy, wrap_angle(yt) if lifted else 0.0]


# ---------------------------------------------------------------------------
# Path energy and canonical lifting
# ---------------------------------------------------------------------------

def path_energy(path: LiftedPath, metric: MetricBase) -> PathEnergy:
    """Midpoint-rule energy of a lifted polyline under the metric.

    Each segment contributes F(midpoint, displacement) with the angular
    displacement wrapped to the short way around; the 1-homogeneity of the
    metric absorbs the parameter measure.
    """
    pts = path.points
    if len(pts) < 2:
        raise ElastipathError("path energy needs at least 2 points")
    contributions = []
    for a, b in zip(pts[:-1], pts[1:]):
        dx = b.x - a.x
        dy = b.y - a.y
        dth = wrapped_delta(a.theta, b.theta)
        mid = LiftedPoint(0.5 * (a.x + b.x), 0.5 * (a.y + b.y),
                          wrap_angle(a.theta + 0.5 * dth))
        if metric.dim == 3:
            f = metric.eval(mid, LiftedVector((dx, dy), dth))
        else:
            f = metric.eval((mid.x, mid.y), (dx, dy))
        contributions.append(float(f))
    return PathEnergy(value=float(np.sum(contributions)), contributions=contributions)


def canonical_lifting(polyline: np.ndarray, closed: bool = False) -> LiftedPath:
    """Lift a planar polyline by its tangent angle, unwrapped continuously.

    Vertex orientations are the average of adjacent segment directions
    (endpoints take their single segment's direction; closed polylines wrap
    around), so uniformly-turning curves lift with midpoint-exact tangents.
    """
    pts = np.asarray(polyline, dtype=float)
    if len(pts) < 2:
        raise ElastipathError("polyline needs at least 2 points")
    d = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(d, axis=1)
    if np.any(seg_len == 0.0):
        raise ElastipathError("repeated consecutive points in polyline")
    phi = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    theta = np.empty(len(pts))
    theta[1:-1] = 0.5 * (phi[:-1] + phi[1:])
    if closed:
        gap = wrapped_delta(phi[-1], phi[0])
        theta[0] = phi[0] - 0.5 * gap
        theta[-1] = phi[-1] + 0.5 * gap
    else:
        theta[0] = phi[0]
        theta[-1] = phi[-1]
    out = [LiftedPoint(p[0], p[1], t) for p, t in zip(pts, theta)]
    return LiftedPath(points=out, step=float(seg_len.mean()))


def turning_rates(path: LiftedPath) -> np.ndarray:
    """Discrete orientation rate per segment: wrapped dtheta over arc length."""
    pts = path.points
    rates = []
    for a, b in zip(pts[:-1], pts[1:]):
        ds = math.hypot(b.x - a.x, b.y - a.y)
        if ds == 0:
            rates.append(0.0)
            continue
        rates.append(wrapped_delta(a.theta, b.theta) / ds)
    return np.array(rates)
