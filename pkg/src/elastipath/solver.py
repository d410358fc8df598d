"""Geodesic distance solves: fast marching and the fixed-point oracle.

``fast_march`` runs the single-pass label-setting scheme: initialize all
nodes to +inf, sources to 0, then repeatedly accept the minimal trial node
and recompute the local update for every not-yet-accepted node whose
stencil contains it, keeping the running minimum.  ``agsi_solve`` iterates
the same local operator in alternating node orderings until the map stops
changing; its fixed point does not depend on acceptance order, which makes
it the correctness oracle for the (not provably causal) adaptive stencils.

Both paths share the face tables built here: every stencil facet is
decomposed into simplex faces with precomputed inverse Gram data (see
``_kernels`` for the per-face closed form).
"""

from __future__ import annotations


import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, OutOfDomainError, SeedError, SolverError
from .grid import (
    GridSpec2,
    GridSpec3,
    LiftedIndex,
    LiftedPoint,
    point_to_nearest_index,
)
from .metrics import MetricBase
from .stencils import StencilPolicy, StencilSet, Stencil

FAR, TRIAL, ACCEPTED = _kernels.FAR, _kernels.TRIAL, _kernels.ACCEPTED

# acceptance-order monotonicity slack, relative; violations beyond this
# indicate a stencil too far from causal and abort the solve
MONOTONE_TOL = 1e-9


@dataclass
class SolveStats:
    accepted_count: int
    hopf_lax_update_count: int
    mean_updates_per_node: float
    wall_time: float
    monotonicity_violations: int = 0

    def as_dict(self) -> dict:
        return {
            "accepted_count": self.accepted_count,
            "hopf_lax_update_count": self.hopf_lax_update_count,
            "mean_updates_per_node": self.mean_updates_per_node,
            "wall_time": self.wall_time,
            "monotonicity_violations": self.monotonicity_violations,
        }


class ActionMap:
    """Grid-sampled geodesic distance with per-node solver tags.

    ``values`` has shape (W, H, K) on lifted grids and (W, H) on planar
    ones; unreached nodes hold +inf and the Far tag.
    """

    def __init__(self, grid, values: np.ndarray, tags: np.ndarray, sources: list):
        self.grid = grid
        self.values = values
        self.tags = tags
        self.sources = sources
        self.lifted = isinstance(grid, GridSpec3)
        self.stats: SolveStats | None = None

    def value_at(self, idx: LiftedIndex) -> float:
        if self.lifted:
            return float(self.values[idx.i, idx.j, idx.k])
        return float(self.values[idx.i, idx.j])

    def tag_at(self, idx: LiftedIndex) -> int:
        if self.lifted:
            return int(self.tags[idx.i, idx.j, idx.k])
        return int(self.tags[idx.i, idx.j])

    def is_accepted(self, idx: LiftedIndex) -> bool:
        return self.tag_at(idx) == ACCEPTED


# ---------------------------------------------------------------------------
# Face tables
# ---------------------------------------------------------------------------

def _face_is_causal(G: np.ndarray, wd: np.ndarray) -> bool:
    """Generalized acuteness of one simplex face under the owner's metric.

    Sufficient (and generator-exact by concavity) condition that every
    feasible stationary value dominates the vertex values it uses:

        <d_i, M d_j>  >=  max(<omega, d_i>, 0) * |d_j|_M   for all i != j,

    expressed through the Gram G[i, j] = <d_i, M d_j> and the drift
    products wd[i] = <omega, d_i>.  Faces failing it are dropped from the
    searched set (their sub-faces remain), which keeps the local operator
    monotone AND causal, so the single-pass solve computes its unique
    fixed point.
    """
    m = len(wd)
    for i in range(m):
        wplus = max(wd[i], 0.0)
        for j in range(m):
            if i == j:
                continue
            if G[i, j] < wplus * math.sqrt(G[j, j]) - 1e-12:
                return False
    return True


def _enumerate_faces(tris: np.ndarray, extras: list, n_vertices: int) -> list[tuple]:
    """All searched simplex faces: surface cells, sheet cells, edges, vertices."""
    cells = [tuple(int(v) for v in f) for f in tris]
    cells.extend(tuple(int(v) for v in f) for f in extras)
    seen = set()
    faces = []
    edges = set()
    for f in cells:
        if f in seen:
            continue
        seen.add(f)
        faces.append(f)
        for a in range(len(f)):
            for b in range(a + 1, len(f)):
                edges.add((min(f[a], f[b]), max(f[a], f[b])))
    faces.extend(sorted(edges))
    faces.extend((v,) for v in range(n_vertices))
    return faces


class _Tables:
    """Flat kernel arrays for one (grid, metric model, stencil policy)."""

    def __init__(self, metric: MetricBase, policy: StencilPolicy):
        model = metric.solver_model()
        grid = model["grid"]
        self.metric = metric
        self.policy = policy
        self.grid = grid
        self.lifted = isinstance(grid, GridSpec3)
        W, H = grid.width, grid.height
        K = grid.n_theta if self.lifted else 1
        self.W, self.H, self.K = W, H, K
        self.N = W * H * K
        h = grid.spacing
        ts = grid.theta_step if self.lifted else 1.0

        self.tensor_mode = 1 if model["kind"] == "tensor2d" else 0
        if self.tensor_mode:
            tensors = model["tensors"]
            self.t11 = np.ascontiguousarray(tensors[:, :, 0, 0]).ravel()
            self.t12 = np.ascontiguousarray(tensors[:, :, 0, 1]).ravel()
            self.t22 = np.ascontiguousarray(tensors[:, :, 1, 1]).ravel()
            M0 = np.array([1.0, 1.0, 1.0])
            omega0 = np.zeros((K, 3))
            scale = None
        else:
            M0 = np.asarray(model["M0"], dtype=float)
            if len(M0) == 2:
                M0 = np.array([M0[0], M0[1], 1.0])
            omega0 = np.asarray(model["omega0"], dtype=float)
            if omega0.shape[1] == 2:
                omega0 = np.concatenate([omega0, np.zeros((len(omega0), 1))], axis=1)
            if len(omega0) == 1 and K > 1:
                omega0 = np.repeat(omega0, K, axis=0)
            self.t11 = self.t12 = self.t22 = np.zeros(1)
            scale = model.get("scale")
        if scale is None:
            self.scale = np.ones(self.N)
        else:
            self.scale = np.ascontiguousarray(scale, dtype=float).reshape(self.N)

        stencils = StencilSet(grid, metric, policy)
        self.stencils = stencils

        face_start = [0]
        fm, fvo, fA0, fg0, fginv, fwd0, fgc = [], [], [], [], [], [], []
        entries_per_k: list[list] = [[] for _ in range(K)]
        role_uid = 0

        for t in range(K):
            offs, tris, extras = stencils.template_for(t)
            offs3 = np.zeros((len(offs), 3), dtype=np.int64)
            offs3[:, : offs.shape[1]] = offs
            faces = _enumerate_faces(tris, extras, len(offs))
            vertex_faces: dict[int, list[int]] = {v: [] for v in range(len(offs))}
            w_t = omega0[t]

            for f in faces:
                m = len(f)
                D = np.zeros((m, 3))
                for s_i, vid in enumerate(f):
                    D[s_i, 0] = -offs3[vid, 0] * h
                    D[s_i, 1] = -offs3[vid, 1] * h
                    D[s_i, 2] = -offs3[vid, 2] * ts
                G = (D * M0[None, :]) @ D.T
                det = np.linalg.det(G)
                if not det > 1e-12 * max(1.0, float(np.abs(G).max()) ** m):
                    continue  # face coplanar with the owner: covered by sub-faces
                if m > 1 and not self.tensor_mode and not _face_is_causal(G, D @ w_t):
                    continue
                Ginv = np.linalg.inv(G)
                g0 = Ginv.sum(axis=1)
                A0 = float(g0.sum())
                fid = len(fm)
                fm.append(m)
                vo = np.zeros((3, 3), dtype=np.int16)
                wd = np.zeros(3)
                gc = np.zeros((3, 3))
                for s_i, vid in enumerate(f):
                    vo[s_i] = offs3[vid]
                    wd[s_i] = float(D[s_i] @ w_t)
                    vertex_faces[vid].append(fid)
                if self.tensor_mode:
                    # Gram coefficient rows against (m11, m12, m22)
                    pairs = [(0, 0), (0, 1), (1, 1)][: (3 if m > 1 else 1)]
                    for row, (a, b) in enumerate(pairs):
                        if a < m and b < m:
                            gc[row, 0] = D[a, 0] * D[b, 0]
                            gc[row, 1] = D[a, 0] * D[b, 1] + D[a, 1] * D[b, 0]
                            gc[row, 2] = D[a, 1] * D[b, 1]
                fvo.append(vo)
                fA03 = np.zeros(3)
                fA03[: len(g0)] = g0
                fA0.append(A0)
                fg0.append(fA03)
                gi = np.zeros((3, 3))
                gi[:m, :m] = Ginv
                fginv.append(gi.reshape(9))
                fwd0.append(wd)
                fgc.append(gc)

            for vid in range(len(offs)):
                flist = vertex_faces[vid]
                if not flist:
                    continue
                o = offs3[vid]
                k_x = (t + int(o[2])) % K
                for fid in flist:
                    entries_per_k[k_x].append(
                        (role_uid, int(o[0]), int(o[1]), int(o[2]), fid)
                    )
                role_uid += 1
            face_start.append(len(fm))

        self.face_start = np.array(face_start, dtype=np.int64)
        self.fm = np.array(fm, dtype=np.int64)
        self.fvo = np.array(fvo, dtype=np.int16).reshape(-1, 3, 3)
        self.fA0 = np.array(fA0, dtype=np.float64)
        self.fg0 = np.array(fg0, dtype=np.float64).reshape(-1, 3)
        self.fginv = np.array(fginv, dtype=np.float64).reshape(-1, 9)
        self.fwd0 = np.array(fwd0, dtype=np.float64).reshape(-1, 3)
        self.fgc = np.array(fgc, dtype=np.float64).reshape(-1, 3, 3)

        ent_start = [0]
        odi, odj, odk, efid, erole = [], [], [], [], []
        for k in range(K):
            rows = sorted(entries_per_k[k])
            for role, oi, oj, ok, fid in rows:
                erole.append(role)
                odi.append(oi)
                odj.append(oj)
                odk.append(ok)
                efid.append(fid)
            ent_start.append(len(erole))
        self.ent_start = np.array(ent_start, dtype=np.int64)
        self.ent_odi = np.array(odi, dtype=np.int64)
        self.ent_odj = np.array(odj, dtype=np.int64)
        self.ent_odk = np.array(odk, dtype=np.int64)
        self.ent_fid = np.array(efid, dtype=np.int64)
        self.ent_role = np.array(erole, dtype=np.int64)

    def flat(self, idx: LiftedIndex) -> int:
        return (idx.i * self.H + idx.j) * self.K + idx.k

    def shape(self):
        return (self.W, self.H, self.K) if self.lifted else (self.W, self.H)


def tables_for(metric: MetricBase, policy: StencilPolicy | None = None) -> _Tables:
    """Build (or reuse) the kernel tables for a metric/policy pair."""
    policy = policy or StencilPolicy()
    cache = getattr(metric, "_solver_tables", None)
    if cache is None:
        cache = {}
        try:
            metric._solver_tables = cache
        except AttributeError:
            pass
    key = (policy.mode, policy.radius_cap)
    if key not in cache:
        cache[key] = _Tables(metric, policy)
    return cache[key]


# ---------------------------------------------------------------------------
# Source / stop plumbing
# ---------------------------------------------------------------------------

def _as_index(p, grid) -> LiftedIndex:
    if isinstance(p, LiftedIndex):
        return p
    if isinstance(grid, GridSpec3):
        if isinstance(p, LiftedPoint):
            return point_to_nearest_index(p, grid)
        x, y, theta = p
        return point_to_nearest_index(LiftedPoint(x, y, theta), grid)
    # planar: accept (x, y) pairs or LiftedPoint with ignored theta
    if isinstance(p, LiftedPoint):
        x, y = p.x, p.y
    else:
        x, y = p[0], p[1]
    i = int(round(x / grid.spacing))
    j = int(round(y / grid.spacing))
    if not (0 <= i < grid.width and 0 <= j < grid.height):
        raise OutOfDomainError(f"point ({x}, {y}) outside grid")
    return LiftedIndex(i, j, 0)


def _stop_arrays(stops, tables: _Tables):
    """CSR-ish arrays for grouped early abort.

    Each stop entry is a point or a sequence of alternative points; the
    solve aborts once every entry saw one of its alternatives accepted.
    """
    if not stops:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), 0
    nodes, gids = [], []
    for g, entry in enumerate(stops):
        alts = entry if isinstance(entry, (list, tuple)) and not _is_pointlike(entry) else [entry]
        for p in alts:
            nodes.append(tables.flat(_as_index(p, tables.grid)))
            gids.append(g)
    return (np.array(nodes, dtype=np.int64), np.array(gids, dtype=np.int64), len(stops))


def _is_pointlike(entry) -> bool:
    if isinstance(entry, (LiftedPoint, LiftedIndex)):
        return True
    return (
        isinstance(entry, (list, tuple))
        and len(entry) in (2, 3)
        and all(isinstance(v, (int, float)) for v in entry)
    )


# ---------------------------------------------------------------------------
# Public solves
# ---------------------------------------------------------------------------

def fast_march(metric: MetricBase, sources, stops=None,
               policy: StencilPolicy | None = None) -> tuple[ActionMap, SolveStats]:
    """Single-pass solve from the source set; see module docstring.

    ``stops``, when given, lists stop entries (a point, or a sequence of
    alternative points); the march aborts once every entry is reached.
    Accepted values at stop nodes equal their no-abort values.
    """
    if not sources:
        raise SeedError("at least one source point is required")
    tables = tables_for(metric, policy)
    src_idx = []
    seen = set()
    for p in sources:
        idx = _as_index(p, tables.grid)
        f = tables.flat(idx)
        if f not in seen:
            seen.add(f)
            src_idx.append(idx)
    src_nodes = np.array([tables.flat(i) for i in src_idx], dtype=np.int64)
    stop_nodes, stop_gid, n_groups = _stop_arrays(stops, tables)

    U = np.full(tables.N, np.inf)
    tags = np.zeros(tables.N, dtype=np.uint8)
    t0 = time.perf_counter()
    accepted, updates, mono_bad, mono_worst = _kernels.fast_march_kernel(
        U, tags, tables.W, tables.H, tables.K,
        tables.ent_start, tables.ent_odi, tables.ent_odj, tables.ent_odk,
        tables.ent_fid, tables.ent_role,
        tables.fm, tables.fvo, tables.fA0, tables.fg0, tables.fginv, tables.fwd0,
        tables.tensor_mode, tables.fgc, tables.t11, tables.t12, tables.t22,
        tables.scale, src_nodes, stop_nodes, stop_gid, n_groups,
        MONOTONE_TOL,
    )
    wall = time.perf_counter() - t0
    if mono_bad:
        raise SolverError(
            f"acceptance monotonicity violated {mono_bad} times "
            f"(worst gap {mono_worst:.3e}); stencil too far from causal"
        )
    stats = SolveStats(
        accepted_count=int(accepted),
        hopf_lax_update_count=int(updates),
        mean_updates_per_node=float(updates) / max(1, accepted),
        wall_time=wall,
        monotonicity_violations=int(mono_bad),
    )
    amap = ActionMap(tables.grid, U.reshape(tables.shape()),
                     tags.reshape(tables.shape()), src_idx)
    amap.stats = stats
    return amap, stats


def agsi_solve(metric: MetricBase, sources, tolerance: float = 1e-9,
               policy: StencilPolicy | None = None, max_sweeps: int = 5000,
               warm_start: ActionMap | None = None) -> ActionMap:
    """Iterate the local operator to its fixed point (order-independent).

    Sweeps the grid in alternating orderings, updating in place, until the
    largest decrease drops below ``tolerance``.  Used as the correctness
    oracle for fast marching; also accepts a ``warm_start`` map (e.g. to
    verify that a converged map is a fixed point).
    """
    if not sources:
        raise SeedError("at least one source point is required")
    tables = tables_for(metric, policy)
    src_idx = [_as_index(p, tables.grid) for p in sources]
    src_nodes = np.array(sorted({tables.flat(i) for i in src_idx}), dtype=np.int64)

    if warm_start is not None:
        U = np.array(warm_start.values, dtype=float).reshape(tables.N).copy()
    else:
        U = np.full(tables.N, np.inf)
    is_source = np.zeros(tables.N, dtype=bool)
    is_source[src_nodes] = True
    U[src_nodes] = 0.0
    U_next = U.copy()

    t0 = time.perf_counter()
    total_evals = 0
    sweeps = 0
    residual = math.inf
    while sweeps < max_sweeps:
        residual, evals = _kernels.agsi_sweep_kernel(
            U, U_next, is_source, tables.W, tables.H, tables.K,
            tables.face_start, tables.fm, tables.fvo, tables.fA0, tables.fg0,
            tables.fginv, tables.fwd0,
            tables.tensor_mode, tables.fgc, tables.t11, tables.t12, tables.t22,
            tables.scale,
        )
        U, U_next = U_next, U
        total_evals += evals
        sweeps += 1
        if residual <= tolerance:
            break
    else:
        raise ConvergenceError(
            f"no fixed point after {max_sweeps} sweeps (residual {residual:.3e})",
            residual=residual, sweeps=sweeps,
        )
    wall = time.perf_counter() - t0

    tags = np.where(np.isfinite(U), ACCEPTED, FAR).astype(np.uint8)
    amap = ActionMap(tables.grid, U.reshape(tables.shape()),
                     tags.reshape(tables.shape()), src_idx)
    amap.stats = SolveStats(
        accepted_count=int(np.isfinite(U).sum()),
        hopf_lax_update_count=int(total_evals),
        mean_updates_per_node=float(total_evals) / tables.N,
        wall_time=wall,
    )
    return amap


# ---------------------------------------------------------------------------
# Reference single-node operator (public, stencil-object based)
# ---------------------------------------------------------------------------

def hopf_lax_update(x: LiftedIndex, U: ActionMap, S: Stencil, metric: MetricBase) -> float:
    """Local update at one node from an explicit stencil.

    Minimizes segment cost plus linear interpolation over the stencil
    boundary (each facet searched through its simplex faces).  Returns
    +inf when every facet vertex is unreached.
    """
    grid = U.grid
    lifted = U.lifted
    h = grid.spacing
    ts = grid.theta_step if lifted else 1.0
    K = grid.n_theta if lifted else 1

    if lifted:
        from .grid import index_to_point
        point = index_to_point(x, grid)
        M, omega = metric.randers_at(point)
    else:
        M2, omega2 = metric.randers_at((x.i * h, x.j * h))
        M = np.eye(3)
        M[:2, :2] = M2
        omega = np.array([omega2[0], omega2[1], 0.0])

    vals = np.array([U.value_at(v) for v in S.vertices])
    drel = np.zeros((len(S.vertices), 3))
    for n, v in enumerate(S.vertices):
        dk = 0
        if lifted:
            dk = (v.k - x.k + K // 2) % K - K // 2
        drel[n] = [-(v.i - x.i) * h, -(v.j - x.j) * h, -dk * ts]

    best = math.inf
    faces = set()
    for facet in list(S.boundary_facets) + list(S.extra_faces):
        f = tuple(facet)
        faces.add(f)
        for a in range(len(f)):
            for b in range(a + 1, len(f)):
                faces.add((min(f[a], f[b]), max(f[a], f[b])))
    for v in range(len(S.vertices)):
        faces.add((v,))
    for f in faces:
        c = vals[list(f)]
        if not np.all(np.isfinite(c)):
            continue
        D = drel[list(f)]
        G = D @ M @ D.T
        m = len(f)
        if m == 1:
            cand = float(c[0] + math.sqrt(G[0, 0]) - D[0] @ omega)
            best = min(best, cand)
            continue
        det = np.linalg.det(G)
        if not det > 1e-14 * max(1.0, float(np.abs(G).max()) ** m):
            continue
        if not _face_is_causal(G, D @ omega):
            continue
        c = c - D @ omega
        Ginv = np.linalg.inv(G)
        g0 = Ginv.sum(axis=1)
        A0 = float(g0.sum())
        B0 = float(g0 @ c)
        C0 = float(c @ Ginv @ c)
        disc = B0 * B0 - A0 * (C0 - 1.0)
        if disc < 0:
            continue
        nu = (B0 + math.sqrt(disc)) / A0
        w = Ginv @ (nu - c)
        if not np.all(w >= -1e-12 * (1 + abs(nu))):
            continue
        best = min(best, nu)
    return best


# ---------------------------------------------------------------------------
# Update-count trend
# ---------------------------------------------------------------------------

def update_count_trend(lambdas, grid: GridSpec3 | None = None, alpha: float = 500.0,
                       policy: StencilPolicy | None = None, strict: bool = True) -> dict:
    """Mean local updates per node of the fast march across penalizations.

    Runs a full constant-speed solve from a centered source for each value
    and reports the mean update count; with ``strict`` the sub-linear
    growth contract is asserted (nondecreasing, and the strongest-to-weak
    ratio staying far below linear).
    """
    from .metrics import ElasticaParams, FinslerElasticaMetric

    if grid is None:
        grid = GridSpec3(GridSpec2(32, 32), 36)
    source = LiftedPoint(
        (grid.width // 2) * grid.spacing, (grid.height // 2) * grid.spacing, 0.0
    )
    means = {}
    for lam in lambdas:
        metric = FinslerElasticaMetric(ElasticaParams(float(lam), alpha), grid)
        _, stats = fast_march(metric, [source], policy=policy)
        means[float(lam)] = stats.mean_updates_per_node
    if strict and len(means) > 1:
        vals = [means[float(l)] for l in lambdas]
        if any(b < a * (1 - 1e-9) for a, b in zip(vals, vals[1:])):
            raise SolverError(f"update counts not nondecreasing: {means}")
        lams = [float(l) for l in lambdas]
        lo = min(range(len(lams)), key=lambda n: lams[n])
        hi = max(range(len(lams)), key=lambda n: lams[n])
        if lams[lo] > 0 and lams[hi] / max(lams[lo], 1.0) >= 10.0:
            growth = vals[hi] / max(vals[lo], 1e-12)
            anis_growth = lams[hi] / max(lams[lo], 1.0)
            if growth >= anis_growth / 2.0:
                raise SolverError(
                    f"update counts grew near-linearly in anisotropy: {means}"
                )
    return means
