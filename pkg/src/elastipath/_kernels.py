"""Numba kernels for the front propagation and fixed-point solvers.

Node layout is C-order flat over (i, j, k) with k the periodic orientation
axis (planar grids run with K = 1).  Face tables are produced by
``solver._Tables``: for every orientation template, the searched boundary
is decomposed into simplex faces of one to three vertices, each carrying
its inverse Gram data so the local minimization reduces to one quadratic.

For a face with owner-relative vectors d_s (vertex -> owner) and vertex
values U_s, the minimizer of

    s * (|sum_b d|_M0 - <omega0, sum_b d>) + sum_b U   over the simplex

is found by substituting c_s = U_s - s * <omega0, d_s> (the drift is linear
in the barycentric weights) and solving

    A0 * nu^2 - 2 (g0 . c) nu + c . Ginv0 . c = s^2,

where Ginv0 is the inverse Gram of the d_s under M0, g0 = Ginv0 1 and
A0 = 1 . g0; the optimal value is the root nu with positive barycentric
weights Ginv0 (nu 1 - c).  Faces whose stationary point leaves the simplex
are covered by their sub-faces, which are enumerated as faces themselves.
"""

import numpy as np
from numba import njit

FAR = 0
TRIAL = 1
ACCEPTED = 2

INF = np.inf


@njit(cache=True, inline="always")
def _face_value(fid, oi, oj, ok, owner_flat, H, K, U,
                fm, fvo, fA0, fg0, fginv, fwd0,
                tensor_mode, fgc, t11, t12, t22,
                W, s):
    """Candidate value of one face for one owner; INF if inadmissible."""
    m = fm[fid]
    c0 = 0.0
    c1 = 0.0
    c2 = 0.0
    u0 = 0.0
    u1 = 0.0
    for slot in range(m):
        vi = oi + fvo[fid, slot, 0]
        vj = oj + fvo[fid, slot, 1]
        if vi < 0 or vi >= W or vj < 0 or vj >= H:
            return INF
        vk = (ok + fvo[fid, slot, 2] + K) % K
        uval = U[(vi * H + vj) * K + vk]
        if not np.isfinite(uval):
            return INF
        cval = uval - s * fwd0[fid, slot]
        if slot == 0:
            c0 = cval
            u0 = uval
        elif slot == 1:
            c1 = cval
            u1 = uval
        else:
            c2 = cval

    if tensor_mode == 0:
        A0 = fA0[fid]
        g00 = fg0[fid, 0]
        g01 = fg0[fid, 1]
        g02 = fg0[fid, 2]
        i00 = fginv[fid, 0]
        i01 = fginv[fid, 1]
        i02 = fginv[fid, 2]
        i11 = fginv[fid, 4]
        i12 = fginv[fid, 5]
        i22 = fginv[fid, 8]
    else:
        # planar tensor metric: Gram entries from the owner's 2x2 tensor
        a11 = t11[owner_flat]
        a12 = t12[owner_flat]
        a22 = t22[owner_flat]
        G00 = fgc[fid, 0, 0] * a11 + fgc[fid, 0, 1] * a12 + fgc[fid, 0, 2] * a22
        if m == 1:
            if G00 <= 0.0:
                return INF
            i00 = 1.0 / G00
            g00 = i00
            A0 = i00
            i01 = 0.0
            i02 = 0.0
            i11 = 0.0
            i12 = 0.0
            i22 = 0.0
            g01 = 0.0
            g02 = 0.0
        else:
            G01 = fgc[fid, 1, 0] * a11 + fgc[fid, 1, 1] * a12 + fgc[fid, 1, 2] * a22
            G11 = fgc[fid, 2, 0] * a11 + fgc[fid, 2, 1] * a12 + fgc[fid, 2, 2] * a22
            det = G00 * G11 - G01 * G01
            if det <= 1e-300:
                return INF
            i00 = G11 / det
            i01 = -G01 / det
            i11 = G00 / det
            i02 = 0.0
            i12 = 0.0
            i22 = 0.0
            g00 = i00 + i01
            g01 = i01 + i11
            g02 = 0.0
            A0 = g00 + g01

    if m == 1:
        return c0 + s / np.sqrt(A0)

    if m == 2:
        B0 = g00 * c0 + g01 * c1
        C0 = i00 * c0 * c0 + 2.0 * i01 * c0 * c1 + i11 * c1 * c1
    else:
        B0 = g00 * c0 + g01 * c1 + g02 * c2
        C0 = (
            i00 * c0 * c0 + i11 * c1 * c1 + i22 * c2 * c2
            + 2.0 * (i01 * c0 * c1 + i02 * c0 * c2 + i12 * c1 * c2)
        )
    disc = B0 * B0 - A0 * (C0 - s * s)
    if disc < 0.0:
        return INF
    nu = (B0 + np.sqrt(disc)) / A0
    # barycentric feasibility: Ginv0 (nu 1 - c) must be nonnegative; faces
    # are pruned to the causal (acute) subset at table-build time, so any
    # feasible stationary value already dominates the vertex values it uses
    eps = -1e-12 * (1.0 + abs(nu))
    r0 = nu - c0
    r1 = nu - c1
    if m == 2:
        w0 = i00 * r0 + i01 * r1
        w1 = i01 * r0 + i11 * r1
        if w0 < eps or w1 < eps:
            return INF
        if tensor_mode == 1:
            # per-node tensors cannot be pruned statically; filter at run
            # time so updates only flow from upstream faces
            wtol = 1e-12 * (1.0 + abs(nu))
            ctol = 1e-9 * (1.0 + abs(nu))
            if (w0 > wtol and nu + ctol < u0) or (w1 > wtol and nu + ctol < u1):
                return INF
    else:
        r2 = nu - c2
        w0 = i00 * r0 + i01 * r1 + i02 * r2
        w1 = i01 * r0 + i11 * r1 + i12 * r2
        w2 = i02 * r0 + i12 * r1 + i22 * r2
        if w0 < eps or w1 < eps or w2 < eps:
            return INF
    return nu


@njit(cache=True)
def _heap_push(hv, hn, size, val, node):
    i = size
    hv[i] = val
    hn[i] = node
    while i > 0:
        parent = (i - 1) >> 1
        if hv[parent] < hv[i] or (hv[parent] == hv[i] and hn[parent] <= hn[i]):
            break
        hv[parent], hv[i] = hv[i], hv[parent]
        hn[parent], hn[i] = hn[i], hn[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(hv, hn, size):
    val = hv[0]
    node = hn[0]
    size -= 1
    hv[0] = hv[size]
    hn[0] = hn[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        best = i
        if l < size and (hv[l] < hv[best] or (hv[l] == hv[best] and hn[l] < hn[best])):
            best = l
        if r < size and (hv[r] < hv[best] or (hv[r] == hv[best] and hn[r] < hn[best])):
            best = r
        if best == i:
            break
        hv[best], hv[i] = hv[i], hv[best]
        hn[best], hn[i] = hn[i], hn[best]
        i = best
    return val, node, size


@njit(cache=True)
def fast_march_kernel(U, tags, W, H, K,
                      ent_start, ent_odi, ent_odj, ent_odk, ent_fid, ent_role,
                      fm, fvo, fA0, fg0, fginv, fwd0,
                      tensor_mode, fgc, t11, t12, t22,
                      scale,
                      src_nodes,
                      stop_nodes, stop_gid, n_groups,
                      mono_tol):
    """Single-pass label-setting solve; returns run statistics.

    Accepts the minimal trial node, freezes it, and recomputes every
    not-yet-accepted owner whose stencil contains it over exactly the
    faces that involve it, keeping the running minimum.  Stop groups
    (CSR over ``stop_nodes``/``stop_gid``) trigger early abort once every
    group saw one of its nodes accepted.
    """
    N = W * H * K
    cap = 4 * N + 16
    hv = np.empty(cap, dtype=np.float64)
    hn = np.empty(cap, dtype=np.int64)
    size = 0
    for n in src_nodes:
        U[n] = 0.0
        tags[n] = TRIAL
        size = _heap_push(hv, hn, size, 0.0, n)

    group_done = np.zeros(max(n_groups, 1), dtype=np.bool_)
    remaining = n_groups

    accepted = 0
    updates = 0
    mono_bad = 0
    mono_worst = 0.0
    last = -INF

    while size > 0:
        val, node, size = _heap_pop(hv, hn, size)
        if tags[node] == ACCEPTED or U[node] != val:
            continue
        tags[node] = ACCEPTED
        accepted += 1
        if val < last - mono_tol * (1.0 + abs(last)):
            mono_bad += 1
            gap = last - val
            if gap > mono_worst:
                mono_worst = gap
        if val > last:
            last = val

        if n_groups > 0:
            for si in range(len(stop_nodes)):
                if stop_nodes[si] == node:
                    g = stop_gid[si]
                    if not group_done[g]:
                        group_done[g] = True
                        remaining -= 1
            if remaining == 0:
                break

        k = node % K
        j = (node // K) % H
        i = node // (K * H)

        e = ent_start[k]
        e_end = ent_start[k + 1]
        cur_role = -1
        owner_flat = -1
        owner_ok = False
        best = INF
        s = 1.0
        owner_oi = 0
        owner_oj = 0
        owner_okk = 0
        while e < e_end:
            role = ent_role[e]
            if role != cur_role:
                # commit previous owner
                if owner_ok and best < U[owner_flat]:
                    U[owner_flat] = best
                    tags[owner_flat] = TRIAL
                    if size >= cap:
                        new_cap = 2 * cap
                        hv2 = np.empty(new_cap, dtype=np.float64)
                        hn2 = np.empty(new_cap, dtype=np.int64)
                        for q in range(size):
                            hv2[q] = hv[q]
                            hn2[q] = hn[q]
                        hv = hv2
                        hn = hn2
                        cap = new_cap
                    size = _heap_push(hv, hn, size, best, owner_flat)
                cur_role = role
                best = INF
                oi = i - ent_odi[e]
                oj = j - ent_odj[e]
                if oi < 0 or oi >= W or oj < 0 or oj >= H:
                    owner_ok = False
                else:
                    ok = (k - ent_odk[e] + K) % K
                    owner_flat = (oi * H + oj) * K + ok
                    if tags[owner_flat] == ACCEPTED:
                        owner_ok = False
                    else:
                        owner_ok = True
                        owner_oi = oi
                        owner_oj = oj
                        owner_okk = ok
                        s = scale[owner_flat]
                        updates += 1
            if owner_ok:
                cand = _face_value(ent_fid[e], owner_oi, owner_oj, owner_okk,
                                   owner_flat, H, K, U,
                                   fm, fvo, fA0, fg0, fginv, fwd0,
                                   tensor_mode, fgc, t11, t12, t22, W, s)
                if cand < best:
                    best = cand
            e += 1
        if owner_ok and best < U[owner_flat]:
            U[owner_flat] = best
            tags[owner_flat] = TRIAL
            if size >= cap:
                new_cap = 2 * cap
                hv2 = np.empty(new_cap, dtype=np.float64)
                hn2 = np.empty(new_cap, dtype=np.int64)
                for q in range(size):
                    hv2[q] = hv[q]
                    hn2[q] = hn[q]
                hv = hv2
                hn = hn2
                cap = new_cap
            size = _heap_push(hv, hn, size, best, owner_flat)

    return accepted, updates, mono_bad, mono_worst


@njit(cache=True)
def full_node_update(node, W, H, K, U,
                     face_start, fm, fvo, fA0, fg0, fginv, fwd0,
                     tensor_mode, fgc, t11, t12, t22, scale):
    """Full local operator at one node: min over all faces of its template."""
    k = node % K
    j = (node // K) % H
    i = node // (K * H)
    s = scale[node]
    best = INF
    for fid in range(face_start[k], face_start[k + 1]):
        cand = _face_value(fid, i, j, k, node, H, K, U,
                           fm, fvo, fA0, fg0, fginv, fwd0,
                           tensor_mode, fgc, t11, t12, t22, W, s)
        if cand < best:
            best = cand
    return best


@njit(cache=True)
def agsi_sweep_kernel(U_in, U_out, is_source, W, H, K,
                      face_start, fm, fvo, fA0, fg0, fginv, fwd0,
                      tensor_mode, fgc, t11, t12, t22, scale):
    """One Jacobi sweep of the local operator over all non-source nodes.

    Reads only ``U_in`` and writes ``U_out`` (min of old and recomputed
    value), so the iteration is order-independent by construction; the
    monotone causal operator makes the decreasing sequence converge to its
    unique fixed point.  Returns (max decrease, operator evaluations).
    """
    N = W * H * K
    max_delta = 0.0
    evals = 0
    for node in range(N):
        if is_source[node]:
            U_out[node] = 0.0
            continue
        new_val = full_node_update(node, W, H, K, U_in,
                                   face_start, fm, fvo, fA0, fg0, fginv, fwd0,
                                   tensor_mode, fgc, t11, t12, t22, scale)
        evals += 1
        old = U_in[node]
        if new_val < old:
            U_out[node] = new_val
            if np.isfinite(old):
                delta = old - new_val
            else:
                delta = INF
            if delta > max_delta:
                max_delta = delta
        else:
            U_out[node] = old
    return max_delta, evals
