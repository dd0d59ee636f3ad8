"""Numba kernels for the Bowyer-Watson mesh engine.

The mesh lives in flat numpy arrays (struct-of-arrays). All kernels run
nogil so refinement threads overlap; mutation is safe only under the claim
protocol: a thread may read or write a tet's record only while it holds the
tet's claim slot. Cavity growth claims every tet it touches (conflict tets
plus the surrounding ring); on any failed claim everything is released and
nothing was mutated.

Conventions:

- ``tet_verts[t, i]``: vertex ids; tets are positively oriented.
- ``tet_nbrs[t, i]``: tet across the facet opposite local vertex i;
  -1 = domain hull, -2 = data not present (regional submesh edge).
- facet opposite local i keeps the outward-consistent vertex order in
  ``_FACET_ORDER`` so orient3d(facet, apex) > 0.
- claims: 0 = free, otherwise owner thread id + 1.
"""

import numpy as np
from numba import njit

from ._atomics import cas_i32, fetch_add_i64, xchg_i32
from ._predicates import JIT_OPTS, insphere_sign, orient3d_sign

# statuses returned per work item
ST_COMMIT = 0
ST_CONTENTION = 1
ST_DUPLICATE = 2
ST_DEAD = 3
ST_ESCAPE = 4
ST_OVERFLOW = 5
ST_UNSPLITTABLE = 6

# scratch capacities; cavities beyond this are treated as overflow
MAX_CAVITY = 4096
MAX_FACETS = 4 * MAX_CAVITY

# per-item tet slot reserve the driver must guarantee before a batch item;
# also the hard cap on a single cavity's boundary fan
ITEM_TET_RESERVE = 4096

DUP_TOL_FACTOR = 1e-12  # of the bbox diagonal

_FACET_ORDER = np.array(
    [[1, 3, 2], [0, 2, 3], [0, 3, 1], [0, 1, 2]], dtype=np.int64
)


@njit(inline="always", **JIT_OPTS)
def _insphere_tet(verts, tet_verts, t, px, py, pz):
    a = tet_verts[t, 0]
    b = tet_verts[t, 1]
    c = tet_verts[t, 2]
    d = tet_verts[t, 3]
    return insphere_sign(
        verts[a, 0], verts[a, 1], verts[a, 2],
        verts[b, 0], verts[b, 1], verts[b, 2],
        verts[c, 0], verts[c, 1], verts[c, 2],
        verts[d, 0], verts[d, 1], verts[d, 2],
        px, py, pz,
    )


@njit(inline="always", **JIT_OPTS)
def _facet_orient(verts, tet_verts, t, i, px, py, pz):
    """orient3d(facet opposite local i, p); > 0 means p on the inner side."""
    a = tet_verts[t, _FACET_ORDER[i, 0]]
    b = tet_verts[t, _FACET_ORDER[i, 1]]
    c = tet_verts[t, _FACET_ORDER[i, 2]]
    return orient3d_sign(
        verts[a, 0], verts[a, 1], verts[a, 2],
        verts[b, 0], verts[b, 1], verts[b, 2],
        verts[c, 0], verts[c, 1], verts[c, 2],
        px, py, pz,
    )


# ---------------------------------------------------------------------------
# point location
# ---------------------------------------------------------------------------


@njit(**JIT_OPTS)
def walk_locate(verts, tet_verts, tet_nbrs, tet_alive, px, py, pz,
                start, stamps, gen):
    """Visibility walk; returns (status, tet).

    status 0 = found (tet contains p, ties included), 1 = outside hull,
    2 = walk failed (start dead / exhausted). Falls back to a stamped
    breadth-first sweep if the walk revisits a tet (possible only in
    degenerate configurations).
    """
    t = start
    if t < 0 or tet_alive[t] == 0:
        # scan for any alive tet to start from
        t = -1
        for s in range(tet_alive.shape[0]):
            if tet_alive[s] == 1:
                t = s
                break
        if t < 0:
            return 2, -1
    steps = 0
    limit = 8 * tet_alive.shape[0] + 64
    while steps < limit:
        steps += 1
        if stamps[t] == gen:
            break  # cycle: degenerate tie pattern, go breadth-first
        stamps[t] = gen
        moved = False
        for i in range(4):
            s = _facet_orient(verts, tet_verts, t, np.int64(i), px, py, pz)
            if s < 0:
                n = tet_nbrs[t, i]
                if n == -1:
                    return 1, t
                if n == -2:
                    return 3, t
                t = n
                moved = True
                break
        if not moved:
            return 0, t
    # breadth-first fallback over all alive tets
    for s in range(tet_alive.shape[0]):
        if tet_alive[s] == 0:
            continue
        inside = True
        for i in range(4):
            if _facet_orient(verts, tet_verts, s, np.int64(i), px, py, pz) < 0:
                inside = False
                break
        if inside:
            return 0, s
    return 1, t


@njit(**JIT_OPTS)
def lowest_container(verts, tet_verts, tet_nbrs, tet_alive, px, py, pz, found):
    """Min-id alive tet containing p, exploring ties across zero facets."""
    best = found
    queue = np.empty(64, dtype=np.int64)
    seen = np.empty(64, dtype=np.int64)
    queue[0] = found
    seen[0] = found
    nq = 1
    ns = 1
    head = 0
    while head < nq:
        t = queue[head]
        head += 1
        if t < best:
            best = t
        for i in range(4):
            if _facet_orient(verts, tet_verts, t, np.int64(i), px, py, pz) == 0:
                n = tet_nbrs[t, i]
                if n < 0:
                    continue
                new = True
                for k in range(ns):
                    if seen[k] == n:
                        new = False
                        break
                if new and ns < 64 and nq < 64:
                    # neighbor contains p iff all its facets are non-negative
                    inside = True
                    for j in range(4):
                        if _facet_orient(verts, tet_verts, n, np.int64(j),
                                         px, py, pz) < 0:
                            inside = False
                            break
                    seen[ns] = n
                    ns += 1
                    if inside:
                        queue[nq] = n
                        nq += 1
    return best


# ---------------------------------------------------------------------------
# badness rule
# ---------------------------------------------------------------------------


@njit(inline="always", **JIT_OPTS)
def _circumsphere(verts, tet_verts, t):
    """Float circumcenter and squared radius of tet t."""
    a0 = tet_verts[t, 0]
    ax = verts[a0, 0]
    ay = verts[a0, 1]
    az = verts[a0, 2]
    ux = verts[tet_verts[t, 1], 0] - ax
    uy = verts[tet_verts[t, 1], 1] - ay
    uz = verts[tet_verts[t, 1], 2] - az
    vx = verts[tet_verts[t, 2], 0] - ax
    vy = verts[tet_verts[t, 2], 1] - ay
    vz = verts[tet_verts[t, 2], 2] - az
    wx = verts[tet_verts[t, 3], 0] - ax
    wy = verts[tet_verts[t, 3], 1] - ay
    wz = verts[tet_verts[t, 3], 2] - az
    uu = ux * ux + uy * uy + uz * uz
    vv = vx * vx + vy * vy + vz * vz
    ww = wx * wx + wy * wy + wz * wz
    vwx = vy * wz - vz * wy
    vwy = vz * wx - vx * wz
    vwz = vx * wy - vy * wx
    wux = wy * uz - wz * uy
    wuy = wz * ux - wx * uz
    wuz = wx * uy - wy * ux
    uvx = uy * vz - uz * vy
    uvy = uz * vx - ux * vz
    uvz = ux * vy - uy * vx
    vol2 = 2.0 * (ux * vwx + uy * vwy + uz * vwz)
    if vol2 == 0.0:
        return ax, ay, az, np.inf
    ox = (uu * vwx + vv * wux + ww * uvx) / vol2
    oy = (uu * vwy + vv * wuy + ww * uvy) / vol2
    oz = (uu * vwz + vv * wuz + ww * uvz) / vol2
    return ax + ox, ay + oy, az + oz, ox * ox + oy * oy + oz * oz


@njit(inline="always", **JIT_OPTS)
def _shortest_edge_sq(verts, tet_verts, t):
    best = np.inf
    for i in range(3):
        vi = tet_verts[t, i]
        for j in range(i + 1, 4):
            vj = tet_verts[t, j]
            dx = verts[vi, 0] - verts[vj, 0]
            dy = verts[vi, 1] - verts[vj, 1]
            dz = verts[vi, 2] - verts[vj, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
    return best


@njit(inline="always", **JIT_OPTS)
def _label_at(labels, ox, oy, oz, sx, sy, sz, px, py, pz):
    """Voxel label containing p; faces tie to the lower-index voxel."""
    ix = np.int64(np.ceil((px - ox) / sx)) - 1
    if ix < 0 or ix >= labels.shape[0]:
        return 0
    iy = np.int64(np.ceil((py - oy) / sy)) - 1
    if iy < 0 or iy >= labels.shape[1]:
        return 0
    iz = np.int64(np.ceil((pz - oz) / sz)) - 1
    if iz < 0 or iz >= labels.shape[2]:
        return 0
    return np.int64(labels[ix, iy, iz])


@njit(inline="always", **JIT_OPTS)
def _leaf_of(nleaf, lox, loy, loz, lsx, lsy, lsz, px, py, pz):
    """Linear leaf index of p; faces tie to the lower-index leaf."""
    ix = np.int64(np.ceil((px - lox) / lsx)) - 1
    iy = np.int64(np.ceil((py - loy) / lsy)) - 1
    iz = np.int64(np.ceil((pz - loz) / lsz)) - 1
    if ix < 0:
        ix = 0
    if iy < 0:
        iy = 0
    if iz < 0:
        iz = 0
    if ix >= nleaf:
        ix = nleaf - 1
    if iy >= nleaf:
        iy = nleaf - 1
    if iz >= nleaf:
        iz = nleaf - 1
    return (ix * nleaf + iy) * nleaf + iz


@njit(inline="always", **JIT_OPTS)
def _tet_badness(verts, tet_verts, t, img, rule, box):
    """1 if the rule flags tet t for refinement, else 0. Returns (bad, label).

    A violating element counts as refinable only when its circumcenter is
    well-posed: inside the closed domain box and verifiably interior to the
    element's own circumball (exact test). Near-degenerate slivers whose
    circumballs bulge out of the domain are exempt -- their circumcenters
    cannot be inserted, and with the domain surface seeded their in-box
    extent is bounded, so exempting them is what makes refinement
    terminate. Slivers are measured by the quality report, not eliminated.
    """
    labels, ox, oy, oz, sx, sy, sz = img
    h_table, rho_max, count_background = rule
    blx, bly, blz, bhx, bhy, bhz = box
    bx = 0.25 * (verts[tet_verts[t, 0], 0] + verts[tet_verts[t, 1], 0]
                 + verts[tet_verts[t, 2], 0] + verts[tet_verts[t, 3], 0])
    by = 0.25 * (verts[tet_verts[t, 0], 1] + verts[tet_verts[t, 1], 1]
                 + verts[tet_verts[t, 2], 1] + verts[tet_verts[t, 3], 1])
    bz = 0.25 * (verts[tet_verts[t, 0], 2] + verts[tet_verts[t, 1], 2]
                 + verts[tet_verts[t, 2], 2] + verts[tet_verts[t, 3], 2])
    lbl = _label_at(labels, ox, oy, oz, sx, sy, sz, bx, by, bz)
    if lbl == 0 and count_background == 0:
        return 0, lbl
    cx, cy, cz, r2 = _circumsphere(verts, tet_verts, t)
    h = h_table[lbl]
    violated = r2 > h * h
    if not violated and rho_max > 0.0:
        se2 = _shortest_edge_sq(verts, tet_verts, t)
        violated = r2 > rho_max * rho_max * se2
    if not violated:
        return 0, lbl
    if not (blx <= cx <= bhx and bly <= cy <= bhy and blz <= cz <= bhz):
        return 0, lbl
    if _insphere_tet(verts, tet_verts, t, cx, cy, cz) <= 0:
        return 0, lbl
    return 1, lbl


@njit(**JIT_OPTS)
def scan_bad(verts, tet_verts, tet_alive, tet_owner, img, rule, box,
             region_leaf, out):
    """Ascending-slot scan of alive rule-violating tets; returns count.

    region_leaf >= 0 restricts the scan to tets owned by that leaf.
    """
    n = 0
    for t in range(tet_alive.shape[0]):
        if tet_alive[t] == 0:
            continue
        if region_leaf >= 0 and tet_owner[t] != region_leaf:
            continue
        bad, _ = _tet_badness(verts, tet_verts, np.int64(t), img, rule, box)
        if bad == 1:
            if n < out.shape[0]:
                out[n] = t
            n += 1
    return n


@njit(**JIT_OPTS)
def count_bad_per_leaf(verts, tet_verts, tet_alive, tet_owner, img, rule,
                       box, bad_counts, all_counts):
    """Per-leaf alive and rule-violating tet counts (arrays sized 8^d)."""
    bad_counts[:] = 0
    all_counts[:] = 0
    for t in range(tet_alive.shape[0]):
        if tet_alive[t] == 0:
            continue
        leaf = tet_owner[t]
        if leaf < 0 or leaf >= bad_counts.shape[0]:
            continue
        all_counts[leaf] += 1
        bad, _ = _tet_badness(verts, tet_verts, np.int64(t), img, rule, box)
        if bad == 1:
            bad_counts[leaf] += 1


# ---------------------------------------------------------------------------
# speculative insertion
# ---------------------------------------------------------------------------


@njit(inline="always", **JIT_OPTS)
def _release_all(claims, claimed, ncl):
    for k in range(ncl):
        xchg_i32(claims, claimed[k], 0)


@njit(**JIT_OPTS)
def _attempt_insert(mesh, img, rule, dec, box, blocks, scratch,
                    tid, item, px, py, pz, have_point, newbad, newbad_cap):
    """Claim, grow, and commit one cavity insertion.

    If ``have_point`` the insertion point (px, py, pz) is given and ``item``
    must be a tet containing it in its circumball; otherwise the point is
    derived from the bad tet ``item`` (circumcenter, clipped into the hull,
    barycenter as a last resort).

    Returns (status, n_new_bad, new_vertex, commit_seq).
    """
    (verts, vert_used, tet_verts, tet_nbrs, tet_alive, tet_owner, tet_bad,
     claims, counters, log_pts) = mesh
    (cav, ring, fac_tet, fac_idx, claimed, newt,
     edge_k0, edge_k1, edge_tet, edge_idx) = scratch
    vblock, tblock = blocks
    nleaf, lox, loy, loz, lsx, lsy, lsz, region_leaf = dec
    blx, bly, blz, bhx, bhy, bhz = box
    me = np.int32(tid + 1)

    t0 = item
    seen = cas_i32(claims, t0, 0, me)
    if seen != 0:
        return ST_CONTENTION, 0, -1, -1
    claimed[0] = t0
    ncl = 1
    if tet_alive[t0] == 0:
        _release_all(claims, claimed, ncl)
        return ST_DEAD, 0, -1, -1

    if not have_point:
        # the rule enqueues only tets whose circumcenter is well-posed, and
        # an alive tet never changes, so the checks re-verify cheaply
        px, py, pz, _ = _circumsphere(verts, tet_verts, t0)
        if not (blx <= px <= bhx and bly <= py <= bhy and blz <= pz <= bhz
                and _insphere_tet(verts, tet_verts, t0, px, py, pz) > 0):
            _release_all(claims, claimed, ncl)
            return ST_UNSPLITTABLE, 0, -1, -1
    else:
        if _insphere_tet(verts, tet_verts, t0, px, py, pz) <= 0:
            _release_all(claims, claimed, ncl)
            return ST_UNSPLITTABLE, 0, -1, -1

    # --- grow the conflict cavity, claiming everything we touch ---
    cav[0] = t0
    ncav = 1
    nring = 0
    nfac = 0
    head = 0
    status = ST_COMMIT
    while head < ncav:
        t = cav[head]
        head += 1
        for i in range(4):
            n = tet_nbrs[t, i]
            if n == -1:
                if nfac >= MAX_FACETS:
                    status = ST_OVERFLOW
                    break
                fac_tet[nfac] = t
                fac_idx[nfac] = i
                nfac += 1
                continue
            if n == -2:
                status = ST_ESCAPE
                break
            # already one of ours?
            member = 0
            for k in range(ncav):
                if cav[k] == n:
                    member = 1
                    break
            if member == 0:
                for k in range(nring):
                    if ring[k] == n:
                        member = 2
                        break
            if member == 1:
                continue
            if member == 2:
                if nfac >= MAX_FACETS:
                    status = ST_OVERFLOW
                    break
                fac_tet[nfac] = t
                fac_idx[nfac] = i
                nfac += 1
                continue
            seen = cas_i32(claims, np.int64(n), 0, me)
            if seen != 0:
                status = ST_CONTENTION
                break
            claimed[ncl] = n
            ncl += 1
            if ncl >= claimed.shape[0] or ncav >= MAX_CAVITY or nring >= MAX_CAVITY:
                status = ST_OVERFLOW
                break
            if tet_alive[n] == 0:
                # cannot happen under the claim protocol; fail closed
                status = ST_DEAD
                break
            s = _insphere_tet(verts, tet_verts, np.int64(n), px, py, pz)
            if s > 0:
                cav[ncav] = n
                ncav += 1
            else:
                ring[nring] = n
                nring += 1
                if nfac >= MAX_FACETS:
                    status = ST_OVERFLOW
                    break
                fac_tet[nfac] = t
                fac_idx[nfac] = i
                nfac += 1
        if status != ST_COMMIT:
            break
    if status == ST_COMMIT and nfac > ITEM_TET_RESERVE:
        status = ST_OVERFLOW
    if status != ST_COMMIT:
        _release_all(claims, claimed, ncl)
        return status, 0, -1, -1

    # --- duplicate-point guard over cavity vertices ---
    ddx = bhx - blx
    ddy = bhy - bly
    ddz = bhz - blz
    diag2 = ddx * ddx + ddy * ddy + ddz * ddz
    dup_tol2 = DUP_TOL_FACTOR * DUP_TOL_FACTOR * diag2
    for k in range(ncav):
        t = cav[k]
        for i in range(4):
            v = tet_verts[t, i]
            dx = verts[v, 0] - px
            dy = verts[v, 1] - py
            dz = verts[v, 2] - pz
            if dx * dx + dy * dy + dz * dz <= dup_tol2:
                _release_all(claims, claimed, ncl)
                return ST_DUPLICATE, 0, -1, -1

    # drop boundary facets exactly coplanar with p (p on a box wall): the
    # positive fans alone fill the cavity and the wall re-triangulates as
    # the fan's new hull facets
    nkeep = 0
    for k in range(nfac):
        t = fac_tet[k]
        i = fac_idx[k]
        if _facet_orient(verts, tet_verts, t, i, px, py, pz) > 0:
            fac_tet[nkeep] = t
            fac_idx[nkeep] = i
            nkeep += 1
    nfac = nkeep
    if nfac == 0:
        _release_all(claims, claimed, ncl)
        return ST_UNSPLITTABLE, 0, -1, -1

    # --- commit ---
    nv = vblock[tid, 0]
    vblock[tid, 0] = nv + 1
    verts[nv, 0] = px
    verts[nv, 1] = py
    verts[nv, 2] = pz
    vert_used[nv] = 1

    seq = fetch_add_i64(counters, 0, 1)
    log_pts[seq, 0] = px
    log_pts[seq, 1] = py
    log_pts[seq, 2] = pz

    # fan creation; every cavity-boundary edge is shared by exactly two
    # boundary facets, so side facets pair up via a scan of open edges
    nopen = 0
    for k in range(nfac):
        tslot = tblock[tid, 0] + k
        newt[k] = tslot
        t = fac_tet[k]
        i = fac_idx[k]
        a = tet_verts[t, _FACET_ORDER[i, 0]]
        b = tet_verts[t, _FACET_ORDER[i, 1]]
        c = tet_verts[t, _FACET_ORDER[i, 2]]
        tet_verts[tslot, 0] = a
        tet_verts[tslot, 1] = b
        tet_verts[tslot, 2] = c
        tet_verts[tslot, 3] = np.int32(nv)
        outer = tet_nbrs[t, i]
        tet_nbrs[tslot, 3] = outer
        tet_nbrs[tslot, 0] = -1
        tet_nbrs[tslot, 1] = -1
        tet_nbrs[tslot, 2] = -1
        if outer >= 0:
            for j in range(4):
                if tet_nbrs[outer, j] == t:
                    tet_nbrs[outer, j] = np.int32(tslot)
                    break
        # the three side facets touch p; key each by its base edge
        for ei in range(3):
            va = np.int64(tet_verts[tslot, (ei + 1) % 3])
            vb = np.int64(tet_verts[tslot, (ei + 2) % 3])
            if va > vb:
                tmp = va
                va = vb
                vb = tmp
            hit = -1
            for m in range(nopen):
                if edge_k0[m] == va and edge_k1[m] == vb:
                    hit = m
                    break
            if hit < 0:
                edge_k0[nopen] = va
                edge_k1[nopen] = vb
                edge_tet[nopen] = tslot
                edge_idx[nopen] = ei
                nopen += 1
            else:
                other = edge_tet[hit]
                oi = edge_idx[hit]
                tet_nbrs[tslot, ei] = np.int32(other)
                tet_nbrs[other, oi] = np.int32(tslot)
                nopen -= 1
                edge_k0[hit] = edge_k0[nopen]
                edge_k1[hit] = edge_k1[nopen]
                edge_tet[hit] = edge_tet[nopen]
                edge_idx[hit] = edge_idx[nopen]
    tblock[tid, 0] = tblock[tid, 0] + nfac

    # owner, badness, alive flags for the fan
    nbad = 0
    for k in range(nfac):
        tslot = newt[k]
        tet_alive[tslot] = 1
        if nleaf > 0:
            bx = 0.25 * (verts[tet_verts[tslot, 0], 0] + verts[tet_verts[tslot, 1], 0]
                         + verts[tet_verts[tslot, 2], 0] + verts[tet_verts[tslot, 3], 0])
            by = 0.25 * (verts[tet_verts[tslot, 0], 1] + verts[tet_verts[tslot, 1], 1]
                         + verts[tet_verts[tslot, 2], 1] + verts[tet_verts[tslot, 3], 1])
            bz = 0.25 * (verts[tet_verts[tslot, 0], 2] + verts[tet_verts[tslot, 1], 2]
                         + verts[tet_verts[tslot, 2], 2] + verts[tet_verts[tslot, 3], 2])
            tet_owner[tslot] = _leaf_of(nleaf, lox, loy, loz, lsx, lsy, lsz,
                                        bx, by, bz)
        else:
            tet_owner[tslot] = -1
        bad, _ = _tet_badness(verts, tet_verts, tslot, img, rule, box)
        enq = bad == 1 and (region_leaf < 0 or tet_owner[tslot] == region_leaf)
        tet_bad[tslot] = 1 if bad == 1 else 0
        if enq and nbad < newbad_cap:
            newbad[nbad] = tslot
            nbad += 1

    # kill the cavity
    for k in range(ncav):
        t = cav[k]
        tet_alive[t] = 0
        tet_bad[t] = 0

    _release_all(claims, claimed, ncl)
    return ST_COMMIT, nbad, nv, seq


@njit(**JIT_OPTS)
def process_batch(mesh, img, rule, dec, box, blocks, scratch, tid,
                  items, nitems, statuses, newbad_out):
    """Run up to nitems refinement insertions; returns (ndone, nnewbad).

    Stops early (ndone < nitems) when the thread's slot blocks cannot
    guarantee the next item's worst-case allocation; the driver refills and
    resubmits. newbad_out collects bad fan tets in creation order.
    """
    vblock, tblock = blocks
    ndone = 0
    nnew = 0
    for j in range(nitems):
        if (tblock[tid, 1] - tblock[tid, 0] < ITEM_TET_RESERVE
                or vblock[tid, 1] - vblock[tid, 0] < 1):
            break
        st, nbad, _, _ = _attempt_insert(
            mesh, img, rule, dec, box, blocks, scratch, tid,
            items[j], 0.0, 0.0, 0.0, False,
            newbad_out[nnew:], newbad_out.shape[0] - nnew,
        )
        statuses[j] = st
        if st == ST_COMMIT:
            nnew += nbad
        ndone += 1
    return ndone, nnew


@njit(**JIT_OPTS)
def grow_cavity_readonly(verts, tet_verts, tet_nbrs, tet_alive,
                         px, py, pz, start, cav, fac_tet, fac_idx):
    """Conflict cavity of p from a containing tet, no claims, no mutation.

    Returns (status, ncav, nfac); status as in _attempt_insert.
    """
    if tet_alive[start] == 0:
        return ST_DEAD, 0, 0
    if _insphere_tet(verts, tet_verts, start, px, py, pz) <= 0:
        return ST_UNSPLITTABLE, 0, 0
    cav[0] = start
    ncav = 1
    nfac = 0
    head = 0
    while head < ncav:
        t = cav[head]
        head += 1
        for i in range(4):
            n = tet_nbrs[t, i]
            if n == -1:
                fac_tet[nfac] = t
                fac_idx[nfac] = i
                nfac += 1
                continue
            if n == -2:
                return ST_ESCAPE, 0, 0
            member = False
            for k in range(ncav):
                if cav[k] == n:
                    member = True
                    break
            if member:
                continue
            if ncav >= MAX_CAVITY or nfac >= MAX_FACETS:
                return ST_OVERFLOW, 0, 0
            if _insphere_tet(verts, tet_verts, np.int64(n), px, py, pz) > 0:
                cav[ncav] = n
                ncav += 1
            else:
                fac_tet[nfac] = t
                fac_idx[nfac] = i
                nfac += 1
    return ST_COMMIT, ncav, nfac
