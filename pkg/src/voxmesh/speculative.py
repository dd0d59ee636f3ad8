"""Shared-memory speculative refinement of one region.

Threads pull bad elements from a shared FIFO pool and race to commit cavity
insertions. Every tet a cavity touches is claimed through an atomic claim
table; if any claim fails the attempt rolls back without having mutated
anything and the item is re-queued at the FIFO tail. Commits are atomic to
any thread that respects claims, and each commit appends the inserted point
to the mesh commit log, so a concurrent run can be replayed sequentially.

With one thread the engine degenerates to the plain sequential loop: the
same kernels run in the same order, so the result is bit-identical to
``delaunay.refine``.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .delaunay import (
    NO_DECOMP,
    RefineTimeout,
    MeshError,
    box_tuple,
    image_tuple,
)

BATCH = 16
VERT_LEASE = 4096
TET_LEASE = 65536


class RegionDataError(MeshError):
    """A cavity needed tets that are not present in this submesh."""


@dataclass
class RefineStats:
    insertions: int = 0
    rollbacks: int = 0
    duplicates: int = 0
    unsplittable: int = 0
    threads: int = 1
    wall_time: float = 0.0
    log_start: int = 0
    log_end: int = 0

    def merge(self, other: "RefineStats") -> None:
        self.insertions += other.insertions
        self.rollbacks += other.rollbacks
        self.duplicates += other.duplicates
        self.unsplittable += other.unsplittable


class _NeedGrow(Exception):
    def __init__(self, verts=0, tets=0):
        self.verts = verts
        self.tets = tets


class _ThreadCtx:
    """Per-thread scratch arrays and slot blocks."""

    def __init__(self, tid: int, nthreads: int):
        self.tid = tid
        mc = _kernels.MAX_CAVITY
        mf = _kernels.MAX_FACETS
        self.scratch = (
            np.empty(mc, dtype=np.int64),            # cav
            np.empty(mc, dtype=np.int64),            # ring
            np.empty(mf, dtype=np.int64),            # fac_tet
            np.empty(mf, dtype=np.int64),            # fac_idx
            np.empty(2 * mc + 8, dtype=np.int64),    # claimed
            np.empty(mf, dtype=np.int64),            # newt
            np.empty(3 * mf, dtype=np.int64),        # edge_k0
            np.empty(3 * mf, dtype=np.int64),        # edge_k1
            np.empty(3 * mf, dtype=np.int64),        # edge_tet
            np.empty(3 * mf, dtype=np.int64),        # edge_idx
        )
        self.statuses = np.empty(BATCH, dtype=np.int8)
        self.newbad = np.empty(BATCH * _kernels.ITEM_TET_RESERVE, dtype=np.int64)
        self.items = np.empty(BATCH, dtype=np.int64)


def _lease_verts(mesh, n):
    with mesh._alloc_lock:
        if mesh.vert_next + n > mesh.vert_capacity:
            raise _NeedGrow(verts=n)
        start = mesh.vert_next
        mesh.vert_next += n
        return start, start + n


def _lease_tets(mesh, n):
    with mesh._alloc_lock:
        if mesh.tet_next + n > mesh.tet_capacity:
            raise _NeedGrow(tets=n)
        start = mesh.tet_next
        mesh.tet_next += n
        return start, start + n


def _seed_queue(mesh, img_t, rule_t, box_t, region_leaf) -> np.ndarray:
    out = np.empty(max(mesh.n_alive, 1), dtype=np.int64)
    n = _kernels.scan_bad(
        mesh.verts, mesh.tet_verts, mesh.tet_alive, mesh.tet_owner,
        img_t, rule_t, box_t, np.int64(region_leaf), out,
    )
    if n > out.shape[0]:  # cannot happen: out is sized to the alive count
        raise MeshError("bad-element scan overflow")
    return out[:n]


class _Pool:
    """FIFO work pool with an in-flight latch and failure propagation."""

    def __init__(self, items):
        self.queue = deque(items)
        self.inflight = 0
        self.cond = threading.Condition()
        self.error: BaseException | None = None
        self.grow: _NeedGrow | None = None

    def take(self, out: np.ndarray) -> int:
        """Pop up to len(out) items; blocks while work may still appear.

        Returns 0 at termination (empty and idle) or on failure/grow stop.
        """
        with self.cond:
            while True:
                if self.error is not None or self.grow is not None:
                    return 0
                if self.queue:
                    n = min(len(out), len(self.queue))
                    for i in range(n):
                        out[i] = self.queue.popleft()
                    self.inflight += n
                    return n
                if self.inflight == 0:
                    self.cond.notify_all()
                    return 0
                self.cond.wait(0.05)

    def settle(self, ndone, requeue_tail, requeue_head, newbad):
        with self.cond:
            for t in requeue_head:
                self.queue.appendleft(t)
            for t in requeue_tail:
                self.queue.append(t)
            self.queue.extend(newbad)
            self.inflight -= ndone + len(requeue_head)
            self.cond.notify_all()

    def fail(self, exc: BaseException):
        with self.cond:
            if self.error is None:
                self.error = exc
            self.cond.notify_all()

    def request_grow(self, need: _NeedGrow, pending):
        with self.cond:
            if self.grow is None:
                self.grow = need
            # items this thread still holds go back to the head, in order
            for t in reversed(pending):
                self.queue.appendleft(t)
            self.inflight -= len(pending)
            self.cond.notify_all()


def _ensure_blocks(mesh, ctx, vblock, tblock):
    tid = ctx.tid
    if vblock[tid, 1] - vblock[tid, 0] < BATCH:
        vblock[tid, 0], vblock[tid, 1] = _lease_verts(mesh, VERT_LEASE)
    if tblock[tid, 1] - tblock[tid, 0] < _kernels.ITEM_TET_RESERVE:
        tblock[tid, 0], tblock[tid, 1] = _lease_tets(mesh, TET_LEASE)


def _worker(mesh, pool, ctx, vblock, tblock, img_t, rule_t, dec_t, box_t,
            deadline, stats: RefineStats):
    mesh_t = (
        mesh.verts, mesh.vert_used, mesh.tet_verts, mesh.tet_nbrs,
        mesh.tet_alive, mesh.tet_owner, mesh.tet_bad, mesh.claims,
        mesh.counters, mesh.log_pts,
    )
    blocks = (vblock, tblock)
    items = ctx.items
    while True:
        n = pool.take(items)
        if n == 0:
            return
        taken = [int(items[i]) for i in range(n)]
        try:
            if deadline is not None and time.perf_counter() > deadline:
                raise RefineTimeout("refinement exceeded its wall-time cap")
            try:
                _ensure_blocks(mesh, ctx, vblock, tblock)
            except _NeedGrow as need:
                pool.request_grow(need, taken)
                return
            ndone, nnew = _kernels.process_batch(
                mesh_t, img_t, rule_t, dec_t, box_t, blocks, ctx.scratch,
                ctx.tid, items, n, ctx.statuses, ctx.newbad,
            )
            requeue_tail = []
            for i in range(ndone):
                st = int(ctx.statuses[i])
                if st == _kernels.ST_COMMIT:
                    stats.insertions += 1
                elif st == _kernels.ST_CONTENTION:
                    stats.rollbacks += 1
                    requeue_tail.append(taken[i])
                elif st == _kernels.ST_DUPLICATE:
                    stats.duplicates += 1
                elif st == _kernels.ST_UNSPLITTABLE:
                    stats.unsplittable += 1
                elif st == _kernels.ST_ESCAPE:
                    raise RegionDataError(
                        "cavity requires tets outside the shipped submesh"
                    )
                elif st == _kernels.ST_OVERFLOW:
                    raise MeshError("cavity exceeded the supported size")
                # ST_DEAD: stale queue entry, drop silently
            newbad = ctx.newbad[:nnew].tolist()
            pool.settle(ndone, requeue_tail, taken[ndone:], newbad)
        except BaseException as exc:  # noqa: BLE001 - propagated to caller
            pool.fail(exc)
            return


def refine_region(mesh, image, rule, region=None, nthreads=1,
                  max_seconds=None, dec=None) -> RefineStats:
    """Refine until no element owned by the region violates the rule.

    region is a linear leaf id (requires dec, a Decomposition); None means
    the whole mesh. Termination: the pool empties with nothing in flight,
    at which point no alive tet in the region violates the rule.
    """
    if nthreads < 1:
        raise ValueError("nthreads must be >= 1")
    img_t = image_tuple(image)
    rule_t = rule.kernel_tuple()
    if dec is not None:
        dec_t = dec.kernel_tuple(region)
    else:
        if region is not None:
            raise ValueError("region restriction requires a decomposition")
        dec_t = NO_DECOMP
    box_t = box_tuple(mesh)
    deadline = None
    if max_seconds is not None:
        deadline = time.perf_counter() + max_seconds

    stats = RefineStats(threads=nthreads, log_start=int(mesh.counters[0]))
    t0 = time.perf_counter()
    seed = _seed_queue(mesh, img_t, rule_t, box_t,
                       -1 if region is None else int(region))
    pool = _Pool(seed.tolist())

    ctxs = [_ThreadCtx(tid, nthreads) for tid in range(nthreads)]
    while True:
        vblock = np.zeros((nthreads, 2), dtype=np.int64)
        tblock = np.zeros((nthreads, 2), dtype=np.int64)
        per_thread = [RefineStats() for _ in range(nthreads)]
        if nthreads == 1:
            _worker(mesh, pool, ctxs[0], vblock, tblock, img_t, rule_t,
                    dec_t, box_t, deadline, per_thread[0])
        else:
            threads = [
                threading.Thread(
                    target=_worker,
                    args=(mesh, pool, ctxs[tid], vblock, tblock, img_t,
                          rule_t, dec_t, box_t, deadline, per_thread[tid]),
                    name=f"refine-{tid}",
                )
                for tid in range(nthreads)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        for s in per_thread:
            stats.merge(s)
        if pool.error is not None:
            raise pool.error
        if pool.grow is None:
            break
        need, pool.grow = pool.grow, None
        mesh.grow(vert_extra=max(need.verts, VERT_LEASE * nthreads),
                  tet_extra=max(need.tets, TET_LEASE * nthreads))

    stats.wall_time = time.perf_counter() - t0
    stats.log_end = int(mesh.counters[0])
    return stats


_NULL_RULE = (np.full(256, np.inf), 0.0, np.int64(1))


def insert_point(mesh, p, start: int) -> np.ndarray:
    """Sequential single-point insertion through the claim kernel.

    Raises DuplicatePointError for near-coincident points; the mesh is
    untouched on any failure (the kernel mutates only after the full
    cavity is claimed and checked).
    """
    from .delaunay import CavityError, DuplicatePointError

    if mesh._ctx is None:
        mesh._ctx = _ThreadCtx(0, 1)
        mesh._ins_blocks = (
            np.zeros((1, 2), dtype=np.int64),
            np.zeros((1, 2), dtype=np.int64),
        )
    ctx = mesh._ctx
    vblock, tblock = mesh._ins_blocks
    while True:
        try:
            if vblock[0, 1] - vblock[0, 0] < 1:
                vblock[0] = _lease_verts(mesh, VERT_LEASE)
            if tblock[0, 1] - tblock[0, 0] < _kernels.ITEM_TET_RESERVE:
                tblock[0] = _lease_tets(mesh, TET_LEASE)
            break
        except _NeedGrow as need:
            mesh.grow(vert_extra=max(need.verts, VERT_LEASE),
                      tet_extra=max(need.tets, TET_LEASE))
    mesh_t = (
        mesh.verts, mesh.vert_used, mesh.tet_verts, mesh.tet_nbrs,
        mesh.tet_alive, mesh.tet_owner, mesh.tet_bad, mesh.claims,
        mesh.counters, mesh.log_pts,
    )
    tb0 = tblock[0, 0]
    status, _, _, _ = _kernels._attempt_insert(
        mesh_t, image_tuple(None), _NULL_RULE, NO_DECOMP, box_tuple(mesh),
        (vblock, tblock), ctx.scratch, 0, np.int64(start),
        float(p[0]), float(p[1]), float(p[2]), True,
        ctx.newbad, ctx.newbad.shape[0],
    )
    if status == _kernels.ST_DUPLICATE:
        raise DuplicatePointError(f"point {tuple(p)} duplicates a mesh vertex")
    if status == _kernels.ST_UNSPLITTABLE:
        raise DuplicatePointError(
            f"point {tuple(p)} is not strictly inside the start circumball"
        )
    if status != _kernels.ST_COMMIT:
        raise CavityError(f"insertion failed with kernel status {status}")
    return np.arange(tb0, tblock[0, 0])
