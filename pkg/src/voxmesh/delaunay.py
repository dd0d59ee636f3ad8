"""Bowyer-Watson tetrahedral meshing: mesh storage, point insertion, and
the quality-driven refinement loop shared by every execution mode.

A TetMesh is struct-of-arrays over numpy with append-only slot allocation:
a slot id doubles as a stable global id within one process. Dead slots are
never recycled (the free list is bookkeeping for audits and compaction at
pack time), which keeps ids stable across the speculative layer's
per-thread block allocation.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, geom
from .image import LabeledImage, SizingPolicy


class MeshError(RuntimeError):
    pass


class OutsideHullError(MeshError):
    pass


class DuplicatePointError(MeshError):
    pass


class CavityError(MeshError):
    pass


class RefineTimeout(MeshError):
    """A refinement loop exceeded its wall-time cap."""


class TetMesh:
    """Growable tetrahedral mesh with neighbor adjacency.

    Single-writer unless driven through the speculative layer's claim
    protocol; concurrent read-only audits are safe at quiescence.
    """

    def __init__(self, bbox_lo, bbox_hi, vert_capacity=1024, tet_capacity=4096):
        self.bbox_lo = np.asarray(bbox_lo, dtype=np.float64)
        self.bbox_hi = np.asarray(bbox_hi, dtype=np.float64)
        if not np.all(self.bbox_hi > self.bbox_lo):
            raise MeshError(f"degenerate bounding box {bbox_lo}..{bbox_hi}")
        self.verts = np.zeros((vert_capacity, 3), dtype=np.float64)
        self.vert_used = np.zeros(vert_capacity, dtype=np.uint8)
        self.tet_verts = np.full((tet_capacity, 4), -1, dtype=np.int32)
        self.tet_nbrs = np.full((tet_capacity, 4), -1, dtype=np.int32)
        self.tet_alive = np.zeros(tet_capacity, dtype=np.uint8)
        self.tet_owner = np.full(tet_capacity, -1, dtype=np.int32)
        self.tet_bad = np.zeros(tet_capacity, dtype=np.uint8)
        self.claims = np.zeros(tet_capacity, dtype=np.int32)
        self.counters = np.zeros(1, dtype=np.int64)  # commit sequence
        self.log_pts = np.zeros((vert_capacity, 3), dtype=np.float64)
        self.vert_next = 0
        self.tet_next = 0
        # optional global-id maps maintained by the distributed layer
        self.vert_gid: np.ndarray | None = None
        self.tet_gid: np.ndarray | None = None
        self._alloc_lock = threading.Lock()
        self._stamps = np.full(tet_capacity, -1, dtype=np.int32)
        self._stamp_gen = 0
        self._ctx = None  # cached single-thread engine context
        self._ins_blocks = None

    # -- capacity ---------------------------------------------------------

    @property
    def vert_capacity(self) -> int:
        return self.verts.shape[0]

    @property
    def tet_capacity(self) -> int:
        return self.tet_alive.shape[0]

    def grow(self, vert_extra: int = 0, tet_extra: int = 0) -> None:
        """Reallocate arrays. Caller must guarantee no kernel is running."""
        if vert_extra > 0:
            new = max(self.vert_capacity * 2, self.vert_capacity + vert_extra)
            self.verts = self._grown(self.verts, (new, 3))
            self.vert_used = self._grown(self.vert_used, (new,))
            self.log_pts = self._grown(self.log_pts, (new, 3))
            if self.vert_gid is not None:
                self.vert_gid = self._grown(self.vert_gid, (new,), fill=-1)
        if tet_extra > 0:
            new = max(self.tet_capacity * 2, self.tet_capacity + tet_extra)
            self.tet_verts = self._grown(self.tet_verts, (new, 4), fill=-1)
            self.tet_nbrs = self._grown(self.tet_nbrs, (new, 4), fill=-1)
            self.tet_alive = self._grown(self.tet_alive, (new,))
            self.tet_owner = self._grown(self.tet_owner, (new,), fill=-1)
            self.tet_bad = self._grown(self.tet_bad, (new,))
            self.claims = self._grown(self.claims, (new,))
            self._stamps = self._grown(self._stamps, (new,), fill=-1)
            if self.tet_gid is not None:
                self.tet_gid = self._grown(self.tet_gid, (new,), fill=-1)

    @staticmethod
    def _grown(arr, shape, fill=0):
        out = np.full(shape, fill, dtype=arr.dtype)
        out[: arr.shape[0]] = arr
        return out

    # -- accounting -------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return int(self.vert_used.sum())

    @property
    def n_alive(self) -> int:
        return int(self.tet_alive.sum())

    def alive_slots(self) -> np.ndarray:
        return np.nonzero(self.tet_alive)[0]

    @property
    def free_slots(self) -> np.ndarray:
        """Dead tet slots (created then killed); informational."""
        created = self.tet_verts[: self.tet_next, 0] >= 0
        dead = self.tet_alive[: self.tet_next] == 0
        return np.nonzero(created & dead)[0]

    def alive_points(self) -> np.ndarray:
        """Coordinates of alive tets, shape (n, 4, 3)."""
        slots = self.alive_slots()
        return self.verts[self.tet_verts[slots]]

    def barycenters(self, slots=None) -> np.ndarray:
        if slots is None:
            slots = self.alive_slots()
        return self.verts[self.tet_verts[slots]].mean(axis=1)

    def commit_points(self, start: int = 0, end: int | None = None) -> np.ndarray:
        if end is None:
            end = int(self.counters[0])
        return self.log_pts[start:end].copy()

    def content_sets(self):
        """Geometry-keyed content: vertex coordinate set and tet corner sets.

        Slot numbering and id gaps are representation details; two meshes
        are the same mesh iff these sets match.
        """
        vs = {tuple(p) for p in self.verts[self.vert_used == 1]}
        ts = {
            frozenset(map(tuple, quad))
            for quad in self.verts[self.tet_verts[self.alive_slots()]]
        }
        return vs, ts

    # -- direct construction (bootstrap, unpack) ---------------------------

    def add_vertex(self, p) -> int:
        with self._alloc_lock:
            if self.vert_next >= self.vert_capacity:
                self.grow(vert_extra=1)
            vid = self.vert_next
            self.vert_next += 1
        self.verts[vid] = p
        self.vert_used[vid] = 1
        return vid

    def add_tet(self, vids, nbrs=(-1, -1, -1, -1), owner=-1) -> int:
        with self._alloc_lock:
            if self.tet_next >= self.tet_capacity:
                self.grow(tet_extra=1)
            t = self.tet_next
            self.tet_next += 1
        self.tet_verts[t] = vids
        self.tet_nbrs[t] = nbrs
        self.tet_alive[t] = 1
        self.tet_owner[t] = owner
        return t

    def next_stamp_gen(self) -> int:
        self._stamp_gen += 1
        if self._stamp_gen >= 2**31 - 1:
            self._stamps[:] = -1
            self._stamp_gen = 1
        return self._stamp_gen


@dataclass(frozen=True)
class Cavity:
    """Conflict region of a candidate point: tet ids and boundary facets."""

    point: tuple[float, float, float]
    tets: np.ndarray
    facets: np.ndarray  # (n, 2): cavity tet slot, local facet index

    def __len__(self):
        return len(self.tets)


@dataclass(frozen=True)
class RefinementRule:
    """Quality target: radius-edge bound and target circumradius.

    ``rho_max`` of None disables the shape test (pure sizing pass);
    otherwise it must be >= 2, the termination-safe regime.
    ``count_background`` makes the rule apply to background-labeled
    elements too (used for the geometric background pass of the
    distributed layer).
    """

    sizing: SizingPolicy | float
    rho_max: float | None = 2.0
    count_background: bool = False

    def __post_init__(self):
        if self.rho_max is not None and self.rho_max < 2.0:
            raise ValueError(
                f"radius-edge bound {self.rho_max} < 2 cannot guarantee termination"
            )

    @property
    def policy(self) -> SizingPolicy:
        if isinstance(self.sizing, SizingPolicy):
            return self.sizing
        return SizingPolicy(h=float(self.sizing))

    def h_table(self) -> np.ndarray:
        pol = self.policy
        table = np.full(256, pol.h, dtype=np.float64)
        for label, h in pol.per_label.items():
            table[int(label)] = h
        return table

    def kernel_tuple(self) -> tuple:
        rho = 0.0 if self.rho_max is None else float(self.rho_max)
        return (self.h_table(), rho, np.int64(1 if self.count_background else 0))


# one-voxel background image for rule-less kernel calls
_NULL_LABELS = np.zeros((1, 1, 1), dtype=np.uint8)


def image_tuple(img: LabeledImage | None) -> tuple:
    if img is None:
        return (_NULL_LABELS, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    return (
        img.labels,
        float(img.origin[0]), float(img.origin[1]), float(img.origin[2]),
        float(img.spacing[0]), float(img.spacing[1]), float(img.spacing[2]),
    )


def box_tuple(mesh: TetMesh) -> tuple:
    lo = mesh.bbox_lo
    hi = mesh.bbox_hi
    return (lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])


NO_DECOMP = (np.int64(0), 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, np.int64(-1))


def bootstrap(img: LabeledImage) -> TetMesh:
    """Delaunay mesh of the image bounding box: 8 corners, 6 canonical tets.

    All box corners are cospherical, so any box triangulation is (weakly)
    Delaunay; the main-diagonal template is used for determinism.
    """
    lo, hi = img.bbox
    mesh = TetMesh(lo, hi)
    corner_ids = {}
    for bits in itertools.product((0, 1), repeat=3):
        p = np.where(np.array(bits) == 1, hi, lo)
        corner_ids[bits] = mesh.add_vertex(p)

    def bits_of(*axes):
        b = [0, 0, 0]
        for a in axes:
            b[a] = 1
        return tuple(b)

    tets = []
    for perm in itertools.permutations((0, 1, 2)):
        quad = [
            corner_ids[(0, 0, 0)],
            corner_ids[bits_of(perm[0])],
            corner_ids[bits_of(perm[0], perm[1])],
            corner_ids[(1, 1, 1)],
        ]
        if geom.orient3d(*(mesh.verts[v] for v in quad)) < 0:
            quad[2], quad[3] = quad[3], quad[2]
        tets.append(quad)

    slots = [mesh.add_tet(q) for q in tets]
    # adjacency by facet matching (opposite-vertex convention)
    facet_map: dict[frozenset, list] = {}
    for t, quad in zip(slots, tets):
        for i in range(4):
            key = frozenset(quad[:i] + quad[i + 1:])
            facet_map.setdefault(key, []).append((t, i))
    for key, sides in facet_map.items():
        if len(sides) == 2:
            (t1, i1), (t2, i2) = sides
            mesh.tet_nbrs[t1, i1] = t2
            mesh.tet_nbrs[t2, i2] = t1
        elif len(sides) > 2:
            raise MeshError("facet shared by more than two template tets")
    return mesh


def locate(mesh: TetMesh, p, hint: int = 0) -> int:
    """Alive tet containing p (lowest id among tied containers)."""
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise OutsideHullError(f"non-finite point {p}")
    gen = mesh.next_stamp_gen()
    status, t = _kernels.walk_locate(
        mesh.verts, mesh.tet_verts, mesh.tet_nbrs, mesh.tet_alive,
        p[0], p[1], p[2], hint, mesh._stamps, gen,
    )
    if status == 1:
        raise OutsideHullError(f"point {tuple(p)} lies outside the mesh hull")
    if status == 3:
        raise CavityError("walk crossed into a region with no shipped data")
    if status != 0:
        raise MeshError("point location failed: no alive tets")
    return int(_kernels.lowest_container(
        mesh.verts, mesh.tet_verts, mesh.tet_nbrs, mesh.tet_alive,
        p[0], p[1], p[2], t,
    ))


def compute_cavity(mesh: TetMesh, p, start: int) -> Cavity:
    """Conflict cavity of p grown breadth-first from a containing tet."""
    p = np.asarray(p, dtype=np.float64)
    cav = np.empty(_kernels.MAX_CAVITY, dtype=np.int64)
    fac_tet = np.empty(_kernels.MAX_FACETS, dtype=np.int64)
    fac_idx = np.empty(_kernels.MAX_FACETS, dtype=np.int64)
    status, ncav, nfac = _kernels.grow_cavity_readonly(
        mesh.verts, mesh.tet_verts, mesh.tet_nbrs, mesh.tet_alive,
        p[0], p[1], p[2], int(start), cav, fac_tet, fac_idx,
    )
    if status == _kernels.ST_DEAD:
        raise CavityError(f"start tet {start} is not alive")
    if status == _kernels.ST_UNSPLITTABLE:
        raise CavityError(
            "point is not strictly inside the circumball of the start tet"
        )
    if status == _kernels.ST_ESCAPE:
        raise CavityError("cavity reaches beyond the available submesh")
    if status == _kernels.ST_OVERFLOW:
        raise CavityError("cavity exceeds the supported size")
    facets = np.stack([fac_tet[:nfac], fac_idx[:nfac]], axis=1)
    return Cavity(point=tuple(p), tets=cav[:ncav].copy(), facets=facets)


def insert(mesh: TetMesh, p, cavity: Cavity | None = None) -> np.ndarray:
    """Insert one point sequentially; returns the new tet slots.

    Rejects near-duplicate points (closer than 1e-12 of the bbox diagonal
    to an existing vertex) leaving the mesh untouched.
    """
    from . import speculative

    p = np.asarray(p, dtype=np.float64)
    if cavity is not None and tuple(p) != tuple(cavity.point):
        raise CavityError("cavity was computed for a different point")
    if np.any(p < mesh.bbox_lo) or np.any(p > mesh.bbox_hi):
        raise OutsideHullError(f"insert point {tuple(p)} outside the box")
    start = int(cavity.tets[0]) if cavity is not None and len(cavity) else None
    if start is None:
        start = locate(mesh, p)
    return speculative.insert_point(mesh, p, start)


def refine(mesh, image, rule, region=None, max_seconds=None, dec=None):
    """Sequential refinement to the rule's fixpoint (FIFO discipline).

    Identical, queue item for queue item, to the speculative engine run
    with one thread; see speculative.refine_region.
    """
    from . import speculative

    return speculative.refine_region(
        mesh, image, rule, region=region, nthreads=1,
        max_seconds=max_seconds, dec=dec,
    )
