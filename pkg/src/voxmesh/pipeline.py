"""Single-process meshing pipelines: bootstrap, background pass, object pass.

Every execution mode shares the same preprocessing recipe the distributed
layer uses for its coarse background mesh:

1. bootstrap the box template,
2. seed a jittered lattice at the background scale and refine the whole box
   to circumradius <= h_bg (bounds every empty circumball, which both
   resolves the object's interior and localizes later cavities),
3. refine elements whose barycenter is inside the object to the quality
   rule (radius-edge and target size).

The lattice jitter is a pure hash of the lattice index: runs are
deterministic with no RNG state.
"""

from __future__ import annotations

import numpy as np

from .delaunay import (
    DuplicatePointError,
    OutsideHullError,
    RefinementRule,
    TetMesh,
    bootstrap,
    locate,
)
from .image import LabeledImage, SizingPolicy
from .speculative import RefineStats, insert_point, refine_region

JITTER = 0.25  # of the lattice step


def _hash_unit(i, j, k, axis):
    """Deterministic value in [-1, 1) from a lattice index (splitmix64)."""
    with np.errstate(over="ignore"):
        x = (
            np.uint64(i) * np.uint64(0x9E3779B97F4A7C15)
            + np.uint64(j) * np.uint64(0xC2B2AE3D27D4EB4F)
            + np.uint64(k) * np.uint64(0x165667B19E3779F9)
            + np.uint64(axis) * np.uint64(0x27D4EB2F165667C5)
        )
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return float(x) / 2.0**63 - 1.0


def lattice_points(bbox_lo, bbox_hi, step: float) -> np.ndarray:
    """Jittered background lattice: box edges, walls, then the interior.

    Surface points lie exactly on their wall plane (jitter is in-plane
    only) so every empty circumball's in-box extent stays bounded by the
    surface point spacing; without them, near-wall slivers keep legally
    empty circumballs that bulge outside the box and refinement to a
    circumradius bound cannot terminate. Point order is deterministic.
    """
    lo = np.asarray(bbox_lo, dtype=np.float64)
    hi = np.asarray(bbox_hi, dtype=np.float64)
    ext = hi - lo
    counts = np.maximum(np.floor(ext / step).astype(np.int64), 1)
    cell = ext / counts
    pts = []

    def line(axis, fixed):
        n = counts[axis]
        for i in range(1, n):
            p = np.array(fixed, dtype=np.float64)
            p[axis] = lo[axis] + i * cell[axis] + _hash_unit(
                i, int(fixed[(axis + 1) % 3]), int(fixed[(axis + 2) % 3]), axis
            ) * (JITTER * cell[axis])
            pts.append(p)

    # 12 box edges (corners are bootstrap vertices already)
    for axis in range(3):
        a1, a2 = (axis + 1) % 3, (axis + 2) % 3
        for s1 in (lo[a1], hi[a1]):
            for s2 in (lo[a2], hi[a2]):
                fixed = np.zeros(3)
                fixed[a1], fixed[a2] = s1, s2
                line(axis, fixed)

    # 6 walls, jittered in-plane
    for axis in range(3):
        a1, a2 = (axis + 1) % 3, (axis + 2) % 3
        for wall in (lo[axis], hi[axis]):
            side = 7 if wall == hi[axis] else 3
            for j in range(1, counts[a2]):
                for i in range(1, counts[a1]):
                    p = np.zeros(3)
                    p[axis] = wall
                    p[a1] = lo[a1] + i * cell[a1] + _hash_unit(
                        i, j, axis, side
                    ) * (JITTER * cell[a1])
                    p[a2] = lo[a2] + j * cell[a2] + _hash_unit(
                        i, j, axis, side + 1
                    ) * (JITTER * cell[a2])
                    pts.append(p)

    # interior
    for k in range(counts[2]):
        for j in range(counts[1]):
            for i in range(counts[0]):
                base = lo + (np.array([i, j, k]) + 0.5) * cell
                jit = np.array(
                    [_hash_unit(i, j, k, a) for a in range(3)]
                ) * (JITTER * step)
                pts.append(np.clip(base + jit, lo + 0.25 * step,
                                   hi - 0.25 * step))
    return np.array(pts)


def seed_lattice(mesh: TetMesh, step: float) -> int:
    """Insert the background lattice; returns the number of points placed."""
    pts = lattice_points(mesh.bbox_lo, mesh.bbox_hi, step)
    placed = 0
    hint = 0
    for p in pts:
        try:
            start = locate(mesh, p, hint=hint)
            newt = insert_point(mesh, p, start)
            if len(newt):
                hint = int(newt[0])
            placed += 1
        except (DuplicatePointError, OutsideHullError):
            continue
    return placed


def default_background_h(img: LabeledImage) -> float:
    lo, hi = img.bbox
    return float(min(hi - lo)) / 8.0


def background_rule(h_bg: float) -> RefinementRule:
    return RefinementRule(sizing=h_bg, rho_max=None, count_background=True)


def build_background(
    img: LabeledImage,
    h_bg: float | None = None,
    nthreads: int = 1,
    max_seconds: float | None = None,
) -> tuple[TetMesh, RefineStats]:
    """Bootstrap plus the geometric background pass over the whole box."""
    if h_bg is None:
        h_bg = default_background_h(img)
    mesh = bootstrap(img)
    seed_lattice(mesh, h_bg)
    stats = refine_region(
        mesh, img, background_rule(h_bg), nthreads=nthreads,
        max_seconds=max_seconds,
    )
    return mesh, stats


def mesh_image(
    img: LabeledImage,
    sizing: SizingPolicy | float,
    rho_max: float | None = 2.0,
    h_bg: float | None = None,
    nthreads: int = 1,
    max_seconds: float | None = None,
) -> tuple[TetMesh, RefineStats, RefineStats]:
    """Full single-node pipeline; returns (mesh, background stats, object stats).

    With nthreads=1 the run is deterministic and bit-identical to the
    sequential mode.
    """
    mesh, bg_stats = build_background(
        img, h_bg=h_bg, nthreads=nthreads, max_seconds=max_seconds
    )
    rule = RefinementRule(sizing=sizing, rho_max=rho_max)
    obj_stats = refine_region(
        mesh, img, rule, nthreads=nthreads, max_seconds=max_seconds
    )
    return mesh, bg_stats, obj_stats


def kept_filter(mesh: TetMesh, img: LabeledImage) -> np.ndarray:
    """Alive tet slots whose barycenter is inside the object (label != 0)."""
    slots = mesh.alive_slots()
    if len(slots) == 0:
        return slots
    labels = img.classify_many(mesh.barycenters(slots))
    return slots[labels != 0]
