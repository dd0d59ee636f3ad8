"""Uniform octree domain decomposition and the scheduler's dependency test.

A depth-d decomposition tiles the image bounding box with 8^d axis-aligned
leaves indexed (i, j, k) in [0, 2^d)^3. A refinement task on a leaf needs
the submeshes of every leaf within Chebyshev index distance <= 2 (its
influence region) and may write anywhere inside it, so two tasks can run
concurrently only when their leaves are at Chebyshev distance >= 5.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

MAX_DEPTH = 6
INFLUENCE_LAYERS = 2
MIN_INDEPENDENT = 2 * INFLUENCE_LAYERS + 1


class DecompositionError(ValueError):
    pass


@dataclass
class Decomposition:
    """Uniform octree over a bounding box with per-leaf scheduler state."""

    depth: int
    bbox_lo: np.ndarray
    bbox_hi: np.ndarray
    n: int = field(init=False)
    counts: np.ndarray = field(init=False)
    dirty: set = field(init=False)
    owner_rank: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (0 <= self.depth <= MAX_DEPTH):
            raise DecompositionError(
                f"octree depth {self.depth} outside [0, {MAX_DEPTH}]"
            )
        self.bbox_lo = np.asarray(self.bbox_lo, dtype=np.float64)
        self.bbox_hi = np.asarray(self.bbox_hi, dtype=np.float64)
        if not np.all(self.bbox_hi > self.bbox_lo):
            raise DecompositionError("degenerate bounding box")
        self.n = 2 ** self.depth
        self.counts = np.zeros(self.n_leaves, dtype=np.int64)
        self.dirty = set()
        self.owner_rank = np.zeros(self.n_leaves, dtype=np.int32)

    # -- indexing ----------------------------------------------------------

    @property
    def n_leaves(self) -> int:
        return self.n ** 3

    @property
    def leaf_size(self) -> np.ndarray:
        return (self.bbox_hi - self.bbox_lo) / self.n

    def linear(self, ijk) -> int:
        i, j, k = ijk
        self._check(i, j, k)
        return (i * self.n + j) * self.n + k

    def ijk(self, leaf: int) -> tuple[int, int, int]:
        if not (0 <= leaf < self.n_leaves):
            raise DecompositionError(f"leaf {leaf} out of range")
        k = leaf % self.n
        j = (leaf // self.n) % self.n
        i = leaf // (self.n * self.n)
        return (i, j, k)

    def _check(self, i, j, k):
        if not (0 <= i < self.n and 0 <= j < self.n and 0 <= k < self.n):
            raise DecompositionError(f"leaf index ({i},{j},{k}) out of range")

    def leaf_box(self, leaf: int) -> tuple[np.ndarray, np.ndarray]:
        i, j, k = self.ijk(leaf)
        ext = self.bbox_hi - self.bbox_lo
        idx = np.array([i, j, k], dtype=np.float64)
        lo = self.bbox_lo + ext * (idx / self.n)
        hi = self.bbox_lo + ext * ((idx + 1) / self.n)
        return lo, hi

    def kernel_tuple(self, region_leaf=None) -> tuple:
        ls = self.leaf_size
        return (
            np.int64(self.n),
            float(self.bbox_lo[0]), float(self.bbox_lo[1]), float(self.bbox_lo[2]),
            float(ls[0]), float(ls[1]), float(ls[2]),
            np.int64(-1 if region_leaf is None else region_leaf),
        )

    # -- geometry queries ---------------------------------------------------

    def leaf_of_point(self, p) -> int:
        """Leaf containing p; face ties go to the lower-index leaf."""
        p = np.asarray(p, dtype=np.float64)
        ls = self.leaf_size
        idx = np.ceil((p - self.bbox_lo) / ls).astype(np.int64) - 1
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise DecompositionError(f"point {tuple(p)} outside the box")
        return self.linear(tuple(int(x) for x in idx))

    def influence(self, leaf: int) -> np.ndarray:
        """Linear ids of the leaf plus its two buffer layers, clipped."""
        i, j, k = self.ijk(leaf)
        r = INFLUENCE_LAYERS
        out = []
        for ii in range(max(0, i - r), min(self.n, i + r + 1)):
            for jj in range(max(0, j - r), min(self.n, j + r + 1)):
                for kk in range(max(0, k - r), min(self.n, k + r + 1)):
                    out.append((ii * self.n + jj) * self.n + kk)
        return np.array(out, dtype=np.int64)

    def independent(self, a: int, b: int) -> bool:
        """O(1) test: influence regions disjoint (Chebyshev distance >= 5)."""
        ia, ja, ka = self.ijk(a)
        ib, jb, kb = self.ijk(b)
        return max(abs(ia - ib), abs(ja - jb), abs(ka - kb)) >= MIN_INDEPENDENT

    # -- scheduler state ----------------------------------------------------

    def mark_dirty(self, leaves) -> None:
        for leaf in np.atleast_1d(np.asarray(leaves, dtype=np.int64)):
            leaf = int(leaf)
            if not (0 <= leaf < self.n_leaves):
                raise DecompositionError(f"leaf {leaf} out of range")
            self.dirty.add(leaf)

    def mark_clean(self, leaf: int) -> None:
        self.dirty.discard(int(leaf))

    def next_dirty(self, active) -> int | None:
        """Largest dirty leaf independent of every active leaf.

        Largest by element-count estimate; ties break to the lowest
        (i, j, k) lexicographically for reproducible schedules.
        """
        best = None
        best_key = None
        for leaf in self.dirty:
            if any(not self.independent(leaf, a) for a in active):
                continue
            key = (-int(self.counts[leaf]), self.ijk(leaf))
            if best_key is None or key < best_key:
                best = leaf
                best_key = key
        return best


def build(depth: int, bbox_lo, bbox_hi) -> Decomposition:
    return Decomposition(depth=depth, bbox_lo=bbox_lo, bbox_hi=bbox_hi)


def partition(mesh, dec: Decomposition, image=None, rule=None) -> None:
    """Assign every alive tet to the leaf containing its barycenter.

    Face ties go to the lower-index leaf. Populates per-leaf counts and,
    when a rule is given, marks leaves holding rule-violating elements
    dirty.
    """
    slots = mesh.alive_slots()
    if len(slots) == 0:
        dec.counts[:] = 0
        return
    bary = mesh.barycenters(slots)
    ls = dec.leaf_size
    idx = np.ceil((bary - dec.bbox_lo) / ls).astype(np.int64) - 1
    if np.any(idx < 0) or np.any(idx >= dec.n):
        raise DecompositionError("tet barycenter outside the bounding box")
    linear = (idx[:, 0] * dec.n + idx[:, 1]) * dec.n + idx[:, 2]
    mesh.tet_owner[slots] = linear.astype(np.int32)
    dec.counts[:] = np.bincount(linear, minlength=dec.n_leaves)
    if rule is not None:
        bad = np.zeros(dec.n_leaves, dtype=np.int64)
        alln = np.zeros(dec.n_leaves, dtype=np.int64)
        from .delaunay import image_tuple

        _kernels.count_bad_per_leaf(
            mesh.verts, mesh.tet_verts, mesh.tet_alive, mesh.tet_owner,
            image_tuple(image), rule.kernel_tuple(), bad, alln,
        )
        dec.mark_dirty(np.nonzero(bad > 0)[0])


def coarse_target_h(dec: Decomposition) -> float:
    """Background-mesh circumradius bound that confines any insertion's
    read/write set to the influence region of its leaf.

    Every tet of a mesh refined to circumradius <= h keeps all empty
    circumballs at radius <= 2h, so a cavity plus its surrounding ring
    stays within 5 * 2h of the bad element's barycenter; h = leaf/5 keeps
    that under two leaf layers. Shallow trees whose influence region is
    the whole grid carry no constraint and use leaf/4.
    """
    ls = float(min(dec.leaf_size))
    if dec.n <= 3:
        return ls / 4.0
    return ls / 5.0


# -- grant log -------------------------------------------------------------


class GrantLog:
    """JSON-lines log of task grants and completions for the safety audit."""

    def __init__(self, path=None):
        self.path = path
        self.records: list[dict] = []
        self._fh = open(path, "w") if path else None

    def append(self, **record) -> None:
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @staticmethod
    def load(path) -> list[dict]:
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]


def audit_grant_log(records, dec: Decomposition) -> list[str]:
    """Scheduler-safety violations: overlapping grants must be independent.

    Returns human-readable violation strings (empty list = clean).
    """
    spans = {}
    order = []
    for rec in records:
        if rec["event"] == "grant":
            spans[rec["task"]] = [rec["leaf"], rec["t"], None]
            order.append(rec["task"])
        elif rec["event"] == "complete":
            spans[rec["task"]][2] = rec["t"]
    violations = []
    for x in range(len(order)):
        for y in range(x + 1, len(order)):
            la, ta0, ta1 = spans[order[x]]
            lb, tb0, tb1 = spans[order[y]]
            ta1 = np.inf if ta1 is None else ta1
            tb1 = np.inf if tb1 is None else tb1
            overlap = max(ta0, tb0) < min(ta1, tb1)
            if overlap and not dec.independent(la, lb):
                violations.append(
                    f"tasks {order[x]} and {order[y]} overlapped on dependent "
                    f"leaves {dec.ijk(la)} / {dec.ijk(lb)}"
                )
    return violations
