"""Geometric predicates and tetrahedron quality measures.

Predicate decisions (orientation, circumsphere membership) are exact for
coordinates within the supported magnitude range; positions derived from
them (circumcenters) are ordinary floating point. Angles are degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._predicates import insphere_sign, orient3d_sign

# Exponent guard: expansion arithmetic is exact only while intermediate
# degree-5 products neither overflow nor underflow.
COORD_MAX = 1e50
COORD_MIN = 1e-50

POSITIVE = INSIDE = 1
NEGATIVE = OUTSIDE = -1
DEGENERATE = COSPHERICAL = 0

MIN_RADIUS_EDGE = np.sqrt(6.0) / 4.0  # attained by the regular tetrahedron


class GeometryError(ValueError):
    """Invalid input to a geometric predicate or measure."""


def _check_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,):
        raise GeometryError(f"expected a 3d point, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise GeometryError(f"non-finite coordinate in {p!r}")
    mag = np.abs(p)
    if np.any(mag > COORD_MAX) or np.any((mag > 0) & (mag < COORD_MIN)):
        raise GeometryError(f"coordinate magnitude outside supported range: {p!r}")
    return p


def orient3d(a, b, c, d) -> int:
    """Side of plane(a,b,c) that d lies on.

    Returns POSITIVE (+1) if (a,b,c,d) is positively oriented, NEGATIVE (-1)
    for the mirror ordering, DEGENERATE (0) if coplanar. The decision is
    exact.
    """
    a = _check_point(a)
    b = _check_point(b)
    c = _check_point(c)
    d = _check_point(d)
    return orient3d_sign(a[0], a[1], a[2], b[0], b[1], b[2],
                         c[0], c[1], c[2], d[0], d[1], d[2])


def insphere(a, b, c, d, e) -> int:
    """Exact circumsphere membership of e for positively oriented (a,b,c,d).

    Returns INSIDE (+1) / OUTSIDE (-1) / COSPHERICAL (0). Raises if the
    tetrahedron is degenerate or negatively oriented.
    """
    a = _check_point(a)
    b = _check_point(b)
    c = _check_point(c)
    d = _check_point(d)
    e = _check_point(e)
    if orient3d_sign(a[0], a[1], a[2], b[0], b[1], b[2],
                     c[0], c[1], c[2], d[0], d[1], d[2]) <= 0:
        raise GeometryError("insphere requires a positively oriented tetrahedron")
    return insphere_sign(a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2],
                         d[0], d[1], d[2], e[0], e[1], e[2])


@dataclass(frozen=True)
class QualityVector:
    """Per-element quality: six dihedral angles (degrees), radius-edge
    ratio, circumradius, and the circumcenter as a by-product."""

    dihedrals: np.ndarray
    radius_edge: float
    circumradius: float
    circumcenter: np.ndarray


# local vertex pairs forming the six edges; opposite pair completes the tet
_EDGE_PAIRS = np.array(
    [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], dtype=np.int64
)
_EDGE_OPP = np.array(
    [(2, 3), (1, 3), (1, 2), (0, 3), (0, 2), (0, 1)], dtype=np.int64
)


def circumspheres(tets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Circumcenters and circumradii for an (n, 4, 3) array of tets.

    Uses the explicit cross-product formula; float only. Degenerate tets
    yield inf radii rather than raising.
    """
    tets = np.asarray(tets, dtype=np.float64)
    a = tets[:, 0]
    u = tets[:, 1] - a
    v = tets[:, 2] - a
    w = tets[:, 3] - a
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    ww = np.einsum("ij,ij->i", w, w)
    vxw = np.cross(v, w)
    wxu = np.cross(w, u)
    uxv = np.cross(u, v)
    vol6 = np.einsum("ij,ij->i", u, vxw)
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = (
            uu[:, None] * vxw + vv[:, None] * wxu + ww[:, None] * uxv
        ) / (2.0 * vol6[:, None])
    centers = a + offset
    radii = np.linalg.norm(offset, axis=1)
    radii = np.where(np.isfinite(radii), radii, np.inf)
    return centers, radii


def dihedral_angles(tets: np.ndarray) -> np.ndarray:
    """Interior dihedral angles in degrees, shape (n, 6)."""
    tets = np.asarray(tets, dtype=np.float64)
    n = tets.shape[0]
    angles = np.empty((n, 6))
    for k in range(6):
        i, j = _EDGE_PAIRS[k]
        ka, kb = _EDGE_OPP[k]
        e = tets[:, j] - tets[:, i]
        n1 = np.cross(e, tets[:, ka] - tets[:, i])
        n2 = np.cross(e, tets[:, kb] - tets[:, i])
        cross = np.cross(n1, n2)
        sin_t = np.linalg.norm(cross, axis=1)
        cos_t = np.einsum("ij,ij->i", n1, n2)
        angles[:, k] = np.degrees(np.arctan2(sin_t, cos_t))
    return angles


def radius_edge_ratios(tets: np.ndarray) -> np.ndarray:
    """Circumradius over shortest edge for an (n, 4, 3) array of tets."""
    tets = np.asarray(tets, dtype=np.float64)
    _, radii = circumspheres(tets)
    edges = tets[:, _EDGE_PAIRS[:, 1]] - tets[:, _EDGE_PAIRS[:, 0]]
    lengths = np.linalg.norm(edges, axis=2)
    return radii / lengths.min(axis=1)


def quality(tet) -> QualityVector:
    """Quality vector of one tetrahedron. Raises on degenerate input."""
    pts = np.asarray(tet, dtype=np.float64)
    if pts.shape != (4, 3):
        raise GeometryError(f"expected a (4, 3) tetrahedron, got {pts.shape}")
    for p in pts:
        _check_point(p)
    if orient3d_sign(*pts.ravel()) == 0:
        raise GeometryError("degenerate tetrahedron has no quality vector")
    batch = pts[None]
    centers, radii = circumspheres(batch)
    angles = dihedral_angles(batch)[0]
    edges = pts[_EDGE_PAIRS[:, 1]] - pts[_EDGE_PAIRS[:, 0]]
    shortest = np.linalg.norm(edges, axis=1).min()
    return QualityVector(
        dihedrals=angles,
        radius_edge=float(radii[0] / shortest),
        circumradius=float(radii[0]),
        circumcenter=centers[0],
    )
