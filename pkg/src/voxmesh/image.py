"""Labeled voxel images: raw file ingestion, synthetic phantoms, queries.

File format (DMI1): 32-byte header -- magic ``DMI1``, dims as three u32
little-endian, spacing as three f32, label width byte (always 1), three pad
bytes -- followed by raw uint8 labels in x-fastest order. Label 0 is
background. Physical coordinates are ``origin + index * spacing`` (mm);
files carry no origin, loaded images sit at the origin.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"DMI1"
_HEADER = struct.Struct("<4s 3I 3f B 3x")


class ImageFormatError(ValueError):
    """Malformed image file or inconsistent construction arguments."""


@dataclass
class LabeledImage:
    """3D grid of material labels with physical spacing.

    ``labels`` is indexed [x, y, z]; immutable by convention after load so
    instances can be shared across threads.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    labels: np.ndarray
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    checksum: str = field(default="", compare=False)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 1:
            raise ImageFormatError(f"dims must all be >= 1, got {self.dims}")
        if min(self.spacing) <= 0:
            raise ImageFormatError(f"spacing must be positive, got {self.spacing}")
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.shape != (nx, ny, nz):
            if self.labels.size == nx * ny * nz:
                self.labels = self.labels.reshape((nx, ny, nz), order="F") \
                    if self.labels.ndim == 1 else self.labels
            else:
                raise ImageFormatError(
                    f"label array has {self.labels.size} voxels, "
                    f"dims imply {nx * ny * nz}"
                )
        if not self.checksum:
            self.checksum = hashlib.sha256(self.tobytes()).hexdigest()

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin, dtype=np.float64)
        hi = lo + np.asarray(self.dims) * np.asarray(self.spacing)
        return lo, hi

    def tobytes(self) -> bytes:
        header = _HEADER.pack(
            MAGIC, *self.dims, *(np.float32(s) for s in self.spacing), 1
        )
        return header + self.labels.tobytes(order="F")

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.tobytes())

    def classify(self, p) -> int:
        """Label of the voxel containing p; 0 outside the grid.

        Points exactly on a voxel face belong to the lower-index voxel
        along the tied axis, so lattice-plane points classify
        deterministically.
        """
        p = np.asarray(p, dtype=np.float64)
        idx = []
        for axis in range(3):
            t = (p[axis] - self.origin[axis]) / self.spacing[axis]
            i = math.ceil(t) - 1
            if i < 0 or i >= self.dims[axis]:
                return 0
            idx.append(i)
        return int(self.labels[idx[0], idx[1], idx[2]])

    def classify_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized classify; background for out-of-grid points."""
        pts = np.asarray(pts, dtype=np.float64)
        t = (pts - np.asarray(self.origin)) / np.asarray(self.spacing)
        idx = np.ceil(t).astype(np.int64) - 1
        ok = np.all((idx >= 0) & (idx < np.asarray(self.dims)), axis=1)
        out = np.zeros(len(pts), dtype=np.uint8)
        sel = idx[ok]
        out[ok] = self.labels[sel[:, 0], sel[:, 1], sel[:, 2]]
        return out

    def voxel_centers(self) -> np.ndarray:
        """Physical centers of all voxels, shape (nx, ny, nz, 3)."""
        axes = [
            self.origin[a] + (np.arange(self.dims[a]) + 0.5) * self.spacing[a]
            for a in range(3)
        ]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)


def load_raw(path) -> LabeledImage:
    """Load a DMI1 file; raises ImageFormatError naming the offending field."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ImageFormatError(f"file shorter than the {_HEADER.size}-byte header")
    magic, nx, ny, nz, sx, sy, sz, width = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ImageFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if width != 1:
        raise ImageFormatError(f"unsupported label width {width}")
    if min(nx, ny, nz) < 1:
        raise ImageFormatError(f"bad dims ({nx}, {ny}, {nz})")
    if min(sx, sy, sz) <= 0 or not all(map(math.isfinite, (sx, sy, sz))):
        raise ImageFormatError(f"bad spacing ({sx}, {sy}, {sz})")
    payload = blob[_HEADER.size:]
    expected = nx * ny * nz
    if len(payload) != expected:
        raise ImageFormatError(
            f"payload holds {len(payload)} labels, dims imply {expected}"
        )
    labels = np.frombuffer(payload, dtype=np.uint8).reshape((nx, ny, nz), order="F")
    return LabeledImage(
        dims=(nx, ny, nz),
        spacing=(float(np.float32(sx)), float(np.float32(sy)), float(np.float32(sz))),
        labels=labels.copy(),
        checksum=hashlib.sha256(blob).hexdigest(),
    )


def make_phantom(kind: str, dims, spacing=(1.0, 1.0, 1.0), **params) -> LabeledImage:
    """Deterministic synthetic test volumes.

    kinds:
      sphere      -- params r (mm), center (defaults to box center), label
      ellipsoid   -- params radii=(rx,ry,rz), center, label
      two-spheres -- params r1, r2, c1, c2; labels 1 and 2

    The shape must fit inside the grid.
    """
    if isinstance(dims, int):
        dims = (dims, dims, dims)
    dims = tuple(int(d) for d in dims)
    if isinstance(spacing, (int, float)):
        spacing = (float(spacing),) * 3
    img = LabeledImage(dims=dims, spacing=spacing,
                       labels=np.zeros(dims, dtype=np.uint8))
    lo, hi = img.bbox
    centers = img.voxel_centers()

    def fill(center, radii, label):
        center = np.asarray(center, dtype=np.float64)
        radii = np.asarray(radii, dtype=np.float64)
        if np.any(radii < 0):
            raise ImageFormatError(f"negative radius {radii}")
        if np.any(center - radii < lo) or np.any(center + radii > hi):
            raise ImageFormatError(
                f"shape centered {center} with radii {radii} exceeds the grid"
            )
        if np.all(radii == 0):
            return
        d2 = np.zeros(dims)
        for a in range(3):
            if radii[a] == 0:
                return
            d2 += ((centers[..., a] - center[a]) / radii[a]) ** 2
        img.labels[d2 <= 1.0] = label

    mid = (lo + hi) / 2.0
    if kind == "sphere":
        r = float(params.get("r", min(hi - lo) / 4.0))
        fill(params.get("center", mid), (r, r, r), int(params.get("label", 1)))
    elif kind == "ellipsoid":
        radii = params.get("radii", tuple((hi - lo) / 4.0))
        fill(params.get("center", mid), radii, int(params.get("label", 1)))
    elif kind == "two-spheres":
        ext = hi - lo
        r1 = float(params.get("r1", min(ext) / 6.0))
        r2 = float(params.get("r2", min(ext) / 6.0))
        c1 = params.get("c1", mid - np.array([ext[0] / 4.0, 0, 0]))
        c2 = params.get("c2", mid + np.array([ext[0] / 4.0, 0, 0]))
        fill(c1, (r1, r1, r1), 1)
        fill(c2, (r2, r2, r2), 2)
    else:
        raise ImageFormatError(f"unknown phantom kind {kind!r}")
    # recompute provenance over the filled volume
    img.checksum = hashlib.sha256(img.tobytes()).hexdigest()
    return img


@dataclass(frozen=True)
class SizingPolicy:
    """Target edge scale for refinement: uniform h with per-label overrides.

    h must stay meaningful against the voxel grid: at least half the
    smallest spacing.
    """

    h: float
    per_label: dict[int, float] = field(default_factory=dict)

    def validate(self, img: LabeledImage) -> None:
        floor = 0.5 * min(img.spacing)
        for name, value in [("h", self.h)] + [
            (f"h[{k}]", v) for k, v in self.per_label.items()
        ]:
            if value <= 0:
                raise ImageFormatError(f"{name} must be positive, got {value}")
            if value < floor:
                raise ImageFormatError(
                    f"{name}={value} finer than half a voxel ({floor})"
                )

    def target(self, label: int) -> float:
        return self.per_label.get(label, self.h)


def parse_phantom_spec(spec: str) -> LabeledImage:
    """Build a phantom from a CLI spec like ``sphere:r=16,dims=64``."""
    kind, _, rest = spec.partition(":")
    params: dict = {}
    dims = 32
    spacing = 1.0
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if not val:
                raise ImageFormatError(f"bad phantom parameter {item!r}")
            if key == "dims":
                dims = int(val)
            elif key == "spacing":
                spacing = float(val)
            else:
                params[key] = float(val)
    return make_phantom(kind.strip(), dims, spacing, **params)
