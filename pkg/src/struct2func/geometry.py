"""Resolution scaling, principal-axis tilt and octant canonicalization of surface clouds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PLANES = ("xy", "yz", "xz")
_PLANE_AXES = {"xy": (0, 1), "yz": (1, 2), "xz": (0, 2)}
DEFAULT_RESOLUTION_FACTOR = 2.25
DEFAULT_CLEARANCE = 5.0


class GeometryError(ValueError):
    pass


class NonPositiveResolution(GeometryError):
    pass


class DegenerateCloud(GeometryError):
    pass


@dataclass
class PointCloud:
    points: np.ndarray
    payload: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.payload is None:
            self.payload = np.arange(len(self.points))
        self.payload = np.asarray(self.payload, dtype=np.int64)
        if len(self.payload) != len(self.points):
            raise GeometryError("payload length differs from point count")


@dataclass
class TiltResult:
    rotated: PointCloud
    eigenvalues: np.ndarray
    basis: np.ndarray
    centroid: np.ndarray
    sign_flips: list[bool]
    warnings: list[str] = field(default_factory=list)


@dataclass
class QuadrantCloud:
    """Points of one sign octant, reflected into the first octant.

    ``points`` are the reflected coordinates (all >= 0); the working frame
    puts its origin at ``-clearance`` on every axis, so ``shifted()`` gives
    coordinates in that frame.
    """
    octant_id: int
    points: np.ndarray
    payload: np.ndarray
    clearance: float = DEFAULT_CLEARANCE

    @property
    def signs(self) -> np.ndarray:
        return np.array([-1.0 if self.octant_id >> k & 1 else 1.0 for k in range(3)])

    def shifted(self) -> np.ndarray:
        return self.points + self.clearance

    def __len__(self):
        return len(self.points)


@dataclass
class PlanarSet:
    plane: str
    coords: np.ndarray
    payload: np.ndarray


@dataclass(frozen=True)
class ExtentCheck:
    ok: bool
    axis: str | None = None
    extent: int = 0

    def __str__(self):
        return "Ok" if self.ok else f"Oversize({self.axis}, {self.extent})"


def normalize_resolution(points, resolution: float,
                         factor: float = DEFAULT_RESOLUTION_FACTOR) -> np.ndarray:
    if not resolution > 0:
        raise NonPositiveResolution(f"resolution must be positive, got {resolution}")
    return np.asarray(points, dtype=float) / resolution * factor


def _orient(column: np.ndarray, projections: np.ndarray) -> bool:
    """True if the eigenvector should be negated under the skewness convention."""
    cubes = projections ** 3
    s = cubes.sum()
    if abs(s) > 1e-9 * np.abs(cubes).sum():
        return s < 0
    k = int(np.argmax(np.abs(column)))
    return column[k] < 0


def principal_tilt(cloud: PointCloud, degeneracy_tol: float = 1e-6) -> TiltResult:
    centroid = cloud.points.mean(axis=0)
    X = cloud.points - centroid
    evals, evecs = np.linalg.eigh(X.T @ X)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    V = evecs[:, order]
    if len(X) < 3 or evals[0] <= 0 or evals[1] <= 1e-12 * evals[0]:
        raise DegenerateCloud("cloud has rank < 2")

    flips = []
    for k in range(3):
        flip = _orient(V[:, k], X @ V[:, k])
        if flip:
            V[:, k] = -V[:, k]
        flips.append(bool(flip))

    warnings = []
    for k in range(2):
        if evals[k] > 0 and (evals[k] - evals[k + 1]) / evals[k] < degeneracy_tol:
            warnings.append(f"near-degenerate eigenvalues {k},{k + 1}")

    return TiltResult(
        rotated=PointCloud(X @ V, cloud.payload.copy()),
        eigenvalues=evals,
        basis=V,
        centroid=centroid,
        sign_flips=flips,
        warnings=warnings,
    )


def octant_ids(points: np.ndarray) -> np.ndarray:
    neg = np.asarray(points) < 0
    return neg[:, 0] * 1 + neg[:, 1] * 2 + neg[:, 2] * 4


def split_quadrants(tilted: PointCloud, clearance: float = DEFAULT_CLEARANCE) -> list[QuadrantCloud]:
    """Partition by sign octant and reflect each octant into the first one.

    A zero coordinate counts as nonnegative.
    """
    ids = octant_ids(tilted.points)
    out = []
    for oid in range(8):
        mask = ids == oid
        out.append(QuadrantCloud(
            octant_id=oid,
            points=np.abs(tilted.points[mask]),
            payload=tilted.payload[mask],
            clearance=clearance,
        ))
    return out


def merge_quadrants(quadrants: list[QuadrantCloud]) -> PointCloud:
    """Inverse of split_quadrants, ordered by payload."""
    pts = np.concatenate([q.points * q.signs for q in quadrants]).reshape(-1, 3)
    payload = np.concatenate([q.payload for q in quadrants]).astype(np.int64)
    order = np.argsort(payload, kind="stable")
    return PointCloud(pts[order], payload[order])


def project(q: QuadrantCloud) -> list[PlanarSet]:
    shifted = q.shifted()
    return [PlanarSet(p, shifted[:, list(_PLANE_AXES[p])], q.payload) for p in PLANES]


def check_extent(q: QuadrantCloud, max_extent: int = 128) -> ExtentCheck:
    if len(q) == 0:
        return ExtentCheck(True)
    pixels = np.floor(q.shifted()).astype(np.int64)
    top = pixels.max(axis=0)
    worst = int(np.argmax(top))
    if top[worst] >= max_extent:
        return ExtentCheck(False, "xyz"[worst], int(top[worst]) + 1)
    return ExtentCheck(True)
