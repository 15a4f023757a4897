"""Property vectors, planar rasterization and the 24-projection feature tensor."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .pdb_ingest import AMINO_ACIDS, StructureRecord
from .properties import PROPERTY_TABLE, TABLE_VERSION
from .surface_depth import DepthThresholds, SurfaceMesh, select_surface_calphas

GRID = 128
N_CHANNELS = 21
SITE_CHANNEL = 20
N_PROJECTIONS = 24
TENSOR_SHAPE = (N_PROJECTIONS, GRID, GRID, N_CHANNELS)

TENSOR_MAGIC = b"S2FT"
TENSOR_VERSION = 1


class FeaturizeError(ValueError):
    pass


class UnknownAminoAcid(FeaturizeError):
    pass


class OutOfBounds(FeaturizeError):
    pass


class Oversize(FeaturizeError):
    def __init__(self, octant: int, check: geo.ExtentCheck):
        super().__init__(f"octant {octant}: {check}")
        self.octant = octant
        self.axis = check.axis
        self.extent = check.extent


class TensorFormatError(ValueError):
    pass


class BadMagic(TensorFormatError):
    pass


class DimMismatch(TensorFormatError):
    pass


@dataclass
class FeatureTensor:
    data: np.ndarray
    pdb_id: str = ""
    provenance: dict = field(default_factory=dict)


def property_vector(code: str, has_site: bool = False) -> np.ndarray:
    row = PROPERTY_TABLE.get(code)
    if row is None:
        raise UnknownAminoAcid(f"no property row for {code!r}")
    return np.append(row, 1.0 if has_site else 0.0)


def rasterize(coords, payload, vectors, size: int = GRID) -> np.ndarray:
    """Bin planar points (working-frame coordinates) into a size x size x C grid.

    Pixel (i, j) = (floor(u), floor(v)); colliding points combine by
    per-channel max.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    vectors = np.asarray(vectors, dtype=np.float32)
    grid = np.zeros((size, size, vectors.shape[-1]), dtype=np.float32)
    if len(coords) == 0:
        return grid
    pix = np.floor(coords).astype(np.int64)
    bad = (pix < 0) | (pix >= size)
    if bad.any():
        k = int(np.argmax(bad.any(axis=1)))
        raise OutOfBounds(f"point {coords[k].tolist()} maps outside the {size}x{size} grid")
    np.maximum.at(grid, (pix[:, 0], pix[:, 1]), vectors[np.asarray(payload)])
    return grid


def featurize_points(points, codes, sites, resolution: float,
                     factor: float = geo.DEFAULT_RESOLUTION_FACTOR,
                     clearance: float = geo.DEFAULT_CLEARANCE,
                     size: int = GRID) -> tuple[np.ndarray, dict]:
    """Surface C-alpha coordinates (Angstrom) with residue codes/SITE flags -> (tensor, provenance)."""
    vectors = np.stack([property_vector(c, s) for c, s in zip(codes, sites)]).astype(np.float32)
    scaled = geo.normalize_resolution(points, resolution, factor)
    tilt = geo.principal_tilt(geo.PointCloud(scaled))
    quadrants = geo.split_quadrants(tilt.rotated, clearance)

    checks = [geo.check_extent(q, size) for q in quadrants]
    provenance = {
        "property_table_version": TABLE_VERSION,
        "n_points": int(len(scaled)),
        "resolution": float(resolution),
        "resolution_factor": float(factor),
        "centered": True,
        "centroid": tilt.centroid.tolist(),
        "eigenvalues": tilt.eigenvalues.tolist(),
        "sign_flips": tilt.sign_flips,
        "warnings": tilt.warnings,
        "clearance": float(clearance),
        "octant_counts": [len(q) for q in quadrants],
        "extent_check": [str(c) for c in checks],
    }
    for q, c in zip(quadrants, checks):
        if not c.ok:
            raise Oversize(q.octant_id, c)

    tensor = np.zeros((8 * len(geo.PLANES), size, size, vectors.shape[1]), dtype=np.float32)
    for q in quadrants:
        for p, planar in enumerate(geo.project(q)):
            tensor[3 * q.octant_id + p] = rasterize(planar.coords, planar.payload, vectors, size)
    return tensor, provenance


def featurize_structure(rec: StructureRecord, mesh: SurfaceMesh,
                        thresholds: DepthThresholds = DepthThresholds(),
                        factor: float = geo.DEFAULT_RESOLUTION_FACTOR,
                        clearance: float = geo.DEFAULT_CLEARANCE) -> FeatureTensor:
    surface = select_surface_calphas(rec, mesh, thresholds)
    for sp in surface:
        if sp.residue_code not in AMINO_ACIDS:
            raise UnknownAminoAcid(sp.residue_code)
    data, prov = featurize_points(
        [sp.position for sp in surface],
        [sp.residue_code for sp in surface],
        [sp.has_site for sp in surface],
        rec.resolution, factor, clearance)
    prov["pdb_id"] = rec.pdb_id
    prov["n_surface_calpha"] = len(surface)
    prov["n_site_calpha"] = sum(sp.has_site for sp in surface)
    return FeatureTensor(data, rec.pdb_id, prov)


# --- tensor files -------------------------------------------------------------

_HEADER = struct.Struct("<4sH4I")


def write_tensor(t: FeatureTensor, path) -> None:
    data = np.ascontiguousarray(t.data, dtype="<f4")
    if data.ndim != 4:
        raise DimMismatch(f"expected a 4-d tensor, got shape {data.shape}")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, *data.shape))
        fh.write(data.tobytes())
    tmp.replace(path)


def read_tensor(path, expected_shape=TENSOR_SHAPE) -> FeatureTensor:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 4 or raw[:4] != TENSOR_MAGIC:
        raise BadMagic(f"{path}: not a feature tensor file")
    if len(raw) < _HEADER.size:
        raise DimMismatch(f"{path}: truncated header")
    _, version, *dims = _HEADER.unpack_from(raw)
    if version != TENSOR_VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}")
    if expected_shape is not None and tuple(dims) != tuple(expected_shape):
        raise DimMismatch(f"{path}: dims {dims} != {expected_shape}")
    n = int(np.prod(dims))
    if len(raw) - _HEADER.size != 4 * n:
        raise DimMismatch(f"{path}: payload holds {len(raw) - _HEADER.size} bytes, need {4 * n}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(dims).astype(np.float32)
    prov = {}
    side = path.with_suffix(".json")
    if side.exists():
        prov = json.loads(side.read_text())
    return FeatureTensor(data, path.stem, prov)
