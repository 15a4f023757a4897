"""Atom and residue depths below a solvent-excluded surface, surface C-alpha selection."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .pdb_ingest import AMINO_ACIDS, StructureRecord


class SurfaceError(ValueError):
    pass


class MalformedVertexLine(SurfaceError):
    def __init__(self, line_no: int):
        super().__init__(f"malformed vertex line {line_no}")
        self.line_no = line_no


class EmptyMesh(SurfaceError):
    pass


class EmptyResidue(SurfaceError):
    pass


class NoSurfaceAtoms(SurfaceError):
    pass


class DivergentFactor(SurfaceError):
    pass


class DegenerateGeometry(SurfaceError):
    pass


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        if len(v) == 0:
            raise EmptyMesh("mesh has no vertices")
        if not np.all(np.isfinite(v)):
            raise SurfaceError("non-finite mesh vertex")
        object.__setattr__(self, "vertices", v)

    def tree(self) -> cKDTree:
        # cached on first use; the mesh itself is immutable
        t = self.__dict__.get("_tree")
        if t is None:
            t = cKDTree(self.vertices)
            object.__setattr__(self, "_tree", t)
        return t

    def to_vert(self, title: str = "surface") -> str:
        lines = [f"# {title} vertices", "#vertex #sphere density probe_r",
                 f"{len(self.vertices):7d}"]
        for x, y, z in self.vertices:
            lines.append(f"{x:9.3f} {y:9.3f} {z:9.3f} {0.0:7.3f} {0.0:7.3f} {0.0:7.3f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DepthThresholds:
    calpha_max: float = 7.2
    residue_max: float = 6.7

    def __post_init__(self):
        if self.calpha_max <= 0 or self.residue_max <= 0:
            raise ValueError("depth thresholds must be positive")


@dataclass(frozen=True)
class SurfacePoint:
    position: tuple[float, float, float]
    residue_code: str
    has_site: bool


def parse_surface_vertices(vert_text: str, header_lines: int = 3) -> SurfaceMesh:
    """Read a .vert file: header lines, then `x y z nx ny nz ...` per vertex."""
    verts = []
    for line_no, line in enumerate(vert_text.splitlines(), start=1):
        if line_no <= header_lines or not line.strip():
            continue
        fields = line.split()
        if len(fields) < 3:
            raise MalformedVertexLine(line_no)
        try:
            verts.append([float(f) for f in fields[:3]])
        except ValueError:
            raise MalformedVertexLine(line_no) from None
    if not verts:
        raise EmptyMesh("no vertex lines")
    return SurfaceMesh(np.array(verts))


def atom_depth(atom_position, mesh: SurfaceMesh) -> float:
    d, _ = mesh.tree().query(np.asarray(atom_position, dtype=float))
    return float(d)


def atom_depths(positions, mesh: SurfaceMesh) -> np.ndarray:
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    d, _ = mesh.tree().query(pts)
    return np.asarray(d, dtype=float)


def residue_depth(atom_positions, mesh: SurfaceMesh) -> float:
    pts = np.asarray(atom_positions, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyResidue("residue has no atoms")
    return float(atom_depths(pts, mesh).mean())


def select_surface_calphas(rec: StructureRecord, mesh: SurfaceMesh,
                           th: DepthThresholds = DepthThresholds()) -> list[SurfacePoint]:
    """Keep C-alphas whose own depth and whose residue's mean depth are both under threshold."""
    residues = rec.residues()
    if not any(a.name == "CA" for atoms in residues.values() for a in atoms):
        raise NoSurfaceAtoms(f"{rec.pdb_id}: no C-alpha atoms")

    selected = []
    for key, atoms in residues.items():
        depths = atom_depths([a.position for a in atoms], mesh)
        res_depth = float(depths.mean())
        if not res_depth < th.residue_max:
            continue
        for a, d in zip(atoms, depths):
            if a.name == "CA" and d < th.calpha_max and a.residue_code in AMINO_ACIDS:
                selected.append(SurfacePoint(
                    position=a.position,
                    residue_code=a.residue_code,
                    has_site=(a.chain_id, a.residue_seq) in rec.site_residues,
                ))
    if not selected:
        raise NoSurfaceAtoms(f"{rec.pdb_id}: no surface C-alpha under thresholds")
    return selected


def threshold_factor(missed_site_pct: float, surface_calpha_pct: float) -> float:
    if surface_calpha_pct <= 0:
        raise ValueError("surface_calpha_pct must be positive")
    gap = 10.0 - missed_site_pct
    if gap == 0:
        raise DivergentFactor("missed SITE percentage is exactly 10")
    return abs(1.0 / (gap * surface_calpha_pct))


def factor_table(missed: dict, surface: dict) -> tuple[list[float], list[float], np.ndarray]:
    """Factor grid over (C-alpha threshold, residue threshold) pairs present in both inputs."""
    keys = sorted(set(missed) & set(surface))
    ca = sorted({k[0] for k in keys}, reverse=True)
    res = sorted({k[1] for k in keys}, reverse=True)
    grid = np.full((len(ca), len(res)), np.nan)
    for i, c in enumerate(ca):
        for j, r in enumerate(res):
            if (c, r) in missed and (c, r) in surface:
                grid[i, j] = threshold_factor(missed[c, r], surface[c, r])
    return ca, res, grid


def factor_table_csv(missed: dict, surface: dict) -> str:
    ca, res, grid = factor_table(missed, surface)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["calpha_threshold"] + [f"{r:g}" for r in res])
    for c, row in zip(ca, grid):
        w.writerow([f"{c:g}"] + ["" if np.isnan(v) else f"{v:.6f}" for v in row])
    return buf.getvalue()


def approximate_mesh(atoms, probe_radius: float = 1.4, atom_radius: float = 1.8,
                     pitch: float = 1.0) -> SurfaceMesh:
    """Crude solvent-excluded surface stand-in for when no external .vert file exists.

    Voxels whose centres are farther than ``atom_radius + probe_radius`` from
    every atom and connected to the grid border form the solvent; the solvent
    voxels touching the molecule are pulled ``probe_radius`` toward their
    nearest atom. Every vertex ends up at least ``atom_radius`` from all
    atom centres.
    """
    xyz = np.asarray(atoms, dtype=float).reshape(-1, 3)
    if len(xyz) < 4:
        raise DegenerateGeometry("need at least 4 atoms")
    if np.linalg.matrix_rank(xyz - xyz.mean(axis=0), tol=1e-6) < 2:
        raise DegenerateGeometry("atoms are collinear")

    reach = atom_radius + probe_radius
    lo = np.floor((xyz.min(axis=0) - reach - 2 * pitch) / pitch) * pitch
    hi = xyz.max(axis=0) + reach + 2 * pitch
    shape = tuple(int(s) for s in np.ceil((hi - lo) / pitch) + 1)
    axes = [lo[i] + pitch * np.arange(shape[i]) for i in range(3)]
    centres = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)

    tree = cKDTree(xyz)
    dist, nearest = tree.query(centres)
    inside = (dist < reach).reshape(shape)

    labels, _ = ndimage.label(~inside)
    border = set(np.unique(np.concatenate([
        labels[0].ravel(), labels[-1].ravel(), labels[:, 0].ravel(),
        labels[:, -1].ravel(), labels[:, :, 0].ravel(), labels[:, :, -1].ravel()])))
    border.discard(0)
    exterior = np.isin(labels, sorted(border))
    shell = (exterior & ndimage.binary_dilation(inside)).ravel()

    pts = centres[shell]
    owner = xyz[nearest[shell]]
    direction = owner - pts
    norm = np.linalg.norm(direction, axis=1, keepdims=True)
    pts = pts + probe_radius * direction / norm
    return SurfaceMesh(np.round(pts, 6))
