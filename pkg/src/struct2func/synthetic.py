"""Synthetic PDB-format structures and mapping tables for tests and demos."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pdb_ingest import AMINO_ACIDS, ONE_TO_THREE, AtomRecord, format_atom_line

# backbone-ish offsets around each C-alpha
_SIDE_ATOMS = ("N", "C", "O", "CB")


@dataclass
class SyntheticSpec:
    pdb_id: str
    n_residues: int = 60
    seed: int = 0
    method: str = "X-RAY DIFFRACTION"
    resolution: float | None = 2.0
    n_site: int = 4
    chains: str = "A"
    stretch: tuple[float, float, float] = (1.6, 1.0, 0.7)
    alphabet: str = AMINO_ACIDS.replace("U", "")


def calpha_trace(n: int, seed: int, stretch=(1.6, 1.0, 0.7), step: float = 3.8) -> np.ndarray:
    """Compact random walk with a pull toward the origin, then stretched per axis."""
    rng = np.random.default_rng(seed)
    pts = np.zeros((n, 3))
    radius = 2.2 * n ** (1 / 3) * step / 2
    for i in range(1, n):
        for _ in range(50):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            cand = pts[i - 1] + step * d
            if np.linalg.norm(cand) < radius and (
                    i < 3 or np.min(np.linalg.norm(pts[:i - 1] - cand, axis=1)) > 3.0):
                break
        pts[i] = cand
    pts -= pts.mean(axis=0)
    return pts * np.asarray(stretch)


def structure_atoms(spec: SyntheticSpec) -> tuple[list[AtomRecord], list[tuple[str, str, int]]]:
    rng = np.random.default_rng(spec.seed + 7919)
    atoms, residues = [], []
    serial = 1
    for ci, chain in enumerate(spec.chains):
        trace = calpha_trace(spec.n_residues, spec.seed + 101 * ci, spec.stretch)
        trace += np.array([0.0, 0.0, 30.0 * ci])
        for k, ca in enumerate(trace):
            code = spec.alphabet[int(rng.integers(len(spec.alphabet)))]
            seq = k + 1
            residues.append((code, chain, seq))
            names = ("CA",) + _SIDE_ATOMS if code != "G" else ("CA", "N", "C", "O")
            for name in names:
                if name == "CA":
                    pos = ca
                else:
                    d = rng.normal(size=3)
                    pos = ca + 1.5 * d / np.linalg.norm(d)
                atoms.append(AtomRecord(serial, name, code, chain, seq,
                                        tuple(float(v) for v in np.round(pos, 3)),
                                        False, ONE_TO_THREE[code]))
                serial += 1
    return atoms, residues


def dbref_line(pdb_id: str, chain: str, start: int, end: int) -> str:
    cols = [" "] * 68
    for col, text in ((0, "DBREF "), (7, f"{pdb_id:<4}"), (12, chain), (14, f"{start:4d}"),
                      (20, f"{end:4d}"), (26, "UNP   "), (33, "P00000  "), (42, "SYN_HUMAN"),
                      (55, f"{start:5d}"), (62, f"{end:5d}")):
        cols[col:col + len(text)] = text
    return "".join(cols).rstrip()


def make_pdb_text(spec: SyntheticSpec) -> str:
    atoms, residues = structure_atoms(spec)
    rng = np.random.default_rng(spec.seed + 31)
    lines = [f"HEADER    SYNTHETIC PROTEIN                       01-JAN-00   {spec.pdb_id:<4}",
             f"EXPDTA    {spec.method}"]
    if spec.resolution is not None:
        lines.append(f"REMARK   2 RESOLUTION.    {spec.resolution:.2f} ANGSTROMS.")
    if spec.n_site:
        lines.append("REMARK 800 SITE_IDENTIFIER: AC1")
    for chain in spec.chains:
        lines.append(dbref_line(spec.pdb_id, chain, 1, spec.n_residues))
    if spec.n_site:
        picks = sorted(rng.choice(len(residues), size=min(spec.n_site, len(residues)), replace=False))
        chunk = [residues[i] for i in picks]
        for line_no, start in enumerate(range(0, len(chunk), 4), start=1):
            part = chunk[start:start + 4]
            body = "".join(f" {ONE_TO_THREE[c]} {ch}{seq:4d} " for c, ch, seq in part)
            lines.append(f"SITE   {line_no:3d} AC1 {len(chunk):2d}{body}")
    lines.extend(format_atom_line(a) for a in atoms)
    lines.append("END")
    return "\n".join(lines) + "\n"


def write_fixture(root, n_structures: int = 20, seed: int = 0, n_genes: int = 6,
                  non_xray: tuple[int, ...] = (), n_residues: int = 50) -> dict:
    """Write ``pdb/`` files and a ``mapping.tsv`` under root; return the paths.

    Genes cycle through the three classes; each structure maps to one gene
    with a span long enough to pass the length filter.
    """
    root = Path(root)
    (root / "pdb").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    classes = ("ONGO", "TSG", "Fusion")
    rows = ["gene_id\tgene_symbol\tclass\tpdb_id\tstart\tend"]
    for i in range(n_structures):
        pdb_id = f"{i % 9 + 1}S{chr(65 + i // 9 % 26)}{chr(65 + i % 26)}"
        spec = SyntheticSpec(pdb_id, n_residues=n_residues, seed=seed * 1000 + i,
                             method="SOLUTION NMR" if i in non_xray else "X-RAY DIFFRACTION")
        (root / "pdb" / f"{pdb_id}.pdb").write_text(make_pdb_text(spec))
        gene = i % n_genes
        start = int(rng.integers(1, 120))
        end = start + int(rng.integers(90, 200))
        rows.append(f"{1000 + gene}\tGENE{gene}\t{classes[gene % 3]}\t{pdb_id}\t{start}\t{end}")
    (root / "mapping.tsv").write_text("\n".join(rows) + "\n")
    return {"pdb_dir": root / "pdb", "mapping_file": root / "mapping.tsv"}
