"""PDB text parsing, structure filtering and gene-to-structure table cleaning."""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTUVWY"
UNKNOWN = "X"

THREE_TO_ONE = {
    "ALA": "A", "CYS": "C", "ASP": "D", "GLU": "E", "PHE": "F",
    "GLY": "G", "HIS": "H", "ILE": "I", "LYS": "K", "LEU": "L",
    "MET": "M", "ASN": "N", "PRO": "P", "GLN": "Q", "ARG": "R",
    "SER": "S", "THR": "T", "SEC": "U", "VAL": "V", "TRP": "W",
    "TYR": "Y",
}
ONE_TO_THREE = {v: k for k, v in THREE_TO_ONE.items()}

DEFAULT_BANNED_GENES = frozenset({5290, 5295})


class IngestError(ValueError):
    pass


class MalformedLine(IngestError):
    def __init__(self, line_no: int, line: str = ""):
        super().__init__(f"malformed record at line {line_no}: {line.rstrip()!r}")
        self.line_no = line_no


class MissingMethod(IngestError):
    pass


class EmptyInput(IngestError):
    pass


class InsufficientBins(IngestError):
    pass


class Method(enum.Enum):
    XRAY = "XRay"
    NMR = "NMR"
    EM = "EM"
    OTHER = "Other"


class GeneClass(enum.Enum):
    OG = "OG"
    TSG = "TSG"
    FUSION = "Fusion"

    @classmethod
    def parse(cls, text: str) -> "GeneClass":
        key = text.strip().upper()
        aliases = {"OG": cls.OG, "ONGO": cls.OG, "ONCO": cls.OG, "ONCOGENE": cls.OG,
                   "TSG": cls.TSG, "FUSION": cls.FUSION}
        if key not in aliases:
            raise IngestError(f"unknown class label {text!r}")
        return aliases[key]


CLASS_ORDER = (GeneClass.OG, GeneClass.TSG, GeneClass.FUSION)


@dataclass(frozen=True)
class AtomRecord:
    serial: int
    name: str
    residue_code: str
    chain_id: str
    residue_seq: int
    position: tuple[float, float, float]
    is_hetatm: bool = False
    residue_name: str = ""
    insertion_code: str = ""

    @property
    def residue_key(self) -> tuple[str, int, str]:
        return (self.chain_id, self.residue_seq, self.insertion_code)


@dataclass
class StructureRecord:
    pdb_id: str
    method: Method
    resolution: float | None
    atoms: list[AtomRecord]
    site_residues: set[tuple[str, int]] = field(default_factory=set)
    chain_spans: list[tuple[str, int, int]] = field(default_factory=list)
    site_ids: list[str] = field(default_factory=list)

    def protein_atoms(self) -> list[AtomRecord]:
        return [a for a in self.atoms if not a.is_hetatm]

    def residues(self) -> dict[tuple[str, int, str], list[AtomRecord]]:
        """Non-HETATM atoms grouped by residue, in file order."""
        groups: dict[tuple[str, int, str], list[AtomRecord]] = {}
        for atom in self.atoms:
            if not atom.is_hetatm:
                groups.setdefault(atom.residue_key, []).append(atom)
        return groups

    def has_unknown_residues(self) -> bool:
        return any(a.residue_code == UNKNOWN for a in self.atoms if not a.is_hetatm)

    def coordinates(self, include_hetatm: bool = True) -> np.ndarray:
        atoms = self.atoms if include_hetatm else self.protein_atoms()
        return np.array([a.position for a in atoms], dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class MappingEntry:
    gene_id: int
    gene_symbol: str
    class_label: GeneClass
    pdb_id: str
    start: int
    end: int

    def __post_init__(self):
        if self.end <= self.start:
            raise IngestError(
                f"{self.pdb_id}/{self.gene_id}: end {self.end} must exceed start {self.start}")

    @property
    def overlap_length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class FilterConfig:
    min_overlap_length: int = 81
    require_xray: bool = True
    require_site: bool = True
    require_uniform_chains: bool = True

    def __post_init__(self):
        if self.min_overlap_length < 1:
            raise ValueError("min_overlap_length must be >= 1")


@dataclass(frozen=True)
class FilterDecision:
    accepted: bool
    reason: str | None = None

    def __str__(self):
        return "Accepted" if self.accepted else f"Rejected({self.reason})"


ACCEPT = FilterDecision(True)


def Reject(reason: str) -> FilterDecision:
    return FilterDecision(False, reason)


# --- parsing ---------------------------------------------------------------

_RESOLUTION_RE = re.compile(r"RESOLUTION\.\s+([0-9]*\.?[0-9]+)\s+ANGSTROM")


def _method_from_expdta(text: str) -> Method:
    t = text.upper()
    if "X-RAY" in t:
        return Method.XRAY
    if "NMR" in t:
        return Method.NMR
    if "ELECTRON MICROSCOPY" in t or "CRYO" in t:
        return Method.EM
    return Method.OTHER


def _int_field(line: str, lo: int, hi: int, line_no: int) -> int:
    try:
        return int(line[lo:hi])
    except ValueError:
        raise MalformedLine(line_no, line) from None


def parse_atom_line(line: str, line_no: int = 0) -> AtomRecord:
    """Read one ATOM/HETATM line using the fixed PDB columns."""
    try:
        x = float(line[30:38])
        y = float(line[38:46])
        z = float(line[46:54])
    except ValueError:
        raise MalformedLine(line_no, line) from None
    if not all(math.isfinite(v) for v in (x, y, z)):
        raise MalformedLine(line_no, line)
    resname = line[17:20].strip()
    return AtomRecord(
        serial=_int_field(line, 6, 11, line_no),
        name=line[12:16].strip(),
        residue_code=THREE_TO_ONE.get(resname, UNKNOWN),
        chain_id=line[21:22].strip() or " ",
        residue_seq=_int_field(line, 22, 26, line_no),
        position=(x, y, z),
        is_hetatm=line.startswith("HETATM"),
        residue_name=resname,
        insertion_code=line[26:27].strip(),
    )


def format_atom_line(atom: AtomRecord) -> str:
    """Serialize an atom back to a fixed-column ATOM/HETATM line."""
    record = "HETATM" if atom.is_hetatm else "ATOM  "
    resname = atom.residue_name or ONE_TO_THREE.get(atom.residue_code, "UNK")
    name = atom.name if len(atom.name) >= 4 else f" {atom.name:<3}"
    x, y, z = atom.position
    return (f"{record}{atom.serial:5d} {name:<4} {resname:>3} {atom.chain_id:1}"
            f"{atom.residue_seq:4d}{atom.insertion_code:1}   "
            f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}")


def _site_residues(line: str) -> list[tuple[str, int]]:
    out = []
    for col in (18, 29, 40, 51):
        resname = line[col:col + 3].strip()
        if not resname:
            continue
        chain = line[col + 4:col + 5].strip() or " "
        seq = line[col + 5:col + 9].strip()
        if seq:
            out.append((chain, int(seq)))
    return out


def parse_pdb(text: str, pdb_id: str | None = None) -> StructureRecord:
    if not text or not text.strip():
        raise EmptyInput("empty PDB text")

    header_id = None
    method = None
    resolution = None
    atoms: list[AtomRecord] = []
    site_refs: list[tuple[str, int]] = []
    site_ids: list[str] = []
    dbref_spans: dict[str, tuple[int, int]] = {}
    in_first_model = True

    for line_no, line in enumerate(text.splitlines(), start=1):
        rec = line[:6]
        if rec == "HEADER":
            header_id = line[62:66].strip() or None
        elif rec == "EXPDTA":
            method = _method_from_expdta(line[10:])
        elif rec == "REMARK" and line[6:10].strip() == "2":
            m = _RESOLUTION_RE.search(line)
            if m:
                resolution = float(m.group(1))
        elif rec == "REMARK" and line[6:10].strip() == "800":
            m = re.search(r"SITE_IDENTIFIER:\s*(\S+)", line)
            if m:
                site_ids.append(m.group(1))
        elif rec == "SITE  ":
            try:
                site_refs.extend(_site_residues(line))
            except ValueError:
                raise MalformedLine(line_no, line) from None
        elif rec == "DBREF ":
            chain = line[12:13].strip() or " "
            dbref_spans.setdefault(
                chain, (_int_field(line, 55, 60, line_no), _int_field(line, 62, 67, line_no)))
        elif rec == "DBREF2":
            chain = line[12:13].strip() or " "
            dbref_spans.setdefault(
                chain, (_int_field(line, 45, 55, line_no), _int_field(line, 57, 67, line_no)))
        elif rec == "ENDMDL":
            in_first_model = False
        elif rec in ("ATOM  ", "HETATM") and in_first_model:
            altloc = line[16:17].strip()
            if altloc not in ("", "A", "1"):
                continue
            atoms.append(parse_atom_line(line, line_no))

    if method is None:
        raise MissingMethod("no EXPDTA record")

    present = {(a.chain_id, a.residue_seq) for a in atoms}
    site_residues = {r for r in site_refs if r in present}

    chains: list[str] = []
    seq_range: dict[str, list[int]] = {}
    for a in atoms:
        if a.is_hetatm:
            continue
        if a.chain_id not in seq_range:
            chains.append(a.chain_id)
            seq_range[a.chain_id] = [a.residue_seq, a.residue_seq]
        else:
            lo_hi = seq_range[a.chain_id]
            lo_hi[0] = min(lo_hi[0], a.residue_seq)
            lo_hi[1] = max(lo_hi[1], a.residue_seq)
    spans = []
    for c in chains:
        start, end = dbref_spans.get(c, tuple(seq_range[c]))
        spans.append((c, start, end))

    return StructureRecord(
        pdb_id=(pdb_id or header_id or "").upper(),
        method=method,
        resolution=resolution,
        atoms=atoms,
        site_residues=site_residues,
        chain_spans=spans,
        site_ids=site_ids,
    )


# --- filtering --------------------------------------------------------------

def filter_record(rec: StructureRecord, entry: MappingEntry,
                  cfg: FilterConfig = FilterConfig()) -> FilterDecision:
    if cfg.require_xray and rec.method is not Method.XRAY:
        return Reject("NotXRay")
    if entry.overlap_length <= cfg.min_overlap_length:
        return Reject("TooShort")
    if rec.has_unknown_residues():
        return Reject("UnknownAminoAcid")
    if rec.resolution is None or rec.resolution <= 0:
        return Reject("MissingResolution")
    if cfg.require_site and not rec.site_residues:
        return Reject("NoSite")
    if cfg.require_uniform_chains:
        if len({(s, e) for _, s, e in rec.chain_spans}) > 1:
            return Reject("NonUniformChains")
    return ACCEPT


# --- mapping table ------------------------------------------------------------

MAPPING_COLUMNS = ("gene_id", "gene_symbol", "class", "pdb_id", "start", "end")


def parse_mapping_table(text: str) -> list[MappingEntry]:
    reader = csv.DictReader(io.StringIO(text), delimiter="\t")
    missing = [c for c in MAPPING_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise IngestError(f"mapping table missing columns: {missing}")
    entries = []
    for row in reader:
        entries.append(MappingEntry(
            gene_id=int(row["gene_id"]),
            gene_symbol=row["gene_symbol"].strip(),
            class_label=GeneClass.parse(row["class"]),
            pdb_id=row["pdb_id"].strip().upper(),
            start=int(row["start"]),
            end=int(row["end"]),
        ))
    return entries


def format_mapping_table(entries: list[MappingEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(MAPPING_COLUMNS)
    for e in entries:
        w.writerow([e.gene_id, e.gene_symbol, e.class_label.value, e.pdb_id, e.start, e.end])
    return buf.getvalue()


@dataclass
class CleanedTable:
    entries: list[MappingEntry]
    removed_banned: list[MappingEntry]
    removed_cross_class: list[MappingEntry]
    cross_class_pdb_ids: set[str]

    def class_counts(self) -> dict[str, int]:
        counts = {c.value: 0 for c in CLASS_ORDER}
        for pdb_id, label in {(e.pdb_id, e.class_label) for e in self.entries}:
            counts[label.value] += 1
        return counts


def clean_class_overlaps(entries: list[MappingEntry],
                         banned_genes=DEFAULT_BANNED_GENES) -> CleanedTable:
    banned = set(banned_genes)
    kept = [e for e in entries if e.gene_id not in banned]
    removed_banned = [e for e in entries if e.gene_id in banned]

    classes_of: dict[str, set[GeneClass]] = defaultdict(set)
    for e in kept:
        classes_of[e.pdb_id].add(e.class_label)
    cross = {pid for pid, cls in classes_of.items() if len(cls) > 1}

    return CleanedTable(
        entries=[e for e in kept if e.pdb_id not in cross],
        removed_banned=removed_banned,
        removed_cross_class=[e for e in kept if e.pdb_id in cross],
        cross_class_pdb_ids=cross,
    )


# --- statistics -------------------------------------------------------------

@dataclass
class HistogramReport:
    bins: list[str]
    frequency: list[int]
    cumulative: list[int]
    cumulative_pct: list[float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin", "frequency", "cumulative", "cumulative_pct"])
        for row in zip(self.bins, self.frequency, self.cumulative, self.cumulative_pct):
            w.writerow([row[0], row[1], row[2], f"{row[3]:.2f}"])
        return buf.getvalue()


def length_histogram(entries, bin_edges) -> HistogramReport:
    """Count overlap lengths per bin; a bin holds lengths in (previous edge, edge].

    The cumulative count at edge e is then the number of entries with length
    <= e, i.e. what a length filter of "> e" removes. Lengths above the last
    edge land in a trailing "More" bin so the cumulative column ends at the total.
    """
    lengths = [e.overlap_length if isinstance(e, MappingEntry) else int(e) for e in entries]
    if not lengths:
        raise EmptyInput("no entries to histogram")
    edges = list(bin_edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly ascending")

    idx = np.searchsorted(np.asarray(edges), np.asarray(lengths), side="left")
    counts = np.bincount(idx, minlength=len(edges) + 1).tolist()
    cum = np.cumsum(counts).tolist()
    total = len(lengths)
    labels = [str(e) for e in edges] + ["More"]
    pct = [100.0 * c / total for c in cum]
    return HistogramReport(labels, counts, cum, pct)


def resolution_factor(resolution_bin_counts: dict[float, int], top_k: int = 4) -> float:
    """Mean label of a contiguous window of `top_k` resolution bins around the peak.

    The window is seeded with the adjacent bin pair of largest combined
    frequency and then padded evenly on both sides; an odd leftover goes to
    the side whose next bin is more frequent.
    """
    labels = sorted(resolution_bin_counts)
    if top_k < 1 or len(labels) < top_k:
        raise InsufficientBins(f"need {top_k} bins, have {len(labels)}")
    freq = [resolution_bin_counts[b] for b in labels]
    n = len(labels)

    if top_k == 1:
        best = max(range(n), key=lambda i: (freq[i], -i))
        return float(labels[best])

    lo = max(range(n - 1), key=lambda i: (freq[i] + freq[i + 1], -i))
    hi = lo + 1
    while hi - lo + 1 < top_k:
        remaining = top_k - (hi - lo + 1)
        can_left, can_right = lo > 0, hi < n - 1
        if remaining >= 2 and can_left and can_right:
            lo, hi = lo - 1, hi + 1
        elif can_left and (not can_right or freq[lo - 1] > freq[hi + 1]):
            lo -= 1
        else:
            hi += 1
    return float(np.mean(labels[lo:hi + 1]))
