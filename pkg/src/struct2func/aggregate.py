"""Gene-level probabilities from per-structure spans and class probabilities.

Spans are half-open: a segment covers [start, end) and has length end - start.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

log = logging.getLogger(__name__)

CLASS_NAMES = ("ONGO", "TSG", "Fusion")


class AggregateError(ValueError):
    pass


class EmptySegments(AggregateError):
    pass


class NoLabel(AggregateError):
    pass


class DegenerateSum(AggregateError):
    pass


class AggMethod(enum.Enum):
    DIRECT = "Direct"
    METHOD1 = "Method1"
    METHOD2 = "Method2"
    METHOD3 = "Method3"
    ENSEMBLE = "Ensemble"


@dataclass(frozen=True)
class SegmentProb:
    pdb_id: str
    start: int
    end: int
    probs: tuple[float, float, float]

    def __post_init__(self):
        if self.end <= self.start:
            raise AggregateError(f"{self.pdb_id}: end must exceed start")
        p = tuple(float(v) for v in self.probs)
        if len(p) != 3 or min(p) < 0 or abs(sum(p) - 1) > 1e-6:
            raise AggregateError(f"{self.pdb_id}: probs must be a 3-simplex vector, got {p}")
        object.__setattr__(self, "probs", p)

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class AnnotationConfig:
    m_p_d: float = 0.25
    high_band: float = 0.40
    low_band: float = 0.30
    tie_epsilon: float = 0.02

    def __post_init__(self):
        if not 0 < self.low_band < self.high_band < 1:
            raise ValueError("need 0 < low_band < high_band < 1")
        if not 0 < self.m_p_d < 0.5:
            raise ValueError("m_p_d must lie in (0, 0.5)")


@dataclass
class GenePrediction:
    gene_id: int
    method: AggMethod
    probs: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class PseudoSegment:
    start: int
    end: int
    members: tuple[str, ...]
    probs: tuple[float, float, float]

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class Method1Round:
    selected: str
    length: int
    fractions: dict[str, Fraction]


@dataclass
class CoverageResult:
    """DP outcome: ``cov[k]`` is the best value over the first k sorted pseudo-segments."""
    segments: list[PseudoSegment]
    cov: list[int]
    chosen: list[int]
    weights: list[Fraction]
    probs: np.ndarray = field(default_factory=lambda: np.zeros(3))
    backpointers: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.segments)

    @property
    def j(self) -> int:
        # backtrack steps taken from the best end segment
        return max(len(self.chosen) - 1, 0)


def _sort_key(s: SegmentProb):
    return (s.start, s.end, s.pdb_id, s.probs)


def _overlap(a0, a1, b0, b1) -> int:
    return max(0, min(a1, b1) - max(a0, b0))


def _normalized(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / v.sum()


def _weighted(weights, probs) -> np.ndarray:
    w = np.array([float(x) for x in weights])
    P = np.array(probs, dtype=float).reshape(-1, 3)
    return _normalized(w @ P)


def _require(segments):
    if not segments:
        raise EmptySegments("no segments to aggregate")


# --- Method 1 -------------------------------------------------------------------

def _subtract(pieces, cut):
    out = []
    for s, e in pieces:
        cur = [(s, e)]
        for c0, c1 in cut:
            nxt = []
            for a, b in cur:
                if c1 <= a or c0 >= b:
                    nxt.append((a, b))
                    continue
                if a < c0:
                    nxt.append((a, c0))
                if c1 < b:
                    nxt.append((c1, b))
            cur = nxt
        out.extend(cur)
    return out


def _pieces_overlap(a, b) -> int:
    return sum(_overlap(x0, x1, y0, y1) for x0, x1 in a for y0, y1 in b)


def method_1_rounds(segments) -> tuple[list[Method1Round], np.ndarray]:
    """Longest-remnant rounds; returns per-round fractions and the final vector.

    Each round selects the longest remaining piece set, credits every
    segment with (overlap with the selection) / selection length, and then
    cuts the selection out of all remnants.
    """
    _require(segments)
    segs = sorted(segments, key=_sort_key)
    remnants = [[(s.start, s.end)] for s in segs]
    rounds, w_total, p_total = [], Fraction(0), np.zeros(3)
    while True:
        lengths = [sum(b - a for a, b in r) for r in remnants]
        best = max(range(len(segs)), key=lambda i: (lengths[i], -i))
        L = lengths[best]
        if L == 0:
            break
        sel = list(remnants[best])
        fracs = {}
        for i, seg in enumerate(segs):
            ov = _pieces_overlap(remnants[i], sel)
            fracs[seg.pdb_id] = Fraction(ov, L)
            if ov:
                w_total += ov
                p_total += ov * np.asarray(seg.probs)
        rounds.append(Method1Round(segs[best].pdb_id, L, fracs))
        remnants = [_subtract(r, sel) for r in remnants]
    return rounds, _normalized(p_total / float(w_total))


def method_1(segments) -> np.ndarray:
    return method_1_rounds(segments)[1]


# --- Methods 2 and 3 ------------------------------------------------------------

def merge_identical(segments) -> list[PseudoSegment]:
    """Collapse segments sharing (start, end) into one, averaging their probabilities."""
    groups: dict[tuple[int, int], list[SegmentProb]] = defaultdict(list)
    for s in segments:
        groups[s.start, s.end].append(s)
    out = []
    for (start, end) in sorted(groups):
        members = sorted(groups[start, end], key=_sort_key)
        mean = np.mean([m.probs for m in members], axis=0)
        out.append(PseudoSegment(start, end, tuple(m.pdb_id for m in members), tuple(mean)))
    return out


def _dp(segs: list[PseudoSegment], overlapping: bool):
    n = len(segs)
    best = [0] * n
    pred: list[int | None] = [None] * n
    for i, si in enumerate(segs):
        top, arg = 0, None
        for h in range(i):
            sh = segs[h]
            if overlapping:
                if not (sh.start < si.start and sh.end < si.end):
                    continue
                cand = best[h] - _overlap(sh.start, sh.end, si.start, si.end)
            else:
                if sh.end > si.start:
                    continue
                cand = best[h]
            if arg is None or cand >= top:
                top, arg = cand, h
        best[i] = si.length + (top if arg is not None else 0)
        pred[i] = arg

    cov, end_at = [0], [None]
    for k in range(n):
        if best[k] >= cov[-1]:
            cov.append(best[k])
            end_at.append(k)
        else:
            cov.append(cov[-1])
            end_at.append(end_at[-1])

    chosen = []
    k = end_at[-1]
    while k is not None:
        chosen.append(k)
        k = pred[k]
    return cov, chosen[::-1], pred


def method_2_detail(segments) -> CoverageResult:
    """Best non-overlapping cover; chosen pieces weighted by their length."""
    _require(segments)
    segs = merge_identical(segments)
    cov, chosen, pred = _dp(segs, overlapping=False)
    weights = [Fraction(segs[i].length) for i in chosen]
    probs = _weighted(weights, [segs[i].probs for i in chosen])
    log.debug("method_2 cov trace %s", cov)
    return CoverageResult(segs, cov, chosen, weights, probs, pred)


def method_3_detail(segments) -> CoverageResult:
    """Best cover by a chain of partially overlapping pieces.

    The chain gains length(next) - overlap(previous, next) per step. Each
    chosen piece is weighted by its length minus half of every overlap it
    shares with a chain neighbour.
    """
    _require(segments)
    segs = merge_identical(segments)
    cov, chosen, pred = _dp(segs, overlapping=True)
    weights = []
    for j, i in enumerate(chosen):
        w = Fraction(segs[i].length)
        for nb in (chosen[j - 1] if j > 0 else None, chosen[j + 1] if j + 1 < len(chosen) else None):
            if nb is not None:
                w -= Fraction(_overlap(segs[i].start, segs[i].end, segs[nb].start, segs[nb].end), 2)
        weights.append(w)
    probs = _weighted(weights, [segs[i].probs for i in chosen])
    return CoverageResult(segs, cov, chosen, weights, probs, pred)


def method_2(segments) -> np.ndarray:
    return method_2_detail(segments).probs


def method_3(segments) -> np.ndarray:
    return method_3_detail(segments).probs


# --- combination and labels -----------------------------------------------------

def ensemble(segments, gene_id: int = 0) -> GenePrediction:
    _require(segments)
    if len(segments) == 1:
        return GenePrediction(gene_id, AggMethod.DIRECT, _normalized(segments[0].probs))
    mean = (method_1(segments) + method_2(segments) + method_3(segments)) / 3
    return GenePrediction(gene_id, AggMethod.ENSEMBLE, _normalized(mean))


def ensemble_model_probs(per_model) -> np.ndarray:
    arr = np.asarray(per_model, dtype=float).reshape(-1, 3)
    if len(arr) == 0:
        raise EmptySegments("no model outputs")
    return _normalized(arr.mean(axis=0))


def _join(mask) -> str:
    return "_".join(n for n, m in zip(CLASS_NAMES, mask) if m)


def annotate_class(probs, cfg: AnnotationConfig = AnnotationConfig()) -> str:
    p_ongo, p_tsg, p_fus = (float(v) for v in probs)
    t = cfg.m_p_d
    if abs(p_ongo + p_tsg + p_fus - 1) > 0.02 + 1e-12:
        raise NoLabel(f"probabilities {probs} do not sum to 1")
    if p_ongo >= t and p_tsg >= t and p_fus >= t:
        return "ONGO_TSG_Fusion"
    if p_ongo >= t and p_tsg >= t and p_fus < t:
        return "ONGO_TSG"
    if p_ongo >= t and p_tsg < t and p_fus >= t:
        return "ONGO_Fusion"
    if p_ongo < t and p_tsg >= t and p_fus >= t:
        return "TSG_Fusion"
    if p_ongo >= t * 2:
        return "ONGO"
    if p_tsg >= t * 2:
        return "TSG"
    if p_fus >= t * 2:
        return "Fusion"
    raise NoLabel(f"no annotation rule fires for {probs}")


def most_probable_class(probs, cfg: AnnotationConfig = AnnotationConfig()) -> str:
    p = np.asarray(probs, dtype=float)
    return _join(p >= p.max() - cfg.tie_epsilon)


def class_classified(probs, cfg: AnnotationConfig = AnnotationConfig()) -> str:
    p = np.asarray(probs, dtype=float)
    for band in (cfg.high_band, cfg.low_band):
        if (p > band).any():
            return _join(p > band)
    return most_probable_class(p, cfg)


def binary_renormalize(probs, keep=(0, 1)) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    i, j = keep
    (dropped,) = {0, 1, 2} - {i, j}
    if p[dropped] > max(p[i], p[j]):
        return np.array([0.5, 0.5])
    s = p[i] + p[j]
    if s <= 0:
        raise DegenerateSum("kept classes have zero probability")
    return np.array([p[i] / s, p[j] / s])


# --- gene tables -----------------------------------------------------------------

PROB_COLUMNS = ("pdb_id", "gene_id", "start", "end", "p_og", "p_tsg", "p_fusion")
PRED_COLUMNS = ("gene_id", "method", "p_og", "p_tsg", "p_fusion", "label")


def read_probabilities(text: str) -> dict[int, list[SegmentProb]]:
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in PROB_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise AggregateError(f"probability table missing columns {missing}")
    genes: dict[int, list[SegmentProb]] = defaultdict(list)
    for row in reader:
        genes[int(row["gene_id"])].append(SegmentProb(
            row["pdb_id"], int(row["start"]), int(row["end"]),
            tuple(float(row[k]) for k in ("p_og", "p_tsg", "p_fusion"))))
    return dict(genes)


def format_probabilities(rows) -> str:
    """rows: iterables of (pdb_id, gene_id, start, end, probs)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROB_COLUMNS)
    for pdb_id, gene_id, start, end, probs in rows:
        w.writerow([pdb_id, gene_id, start, end, *(f"{float(v):.9f}" for v in probs)])
    return buf.getvalue()


def aggregate_gene(gene_id: int, segments, cfg: AnnotationConfig = AnnotationConfig()
                   ) -> tuple[list[GenePrediction], dict]:
    """All method rows for one gene plus the DP traces."""
    traces = {}
    if len(segments) == 1:
        preds = [ensemble(segments, gene_id)]
    else:
        rounds, p1 = method_1_rounds(segments)
        d2, d3 = method_2_detail(segments), method_3_detail(segments)
        traces = {"method1_rounds": [(r.selected, r.length) for r in rounds],
                  "method2_cov": d2.cov, "method3_cov": d3.cov}
        preds = [
            GenePrediction(gene_id, AggMethod.METHOD1, p1),
            GenePrediction(gene_id, AggMethod.METHOD2, d2.probs),
            GenePrediction(gene_id, AggMethod.METHOD3, d3.probs),
            GenePrediction(gene_id, AggMethod.ENSEMBLE, _normalized((p1 + d2.probs + d3.probs) / 3)),
        ]
    for p in preds:
        p.label = annotate_class(p.probs, cfg)
    return preds, traces


def format_predictions(preds: list[GenePrediction]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PRED_COLUMNS)
    for p in preds:
        w.writerow([p.gene_id, p.method.value, *(f"{v:.6f}" for v in p.probs), p.label])
    return buf.getvalue()
