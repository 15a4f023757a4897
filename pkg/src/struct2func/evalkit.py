"""Confusion matrices, ROC/AUROC, accuracy and the two split strategies."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

CLASSES = ("OG", "TSG", "Fusion")

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class EvalError(ValueError):
    pass


class LengthMismatch(EvalError):
    pass


class UnknownLabel(EvalError):
    pass


class SingleClass(EvalError):
    pass


class TooFewItems(EvalError):
    pass


class InfeasibleFraction(EvalError):
    pass


@dataclass
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # rows = given, columns = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["given\\predicted", *self.classes])
        for c, row in zip(self.classes, self.counts):
            w.writerow([c, *(int(v) for v in row)])
        return buf.getvalue()


def confusion(given, predicted, classes=CLASSES) -> ConfusionMatrix:
    given, predicted = list(given), list(predicted)
    if len(given) != len(predicted):
        raise LengthMismatch(f"{len(given)} given vs {len(predicted)} predicted labels")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(given, predicted):
        if g not in index or p not in index:
            raise UnknownLabel(f"label outside {classes}: {g!r} / {p!r}")
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(tuple(classes), counts)


def accuracy_from_counts(correct, total: int) -> float:
    return float(np.sum(correct)) / total


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in zip(self.fpr, self.tpr):
            w.writerow([f"{f:.6f}", f"{t:.6f}"])
        return buf.getvalue()


def roc_curve(scores, labels) -> RocCurve:
    """ROC over every distinct threshold plus the +inf sentinel.

    Trapezoids across a block of tied scores count those pairs as one half,
    which makes the area equal to the midrank statistic.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if len(s) != len(y):
        raise LengthMismatch("scores and labels differ in length")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both positive and negative items")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    auc = float(_trapezoid(tpr, fpr))
    return RocCurve(fpr, tpr, np.r_[np.inf, s[last]], auc)


def roc_auc(scores, labels) -> float:
    return roc_curve(scores, labels).auc


def rank_auc(scores, labels) -> float:
    """Mann-Whitney form: P(positive outranks negative), ties counted one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUROC needs both classes")
    r = rankdata(s)
    return float((r[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


@dataclass
class MulticlassAuc:
    per_class: dict[str, float]
    micro: float
    macro: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scope", "auroc"])
        for k, v in self.per_class.items():
            w.writerow([k, f"{v:.6f}"])
        w.writerow(["micro", f"{self.micro:.6f}"])
        w.writerow(["macro", f"{self.macro:.6f}"])
        return buf.getvalue()


def multiclass_auc(prob_matrix, labels, classes=CLASSES) -> MulticlassAuc:
    P = np.asarray(prob_matrix, dtype=float)
    if P.ndim != 2 or P.shape[1] != len(classes):
        raise LengthMismatch(f"expected an N x {len(classes)} matrix, got {P.shape}")
    if len(P) != len(labels):
        raise LengthMismatch("probability rows and labels differ in length")
    if np.any(np.abs(P.sum(axis=1) - 1) > 1e-6):
        raise EvalError("probability rows must sum to 1")
    index = {c: i for i, c in enumerate(classes)}
    try:
        y = np.array([index[l] for l in labels])
    except KeyError as e:
        raise UnknownLabel(str(e)) from None
    onehot = np.eye(len(classes), dtype=bool)[y]
    per = {}
    for k, c in enumerate(classes):
        if onehot[:, k].all() or not onehot[:, k].any():
            raise SingleClass(f"class {c} absent or universal")
        per[c] = roc_auc(P[:, k], onehot[:, k])
    micro = roc_auc(P.ravel(), onehot.ravel())
    return MulticlassAuc(per, micro, float(np.mean(list(per.values()))))


# --- splits ------------------------------------------------------------------------

class SplitKind(enum.Enum):
    TEN_FOLD_BALANCED = "TenFoldBalanced"
    GENE_WISE = "GeneWise"


@dataclass
class SplitPlan:
    kind: SplitKind
    seed: int
    assignments: dict = field(default_factory=dict)

    def folds(self) -> dict[int, list]:
        out: dict[int, list] = {}
        for item, f in self.assignments.items():
            out.setdefault(f, []).append(item)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item", "assignment"])
        for item, a in sorted(self.assignments.items(), key=lambda kv: str(kv[0])):
            w.writerow([item, a])
        return buf.getvalue()


def kfold_balanced(items: dict[str, list], k: int = 10, seed: int = 0) -> SplitPlan:
    """Shuffle each class separately, then deal its items round-robin into k folds."""
    rng = np.random.default_rng(seed)
    plan = SplitPlan(SplitKind.TEN_FOLD_BALANCED, seed)
    for cls in sorted(items):
        members = list(items[cls])
        if len(members) < k:
            raise TooFewItems(f"class {cls} has {len(members)} items for {k} folds")
        for pos, idx in enumerate(rng.permutation(len(members))):
            item = members[idx]
            if item in plan.assignments:
                raise EvalError(f"item {item!r} listed twice")
            plan.assignments[item] = pos % k
    return plan


def genewise_split(mapping: dict, gene_class: dict, test_fraction: float, seed: int = 0,
                   class_priority=("TSG",)) -> SplitPlan:
    """Assign whole genes to train/test until the test share of structures reaches the target.

    Genes of priority classes are drawn only after the others are exhausted,
    and every class keeps at least one gene in training. Each structure
    inherits its gene's side.
    """
    if not 0 <= test_fraction < 1:
        raise InfeasibleFraction(f"test_fraction {test_fraction} outside [0, 1)")
    by_class: dict[str, list] = {}
    for g in sorted(mapping):
        by_class.setdefault(gene_class[g], []).append(g)
    for c, genes in by_class.items():
        if len(genes) < 2:
            raise InfeasibleFraction(f"class {c} needs at least two genes")

    rng = np.random.default_rng(seed)
    total = sum(len(v) for v in mapping.values())
    target = test_fraction * total
    normal, prior = [], []
    for c in sorted(by_class):
        genes = by_class[c]
        keep = genes[int(rng.integers(len(genes)))]
        rest = [genes[i] for i in rng.permutation(len(genes)) if genes[i] != keep]
        (prior if c in class_priority else normal).append(rest)
    # classes are interleaved so the test side stays mixed
    queue = _interleave(normal) + _interleave(prior)

    side = {g: "train" for g in mapping}
    taken = 0
    for g in queue:
        if taken >= target:
            break
        side[g] = "test"
        taken += len(mapping[g])
    if target > 0 and taken < target:
        raise InfeasibleFraction(f"cannot reach {test_fraction:.3f} of structures without emptying a class")
    plan = SplitPlan(SplitKind.GENE_WISE, seed)
    for g in sorted(mapping):
        for s in mapping[g]:
            plan.assignments[s] = side[g]
    return plan


def _interleave(lists):
    out, i = [], 0
    while any(i < len(l) for l in lists):
        out.extend(l[i] for l in lists if i < len(l))
        i += 1
    return out


def replay_gene_assignment(mapping: dict, assignment_text: str, seed: int = 0) -> SplitPlan:
    """Build a gene-wise plan from a published `gene,side` table."""
    side = {}
    for row in csv.reader(io.StringIO(assignment_text)):
        if not row or row[0].startswith("#") or row[0] == "gene_id":
            continue
        if row[1] not in ("train", "test"):
            raise EvalError(f"bad side {row[1]!r}")
        side[row[0]] = row[1]
    plan = SplitPlan(SplitKind.GENE_WISE, seed)
    for g in sorted(mapping, key=str):
        if str(g) not in side:
            raise EvalError(f"gene {g} missing from assignment file")
        for s in mapping[g]:
            plan.assignments[s] = side[str(g)]
    return plan
