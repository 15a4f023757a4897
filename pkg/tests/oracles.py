"""Slow, obviously-correct reference implementations used only by the tests."""

from fractions import Fraction
from itertools import combinations

import numpy as np


def union_length(spans) -> int:
    covered = set()
    for s, e in spans:
        covered.update(range(s, e))
    return len(covered)


def merged_spans(spans):
    return sorted(set(spans))


def best_disjoint_cover(spans) -> int:
    """Exhaustive search over subsets of pairwise non-overlapping half-open spans."""
    items = merged_spans(spans)
    best = 0
    for r in range(1, len(items) + 1):
        for sub in combinations(items, r):
            ordered = sorted(sub)
            if all(a[1] <= b[0] for a, b in zip(ordered, ordered[1:])):
                best = max(best, sum(e - s for s, e in sub))
    return best


def best_chain_cover(spans) -> int:
    """Exhaustive search: chains with strictly increasing starts and ends,
    valued as total length minus overlaps between consecutive members."""
    items = merged_spans(spans)
    best = 0
    for r in range(1, len(items) + 1):
        for sub in combinations(items, r):
            ordered = sorted(sub)
            if not all(a[0] < b[0] and a[1] < b[1] for a, b in zip(ordered, ordered[1:])):
                continue
            val = sum(e - s for s, e in ordered)
            val -= sum(max(0, min(a[1], b[1]) - max(a[0], b[0])) for a, b in zip(ordered, ordered[1:]))
            best = max(best, val)
    return best


def method_1_unit_weights(spans):
    """Residue-by-residue replay of the longest-remnant rounds.

    Works on explicit position sets, so it shares no interval arithmetic with
    the implementation. Returns the accumulated weight per input index.
    """
    order = sorted(range(len(spans)), key=lambda i: spans[i])
    remaining = {i: set(range(*spans[i])) for i in order}
    weights = {i: Fraction(0) for i in order}
    while any(remaining.values()):
        best = max(order, key=lambda i: (len(remaining[i]), -order.index(i)))
        sel = set(remaining[best])
        for i in order:
            weights[i] += len(remaining[i] & sel)
        for i in order:
            remaining[i] -= sel
    return weights


def pairwise_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def conv2d_same(x, w, b):
    """Direct-loop 2-D convolution (cross-correlation), zero 'same' padding.

    x: (C, H, W); w: (O, C, k, k); b: (O,)
    """
    C, H, W = x.shape
    O, _, k, _ = w.shape
    pad = k // 2
    xp = np.zeros((C, H + 2 * pad, W + 2 * pad))
    xp[:, pad:pad + H, pad:pad + W] = x
    out = np.zeros((O, H, W))
    for o in range(O):
        for i in range(H):
            for j in range(W):
                out[o, i, j] = np.sum(xp[:, i:i + k, j:j + k] * w[o]) + b[o]
    return out
