#!/usr/bin/env python3
"""Replay the gene-150 span example through all aggregation methods.

Prints the Method_1 rounds, the coverage traces of Method_2 and Method_3,
their chosen segments and weights, and the final gene-level rows.
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from struct2func import aggregate as agg  # noqa: E402
from worked_example import COVERAGE, GENE_ID, LONGEST_FIRST  # noqa: E402


def main():
    rounds, p1 = agg.method_1_rounds(LONGEST_FIRST)
    print("Method_1 rounds")
    for r in rounds:
        fr = ", ".join(f"{k}={v}" for k, v in r.fractions.items())
        print(f"  pick {r.selected} ({r.length}): {fr}")
    print(f"  result {p1.round(6).tolist()}")

    for name, detail in (("Method_2", agg.method_2_detail), ("Method_3", agg.method_3_detail)):
        d = detail(COVERAGE)
        chosen = ["/".join(d.segments[i].members) for i in d.chosen]
        print(f"{name} cov {d.cov}")
        print(f"  chosen {chosen} weights {[str(w) for w in d.weights]}")
        print(f"  result {d.probs.round(6).tolist()}")

    preds, _ = agg.aggregate_gene(GENE_ID, COVERAGE)
    print(agg.format_predictions(preds), end="")


if __name__ == "__main__":
    main()
