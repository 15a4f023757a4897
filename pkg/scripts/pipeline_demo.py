#!/usr/bin/env python3
"""Generate a synthetic structure corpus and run the whole pipeline on it.

Writes the fixture and an INI file under WORKDIR, runs every stage, and
prints the report. Run it twice to see every stage skipped.
"""
import argparse
import sys
from pathlib import Path

from struct2func import cli
from struct2func.synthetic import write_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("workdir", type=Path)
    ap.add_argument("--structures", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    args.workdir.mkdir(parents=True, exist_ok=True)
    if not (args.workdir / "mapping.tsv").exists():
        write_fixture(args.workdir, n_structures=args.structures, seed=args.seed, non_xray=(1,))
    ini = args.workdir / "run.ini"
    ini.write_text("[paths]\npdb_dir = pdb\nmapping_file = mapping.tsv\noutput_dir = out\n"
                   f"[run]\nseed = {args.seed}\n")
    code = cli.main(["--config", str(ini), "--jobs", str(args.jobs)])
    report = args.workdir / "out" / "report" / "report.txt"
    if report.exists():
        print(report.read_text(), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
