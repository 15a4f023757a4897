"""Command-line entry point.

Exit codes: 0 success, 1 invalid input data, 2 configuration error,
3 nothing left after filtering, 4 a stage was asked for before its inputs exist.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import netspec
from .pipeline import STAGES, ConfigError, MissingUpstreamArtifact, PipelineConfig, load_config, run

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_EMPTY, EXIT_UPSTREAM = 0, 1, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="struct2func",
                                 description="Structure-to-function gene classification pipeline")
    ap.add_argument("--config", type=Path, help="INI configuration file")
    ap.add_argument("--stage", default="run", choices=("run",) + STAGES + ("netcheck",))
    ap.add_argument("--jobs", type=int, help="worker processes for per-structure work")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, help="output directory (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def netcheck() -> str:
    g = netspec.build_architecture(netspec.ArchConfig())
    report = netspec.count_parameters(g)
    lines = [report.table().rstrip(),
             f"flatten width: {g.flatten_width}",
             f"spatial sizes: {' -> '.join(map(str, g.spatial))}",
             f"baseline total: {netspec.count_baseline_parameters():,}"]
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.stage == "netcheck":
        sys.stdout.write(netcheck())
        return EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        overrides = {k: v for k, v in (("jobs", args.jobs), ("seed", args.seed),
                                        ("output_dir", args.out)) if v is not None}
        cfg = replace(cfg, **overrides)
        stages = STAGES if args.stage == "run" else (args.stage,)
        manifest = run(cfg, stages)
    except ConfigError as exc:
        logging.error("config error: %s", exc)
        return EXIT_CONFIG
    except MissingUpstreamArtifact as exc:
        logging.error("missing upstream artifact: %s", exc)
        return EXIT_UPSTREAM
    except ValueError as exc:
        logging.error("invalid input data: %s", exc)
        return EXIT_DATA
    if "ingest" in stages and manifest.n_accepted == 0:
        logging.warning("no structure survived filtering")
        return EXIT_EMPTY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
