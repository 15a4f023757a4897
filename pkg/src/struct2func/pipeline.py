"""End-to-end batch flow: ingest -> featurize -> classify -> aggregate -> evaluate -> report.

Each stage writes its artifacts under the output directory and a stamp
holding a digest of its configuration and input files. A stage whose digest
and outputs are unchanged is skipped.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import aggregate as agg
from . import evalkit
from .featurize import FeatureTensor, read_tensor, write_tensor, featurize_structure
from .geometry import DEFAULT_CLEARANCE, DEFAULT_RESOLUTION_FACTOR
from .pdb_ingest import (CLASS_ORDER, FilterConfig, GeneClass, MappingEntry, clean_class_overlaps,
                         filter_record, format_mapping_table, parse_mapping_table, parse_pdb)
from .surface_depth import DepthThresholds, approximate_mesh, parse_surface_vertices

log = logging.getLogger(__name__)

STAGES = ("ingest", "featurize", "classify", "aggregate", "evaluate", "report")
PDB_SUFFIXES = (".pdb", ".ent")


class ConfigError(ValueError):
    pass


class MissingUpstreamArtifact(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    pdb_dir: Path | None = None
    mapping_file: Path | None = None
    output_dir: Path = Path("out")
    vert_dir: Path | None = None
    filter: FilterConfig = field(default_factory=FilterConfig)
    thresholds: DepthThresholds = field(default_factory=DepthThresholds)
    resolution_factor: float = DEFAULT_RESOLUTION_FACTOR
    clearance: float = DEFAULT_CLEARANCE
    annotation: agg.AnnotationConfig = field(default_factory=agg.AnnotationConfig)
    weights_file: Path | None = None
    probabilities_file: Path | None = None
    folds: int = 10
    test_fraction: float = 0.25
    jobs: int = 1
    seed: int = 0

    def validate(self, need_data: bool = True) -> "PipelineConfig":
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.resolution_factor <= 0 or self.clearance < 0:
            raise ConfigError("resolution_factor must be positive and clearance nonnegative")
        if need_data:
            for name in ("pdb_dir", "mapping_file"):
                p = getattr(self, name)
                if p is None or not Path(p).exists():
                    raise ConfigError(f"{name} does not exist: {p}")
        for name in ("vert_dir", "weights_file", "probabilities_file"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{name} does not exist: {p}")
        return self

    def digest_view(self) -> dict:
        """Settings that influence artifacts (the worker count does not)."""
        d = asdict(self)
        d.pop("jobs")
        d.pop("output_dir")
        return json.loads(json.dumps(d, default=str))


def _opt_path(value: str | None, base: Path) -> Path | None:
    if value is None or not value.strip():
        return None
    p = Path(value.strip()).expanduser()
    return p if p.is_absolute() else base / p


def load_config(path) -> PipelineConfig:
    """Read an INI file; relative paths resolve against the file's directory."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    base = path.parent.resolve()
    known = {"paths", "filter", "surface", "geometry", "classify", "annotation", "split", "run"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        try:
            return conv(cp.get(section, key))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc

    def flag(section, key, default):
        if not cp.has_option(section, key):
            return default
        try:
            return cp.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc

    paths = dict(cp.items("paths")) if cp.has_section("paths") else {}
    try:
        cfg = PipelineConfig(
            pdb_dir=_opt_path(paths.get("pdb_dir"), base),
            mapping_file=_opt_path(paths.get("mapping_file"), base),
            output_dir=_opt_path(paths.get("output_dir"), base) or base / "out",
            vert_dir=_opt_path(paths.get("vert_dir"), base),
            filter=FilterConfig(
                min_overlap_length=get("filter", "min_overlap_length", int, 81),
                require_xray=flag("filter", "require_xray", True),
                require_site=flag("filter", "require_site", True),
                require_uniform_chains=flag("filter", "require_uniform_chains", True)),
            thresholds=DepthThresholds(get("surface", "calpha_max", float, 7.2),
                                       get("surface", "residue_max", float, 6.7)),
            resolution_factor=get("geometry", "resolution_factor", float, DEFAULT_RESOLUTION_FACTOR),
            clearance=get("geometry", "clearance", float, DEFAULT_CLEARANCE),
            annotation=agg.AnnotationConfig(
                get("annotation", "m_p_d", float, 0.25), get("annotation", "high_band", float, 0.40),
                get("annotation", "low_band", float, 0.30), get("annotation", "tie_epsilon", float, 0.02)),
            weights_file=_opt_path(cp.get("classify", "weights", fallback=None), base),
            probabilities_file=_opt_path(cp.get("classify", "probabilities", fallback=None), base),
            folds=get("split", "folds", int, 10),
            test_fraction=get("split", "test_fraction", float, 0.25),
            jobs=get("run", "jobs", int, 1),
            seed=get("run", "seed", int, 0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


# --- helpers ----------------------------------------------------------------------

def _sha(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def structure_files(pdb_dir) -> list[Path]:
    if pdb_dir is None or not Path(pdb_dir).exists():
        return []
    return sorted(p for p in Path(pdb_dir).iterdir() if p.suffix.lower() in PDB_SUFFIXES)


def _status_of_error(exc: Exception) -> str:
    return f"Failed({type(exc).__name__}: {exc})"


def _featurize_one(task):
    """Worker: one structure -> tensor + provenance files. Returns (pdb_id, status)."""
    pdb_id, pdb_path, vert_path, out_path, th, factor, clearance = task
    try:
        rec = parse_pdb(Path(pdb_path).read_text(), pdb_id)
        if vert_path is not None:
            mesh = parse_surface_vertices(Path(vert_path).read_text())
        else:
            mesh = approximate_mesh(rec.coordinates(include_hetatm=False))
        ft = featurize_structure(rec, mesh, DepthThresholds(*th), factor, clearance)
        ft.provenance["surface_source"] = "vert" if vert_path is not None else "approximate"
        out_path = Path(out_path)
        write_tensor(ft, out_path)
        _atomic_write(out_path.with_suffix(".json"), _dump(ft.provenance))
        return pdb_id, "ok"
    except Exception as exc:  # quarantined per structure
        return pdb_id, _status_of_error(exc)


# --- pipeline ---------------------------------------------------------------------

@dataclass
class RunManifest:
    structures: dict[str, str]
    class_counts_before: dict[str, int]
    class_counts_after: dict[str, int]
    stages: dict[str, str]
    timing: dict[str, float]
    missing_structures: list[str] = field(default_factory=list)

    @property
    def n_accepted(self) -> int:
        return sum(1 for s in self.structures.values() if s == "Accepted")

    def to_json(self) -> str:
        return _dump(asdict(self))


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.stage_state: dict[str, str] = {}
        self.timing: dict[str, float] = {}

    # paths
    def p(self, *parts) -> Path:
        return self.out.joinpath(*parts)

    @property
    def entries_path(self):
        return self.p("ingest", "entries.tsv")

    @property
    def probs_path(self):
        return self.p("classify", "probabilities.csv")

    @property
    def preds_path(self):
        return self.p("aggregate", "predictions.csv")

    # stage bookkeeping
    def _inputs(self, stage: str) -> list[Path]:
        c = self.cfg
        if stage == "ingest":
            files = structure_files(c.pdb_dir)
            return files + ([Path(c.mapping_file)] if c.mapping_file else [])
        if stage == "featurize":
            verts = sorted(Path(c.vert_dir).glob("*.vert")) if c.vert_dir else []
            return [self.entries_path, self.p("ingest", "status.json")] + structure_files(c.pdb_dir) + verts
        if stage == "classify":
            if c.probabilities_file:
                return [Path(c.probabilities_file)]
            extra = [c.weights_file] if c.weights_file else []
            status = self.p("featurize", "status.json")
            return [status] + sorted(self.p("tensors").glob("*.s2ft")) + extra
        if stage == "aggregate":
            return [self._probabilities_source()]
        if stage == "evaluate":
            return [self.probs_path, self.preds_path] + ([Path(c.mapping_file)] if c.mapping_file else [])
        if stage == "report":
            return [self.p("ingest", "status.json"), self.p("featurize", "status.json"),
                    self.p("evaluate", "metrics_pdb.csv"), self.p("evaluate", "metrics_gene.csv")]
        raise ValueError(stage)

    def _probabilities_source(self) -> Path:
        if self.probs_path.exists() or self.cfg.probabilities_file is None:
            return self.probs_path
        return Path(self.cfg.probabilities_file)

    def digest(self, stage: str) -> str:
        h = hashlib.sha256()
        h.update(stage.encode())
        h.update(json.dumps(self.cfg.digest_view(), sort_keys=True).encode())
        for path in self._inputs(stage):
            h.update(str(path.name).encode())
            if not path.exists():
                raise MissingUpstreamArtifact(f"stage {stage} needs {path}")
            h.update(_sha(path).encode())
        return h.hexdigest()

    def _stamp_path(self, stage):
        return self.p(".stamps", f"{stage}.json")

    def _fresh(self, stage: str, digest: str) -> bool:
        sp = self._stamp_path(stage)
        if not sp.exists():
            return False
        stamp = json.loads(sp.read_text())
        if stamp.get("digest") != digest:
            return False
        return all(self.p(rel).exists() and _sha(self.p(rel)) == sha
                   for rel, sha in stamp.get("outputs", {}).items())

    def run_stage(self, stage: str) -> bool:
        """Run one stage unless its stamp is current. Returns True when work was done."""
        digest = self.digest(stage)
        if self._fresh(stage, digest):
            log.info("stage %s: up to date", stage)
            self.stage_state[stage] = "skipped"
            self.timing[stage] = 0.0
            return False
        t0 = time.perf_counter()
        outputs = getattr(self, f"_stage_{stage}")()
        self.timing[stage] = round(time.perf_counter() - t0, 3)
        stamp = {"digest": digest,
                 "outputs": {str(p.relative_to(self.out)): _sha(p) for p in outputs}}
        _atomic_write(self._stamp_path(stage), _dump(stamp))
        self.stage_state[stage] = "ran"
        log.info("stage %s: done in %.2fs", stage, self.timing[stage])
        return True

    # --- stages ---
    def _mapping(self) -> list[MappingEntry]:
        return parse_mapping_table(Path(self.cfg.mapping_file).read_text())

    def _stage_ingest(self) -> list[Path]:
        c = self.cfg
        entries = self._mapping()
        cleaned = clean_class_overlaps(entries)
        by_pdb: dict[str, list[MappingEntry]] = {}
        for e in cleaned.entries:
            by_pdb.setdefault(e.pdb_id, []).append(e)
        banned = {e.pdb_id for e in cleaned.removed_banned}

        status, kept = {}, []
        files = structure_files(c.pdb_dir)
        for path in files:
            pdb_id = path.stem.upper()
            try:
                rec = parse_pdb(path.read_text(), pdb_id)
            except Exception as exc:
                status[pdb_id] = _status_of_error(exc)
                continue
            mine = sorted(by_pdb.get(pdb_id, []), key=lambda e: (e.gene_id, e.start, e.end))
            if not mine:
                reason = ("CrossClass" if pdb_id in cleaned.cross_class_pdb_ids
                          else "BannedGene" if pdb_id in banned else "Unmapped")
                status[pdb_id] = f"Rejected({reason})"
                continue
            decisions = [filter_record(rec, e, c.filter) for e in mine]
            ok = [e for e, d in zip(mine, decisions) if d.accepted]
            status[pdb_id] = "Accepted" if ok else str(decisions[0])
            kept.extend(ok)

        present = {p.stem.upper() for p in files}
        before = {cl.value: 0 for cl in CLASS_ORDER}
        for pid, cl in {(e.pdb_id, e.class_label) for e in entries}:
            before[cl.value] += 1
        info = {
            "structures": status,
            "class_counts_before": before,
            "class_counts_after": cleaned.class_counts(),
            "missing_structures": sorted({e.pdb_id for e in entries} - present),
        }
        _atomic_write(self.entries_path, format_mapping_table(kept))
        _atomic_write(self.p("ingest", "status.json"), _dump(info))
        return [self.entries_path, self.p("ingest", "status.json")]

    def _accepted_entries(self) -> list[MappingEntry]:
        if not self.entries_path.exists():
            raise MissingUpstreamArtifact(f"{self.entries_path} (run ingest first)")
        return parse_mapping_table(self.entries_path.read_text())

    def _stage_featurize(self) -> list[Path]:
        c = self.cfg
        accepted = sorted({e.pdb_id for e in self._accepted_entries()})
        files = {p.stem.upper(): p for p in structure_files(c.pdb_dir)}
        tdir = self.p("tensors")
        tdir.mkdir(parents=True, exist_ok=True)
        for old in tdir.glob("*"):
            if old.stem not in accepted:
                old.unlink()
        tasks = []
        for pid in accepted:
            vert = None
            if c.vert_dir:
                cand = [Path(c.vert_dir) / f"{pid}.vert", Path(c.vert_dir) / f"{pid.lower()}.vert"]
                vert = next((str(v) for v in cand if v.exists()), None)
            tasks.append((pid, str(files[pid]), vert, str(tdir / f"{pid}.s2ft"),
                          (c.thresholds.calpha_max, c.thresholds.residue_max),
                          c.resolution_factor, c.clearance))
        if c.jobs > 1 and len(tasks) > 1:
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=min(c.jobs, len(tasks)), mp_context=ctx) as ex:
                results = list(ex.map(_featurize_one, tasks))
        else:
            results = [_featurize_one(t) for t in tasks]
        status = dict(results)
        _atomic_write(self.p("featurize", "status.json"), _dump(status))
        outs = [self.p("featurize", "status.json")]
        for pid, st in results:
            if st == "ok":
                outs += [tdir / f"{pid}.s2ft", tdir / f"{pid}.json"]
            else:
                log.warning("featurize %s: %s", pid, st)
        return outs

    def _stage_classify(self) -> list[Path]:
        c = self.cfg
        if c.probabilities_file is not None:
            genes = agg.read_probabilities(Path(c.probabilities_file).read_text())
            rows = [(s.pdb_id, gid, s.start, s.end, s.probs)
                    for gid in sorted(genes) for s in genes[gid]]
            _atomic_write(self.probs_path, agg.format_probabilities(rows))
            return [self.probs_path]

        from . import netspec, toynet  # torch is only needed here

        status_path = self.p("featurize", "status.json")
        if not status_path.exists():
            raise MissingUpstreamArtifact(f"{status_path} (run featurize first)")
        ok = sorted(pid for pid, st in json.loads(status_path.read_text()).items() if st == "ok")
        g = netspec.build_architecture(netspec.ArchConfig())
        outs = []
        if c.weights_file is not None:
            weights = netspec.read_weights(c.weights_file)
        else:
            weights = toynet.glorot_uniform_init(g, c.seed)
            wpath = self.p("classify", "init_weights.s2fw")
            wpath.parent.mkdir(parents=True, exist_ok=True)
            netspec.write_weights(weights, wpath)
            outs.append(wpath)
        model = toynet.build_model(g, weights) if ok else None
        probs = {}
        for pid in ok:
            t = read_tensor(self.p("tensors", f"{pid}.s2ft"))
            probs[pid] = toynet.forward(g, t.data, model=model)
        rows = [(e.pdb_id, e.gene_id, e.start, e.end, probs[e.pdb_id])
                for e in sorted(self._accepted_entries(), key=lambda e: (e.gene_id, e.pdb_id, e.start))
                if e.pdb_id in probs]
        _atomic_write(self.probs_path, agg.format_probabilities(rows))
        return outs + [self.probs_path]

    def _stage_aggregate(self) -> list[Path]:
        src = self._probabilities_source()
        if not src.exists():
            raise MissingUpstreamArtifact(f"{src} (run classify first)")
        genes = agg.read_probabilities(src.read_text())
        preds, traces = [], {}
        for gid in sorted(genes):
            rows, tr = agg.aggregate_gene(gid, genes[gid], self.cfg.annotation)
            preds.extend(rows)
            if tr:
                traces[str(gid)] = tr
                log.info("gene %s method2 cov trace: %s", gid, ",".join(map(str, tr["method2_cov"])))
        _atomic_write(self.preds_path, agg.format_predictions(preds))
        _atomic_write(self.p("aggregate", "traces.json"), _dump(traces))
        return [self.preds_path, self.p("aggregate", "traces.json")]

    def _gene_classes(self) -> dict[int, str]:
        if self.cfg.mapping_file is None:
            return {}
        cleaned = clean_class_overlaps(self._mapping())
        return {e.gene_id: e.class_label.value for e in cleaned.entries}

    def _stage_evaluate(self) -> list[Path]:
        for p in (self.probs_path, self.preds_path):
            if not p.exists():
                raise MissingUpstreamArtifact(str(p))
        classes = self._gene_classes()
        genes = agg.read_probabilities(self.probs_path.read_text())
        pdb_rows = [(classes[g], s.probs) for g in sorted(genes) if g in classes for s in genes[g]]

        gene_rows = []
        for row in csv.DictReader(io.StringIO(self.preds_path.read_text())):
            g = int(row["gene_id"])
            if row["method"] in ("Ensemble", "Direct") and g in classes:
                gene_rows.append((classes[g], tuple(float(row[k]) for k in ("p_og", "p_tsg", "p_fusion"))))

        outs = []
        edir = self.p("evaluate")
        for scope, rows in (("pdb", pdb_rows), ("gene", gene_rows)):
            labels = [r[0] for r in rows]
            P = np.array([r[1] for r in rows], dtype=float).reshape(-1, 3)
            cm = evalkit.confusion(labels, [evalkit.CLASSES[int(np.argmax(p))] for p in P])
            metrics = _metric_rows(P, labels)
            metrics.append(("accuracy", cm.accuracy() if rows else float("nan")))
            text = "scope,value\n" + "".join(f"{k},{v:.6f}\n" for k, v in metrics)
            _atomic_write(edir / f"metrics_{scope}.csv", text)
            _atomic_write(edir / f"confusion_{scope}.csv", cm.to_csv())
            outs += [edir / f"metrics_{scope}.csv", edir / f"confusion_{scope}.csv"]
            for k, cl in enumerate(evalkit.CLASSES):
                y = np.array([l == cl for l in labels])
                if y.any() and not y.all():
                    roc = evalkit.roc_curve(P[:, k], y)
                    path = edir / f"roc_{scope}_{cl}.csv"
                    _atomic_write(path, roc.to_csv())
                    outs.append(path)
        return outs

    def _stage_report(self) -> list[Path]:
        m = self.manifest()
        lines = [f"structures: {len(m.structures)}", f"accepted: {m.n_accepted}"]
        reasons: dict[str, int] = {}
        for st in m.structures.values():
            reasons[st.split(":")[0]] = reasons.get(st.split(":")[0], 0) + 1
        lines += [f"  {k}: {v}" for k, v in sorted(reasons.items())]
        lines.append(f"classes before cleaning: {m.class_counts_before}")
        lines.append(f"classes after cleaning: {m.class_counts_after}")
        for scope in ("pdb", "gene"):
            lines.append(f"[{scope}]")
            lines.append(self.p("evaluate", f"metrics_{scope}.csv").read_text().rstrip())
        path = self.p("report", "report.txt")
        _atomic_write(path, "\n".join(lines) + "\n")
        return [path]

    # --- manifest ---
    def manifest(self) -> RunManifest:
        info = {"structures": {}, "class_counts_before": {}, "class_counts_after": {},
                "missing_structures": []}
        ip = self.p("ingest", "status.json")
        if ip.exists():
            info = json.loads(ip.read_text())
        structures = dict(info["structures"])
        fp = self.p("featurize", "status.json")
        if fp.exists():
            for pid, st in json.loads(fp.read_text()).items():
                if st != "ok" and pid in structures:
                    structures[pid] = st
        return RunManifest(structures, info["class_counts_before"], info["class_counts_after"],
                           dict(self.stage_state), dict(self.timing), info["missing_structures"])

    def write_manifest(self) -> RunManifest:
        m = self.manifest()
        _atomic_write(self.p("manifest.json"), m.to_json())
        return m


def _metric_rows(P: np.ndarray, labels: list[str]) -> list[tuple[str, float]]:
    """Per-class, micro and macro AUROC; NaN where a class is absent or universal."""
    nan = float("nan")
    rows, per = [], []
    onehot = np.array([[l == c for c in evalkit.CLASSES] for l in labels], dtype=bool).reshape(-1, 3)
    for k, cl in enumerate(evalkit.CLASSES):
        try:
            v = evalkit.roc_auc(P[:, k], onehot[:, k])
            per.append(v)
        except evalkit.SingleClass:
            v = nan
        rows.append((f"auroc_{cl}", v))
    try:
        micro = evalkit.roc_auc(P.ravel(), onehot.ravel())
    except evalkit.SingleClass:
        micro = nan
    rows.append(("auroc_micro", micro))
    rows.append(("auroc_macro", float(np.mean(per)) if len(per) == 3 else nan))
    # OG vs TSG on renormalized pairs, restricted to items labelled OG or TSG
    keep = [i for i, l in enumerate(labels) if l in ("OG", "TSG")]
    try:
        pair = np.array([agg.binary_renormalize(P[i], (0, 1))[0] for i in keep])
        rows.append(("auroc_og_vs_tsg", evalkit.roc_auc(pair, [labels[i] == "OG" for i in keep])))
    except evalkit.SingleClass:
        rows.append(("auroc_og_vs_tsg", nan))
    return rows


def run(cfg: PipelineConfig, stages=STAGES) -> RunManifest:
    cfg.validate(need_data="ingest" in stages)
    pipe = Pipeline(cfg)
    pipe.out.mkdir(parents=True, exist_ok=True)
    for stage in stages:
        pipe.run_stage(stage)
    return pipe.write_manifest()
