import csv
import io
import json
import logging

import pytest

from struct2func import cli
from struct2func.pipeline import (
    STAGES, ConfigError, MissingUpstreamArtifact, PipelineConfig, load_config, run)
from struct2func.synthetic import write_fixture
from worked_example import coverage_csv


def _ini(path, **sections):
    text = ""
    for name, body in sections.items():
        text += f"[{name}]\n" + "".join(f"{k} = {v}\n" for k, v in body.items())
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def three(tmp_path_factory):
    """Three structures, the last one solved by NMR; run once through every stage."""
    root = tmp_path_factory.mktemp("three")
    paths = write_fixture(root, n_structures=3, n_genes=3, non_xray=(2,), seed=4)
    cfg_path = _ini(root / "run.ini", paths={"pdb_dir": "pdb", "mapping_file": "mapping.tsv",
                                             "output_dir": "out"})
    code = cli.main(["--config", str(cfg_path)])
    return root, cfg_path, paths, code


class TestConfig:
    def test_relative_paths(self, tmp_path):
        cfg = load_config(_ini(tmp_path / "a.ini", paths={"pdb_dir": "x"}, run={"seed": 7}))
        assert cfg.pdb_dir == tmp_path / "x" and cfg.seed == 7 and cfg.output_dir == tmp_path / "out"

    def test_bad_values(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_ini(tmp_path / "b.ini", run={"jobs": "many"}))
        with pytest.raises(ConfigError):
            load_config(_ini(tmp_path / "c.ini", bogus={"x": 1}))
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.ini")
        with pytest.raises(ConfigError):
            load_config(_ini(tmp_path / "d.ini", annotation={"low_band": 0.9}))

    def test_cli_exit_code(self, tmp_path):
        assert cli.main(["--config", str(tmp_path / "nope.ini")]) == cli.EXIT_CONFIG
        cfg = _ini(tmp_path / "e.ini", paths={"pdb_dir": "absent", "mapping_file": "absent.tsv"})
        assert cli.main(["--config", str(cfg)]) == cli.EXIT_CONFIG
        assert cli.main(["--config", str(cfg), "--jobs", "0"]) == cli.EXIT_CONFIG

    def test_digest_ignores_jobs(self):
        a, b = PipelineConfig(jobs=1), PipelineConfig(jobs=8)
        assert a.digest_view() == b.digest_view()
        assert a.digest_view() != PipelineConfig(seed=1).digest_view()


class TestThreeStructures:
    def test_statuses(self, three):
        root, _, _, code = three
        assert code == cli.EXIT_OK
        manifest = json.loads((root / "out" / "manifest.json").read_text())
        statuses = sorted(manifest["structures"].values())
        assert statuses == ["Accepted", "Accepted", "Rejected(NotXRay)"]

    def test_artifacts(self, three):
        out = three[0] / "out"
        for rel in ("ingest/entries.tsv", "classify/probabilities.csv", "aggregate/predictions.csv",
                    "evaluate/metrics_pdb.csv", "evaluate/confusion_gene.csv", "report/report.txt"):
            assert (out / rel).exists(), rel
        assert len(list((out / "tensors").glob("*.s2ft"))) == 2
        rows = list(csv.DictReader(io.StringIO((out / "aggregate/predictions.csv").read_text())))
        assert rows and all(r["label"] for r in rows)

    def test_rerun_skips_everything(self, three):
        root, cfg_path, _, _ = three
        before = (root / "out/aggregate/predictions.csv").read_bytes()
        assert cli.main(["--config", str(cfg_path)]) == cli.EXIT_OK
        manifest = json.loads((root / "out" / "manifest.json").read_text())
        assert set(manifest["stages"].values()) == {"skipped"}
        assert (root / "out/aggregate/predictions.csv").read_bytes() == before

    def test_changed_setting_reruns(self, three):
        root, cfg_path, _, _ = three
        out = root / "out_seed"
        assert cli.main(["--config", str(cfg_path), "--out", str(out), "--stage", "ingest"]) == 0
        assert cli.main(["--config", str(cfg_path), "--out", str(out), "--stage", "ingest",
                         "--seed", "5"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["stages"] == {"ingest": "ran"}


def test_empty_directory(tmp_path):
    (tmp_path / "pdb").mkdir()
    (tmp_path / "mapping.tsv").write_text("gene_id\tgene_symbol\tclass\tpdb_id\tstart\tend\n")
    cfg = _ini(tmp_path / "r.ini", paths={"pdb_dir": "pdb", "mapping_file": "mapping.tsv"})
    assert cli.main(["--config", str(cfg)]) == cli.EXIT_EMPTY
    manifest = json.loads((tmp_path / "out/manifest.json").read_text())
    assert manifest["structures"] == {}
    assert (tmp_path / "out/aggregate/predictions.csv").read_text().count("\n") == 1
    assert "accepted: 0" in (tmp_path / "out/report/report.txt").read_text()


def test_aggregate_logs_trace(tmp_path, caplog):
    probs = tmp_path / "probs.csv"
    probs.write_text(coverage_csv())
    cfg = _ini(tmp_path / "r.ini", classify={"probabilities": "probs.csv"})
    with caplog.at_level(logging.INFO):
        assert cli.main(["--config", str(cfg), "--stage", "aggregate"]) == cli.EXIT_OK
    assert "gene 150 method2 cov trace: 0,45,60,60,60,100,112" in caplog.text
    traces = json.loads((tmp_path / "out/aggregate/traces.json").read_text())
    assert traces["150"]["method3_cov"] == [0, 45, 85, 85, 85, 125, 137]


def test_perfect_predictions(tmp_path):
    classes = {"ONGO": (1, 0, 0), "TSG": (0, 1, 0), "Fusion": (0, 0, 1)}
    mapping = ["gene_id\tgene_symbol\tclass\tpdb_id\tstart\tend"]
    probs = ["pdb_id,gene_id,start,end,p_og,p_tsg,p_fusion"]
    for i in range(9):
        cls = list(classes)[i % 3]
        gene = 10 + i % 6
        mapping.append(f"{gene}\tG{gene}\t{cls}\t{i}ABC\t1\t200")
        probs.append(f"{i}ABC,{gene},{1 + i},{150 + i}," + ",".join(map(str, classes[cls])))
    (tmp_path / "mapping.tsv").write_text("\n".join(mapping) + "\n")
    (tmp_path / "probs.csv").write_text("\n".join(probs) + "\n")
    cfg = _ini(tmp_path / "r.ini", paths={"mapping_file": "mapping.tsv"},
               classify={"probabilities": "probs.csv"})
    for stage in ("classify", "aggregate", "evaluate"):
        assert cli.main(["--config", str(cfg), "--stage", stage]) == cli.EXIT_OK
    for scope in ("pdb", "gene"):
        rows = dict(csv.reader(io.StringIO((tmp_path / f"out/evaluate/metrics_{scope}.csv").read_text())))
        for key in ("auroc_OG", "auroc_TSG", "auroc_Fusion", "auroc_micro", "auroc_macro",
                    "auroc_og_vs_tsg", "accuracy"):
            assert float(rows[key]) == 1.0, (scope, key)


def test_missing_upstream(tmp_path):
    cfg = _ini(tmp_path / "r.ini", paths={"output_dir": "out"})
    assert cli.main(["--config", str(cfg), "--stage", "evaluate"]) == cli.EXIT_UPSTREAM
    with pytest.raises(MissingUpstreamArtifact):
        run(PipelineConfig(output_dir=tmp_path / "o2"), ("aggregate",))


def test_bad_probabilities_are_data_errors(tmp_path):
    (tmp_path / "p.csv").write_text("pdb_id,gene_id,start,end,p_og,p_tsg,p_fusion\nX,1,5,2,1,0,0\n")
    cfg = _ini(tmp_path / "r.ini", classify={"probabilities": "p.csv"})
    assert cli.main(["--config", str(cfg), "--stage", "aggregate"]) == cli.EXIT_DATA


def test_netcheck(capsys):
    assert cli.main(["--stage", "netcheck"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    for value in ("614,500", "5,050", "153", "32,512", "2,925,751", "2,533,655", "6144"):
        assert value in out


def test_stage_names():
    assert STAGES == ("ingest", "featurize", "classify", "aggregate", "evaluate", "report")
