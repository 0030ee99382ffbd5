import hashlib
import json
import os

import numpy as np
import pytest

from cellscope.cli import main
from cellscope.schema import RawTable
from cellscope.synth import make_synthetic_table


def digest(path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    path = root / "clean.csv"
    make_synthetic_table(n_rows=300, seed=91).to_csv(path)
    return path


class TestCorruptCommand:
    def test_outputs_and_idempotence(self, data_csv, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            code = main(["corrupt", str(data_csv), "--out-dir", str(out), "--seed", "5"])
            assert code == 0
        for name in ("corrupted.csv", "mask.csv", "originals.csv", "schema.json"):
            assert (out1 / name).exists()
            assert digest(out1 / name) == digest(out2 / name)

    def test_mask_rows_align_with_data(self, data_csv, tmp_path):
        main(["corrupt", str(data_csv), "--out-dir", str(tmp_path), "--seed", "1"])
        data = RawTable.from_csv(tmp_path / "corrupted.csv")
        mask_lines = (tmp_path / "mask.csv").read_text().strip().splitlines()
        assert len(mask_lines) - 1 == data.n_rows

    def test_zero_fraction_copies_input(self, data_csv, tmp_path):
        main(["corrupt", str(data_csv), "--out-dir", str(tmp_path), "--fraction", "0"])
        assert digest(tmp_path / "corrupted.csv") == digest(data_csv)

    def test_default_fraction_is_three_percent(self, data_csv, tmp_path):
        main(["corrupt", str(data_csv), "--out-dir", str(tmp_path), "--seed", "2"])
        mask = np.loadtxt(tmp_path / "mask.csv", delimiter=",", skiprows=1, dtype=int)
        assert int(mask.any(axis=1).sum()) == round(0.03 * 300)


class TestTrainCommand:
    def test_checkpoint_digest_stable_under_seed(self, data_csv, tmp_path):
        args = [
            "train", str(data_csv), "--kind", "dae", "--loss", "enhanced",
            "--epochs", "3", "--seed", "7", "--widths", "25-16-8-16-25",
            "--log-every", "0",
        ]
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main(args + ["--out", str(p1)]) == 0
        assert main(args + ["--out", str(p2)]) == 0
        assert digest(p1) == digest(p2)

    def test_zero_epoch_checkpoint(self, data_csv, tmp_path):
        out = tmp_path / "init.json"
        code = main(
            ["train", str(data_csv), "--kind", "ae", "--epochs", "0",
             "--widths", "25-16-8-16-25", "--out", str(out)]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["kind"] == "ae"
        assert doc["provenance"]["epochs_run"] == 0

    def test_env_override_applies(self, data_csv, tmp_path, monkeypatch):
        out = tmp_path / "env.json"
        monkeypatch.setenv("CELLSCOPE_EPOCHS", "2")
        main(["train", str(data_csv), "--kind", "ae", "--widths", "25-16-8-16-25",
              "--out", str(out), "--log-every", "0"])
        doc = json.loads(out.read_text())
        assert doc["provenance"]["epochs_run"] == 2

    def test_config_file_layering(self, data_csv, tmp_path):
        cfg = tmp_path / "train.cfg"
        cfg.write_text("epochs=1\nwidths=25-16-8-16-25\n# comment\nseed=3\n")
        out = tmp_path / "cfg.json"
        main(["train", str(data_csv), "--kind", "ae", "--config", str(cfg), "--out", str(out)])
        doc = json.loads(out.read_text())
        assert doc["provenance"]["epochs_run"] == 1
        assert doc["provenance"]["config"]["seed"] == 3

    def test_marginals_and_pca_kinds(self, data_csv, tmp_path):
        for kind in ("pca", "marginals"):
            out = tmp_path / f"{kind}.json"
            assert main(["train", str(data_csv), "--kind", kind, "--out", str(out)]) == 0
            assert json.loads(out.read_text())["kind"] == kind


@pytest.fixture(scope="module")
def pipeline(data_csv, tmp_path_factory):
    """corrupt + train once for the evaluate/explain/serve tests."""
    root = tmp_path_factory.mktemp("pipeline")
    main(["corrupt", str(data_csv), "--out-dir", str(root), "--seed", "11", "--fraction", "0.1"])
    ckpt = root / "dae.json"
    main(
        ["train", str(data_csv), "--kind", "dae", "--epochs", "40",
         "--widths", "25-32-8-32-25", "--seed", "11", "--out", str(ckpt), "--log-every", "0"]
    )
    return root, ckpt


class TestEvaluateCommand:
    def test_report_files(self, pipeline, tmp_path):
        root, ckpt = pipeline
        out_json = tmp_path / "report.json"
        out_csv = tmp_path / "report.csv"
        code = main(
            ["evaluate", "--checkpoint", str(ckpt),
             "--data", str(root / "corrupted.csv"), "--mask", str(root / "mask.csv"),
             "--originals", str(root / "originals.csv"),
             "--out-json", str(out_json), "--out-csv", str(out_csv)]
        )
        assert code == 0
        report = json.loads(out_json.read_text())[0]
        assert set(report) >= {"p_at_k", "map_categorical", "map_numeric"}
        assert out_csv.read_text().startswith("model_kind,seed,p_at_k")

    def test_multiple_checkpoints_aggregate(self, pipeline, tmp_path, capsys):
        root, ckpt = pipeline
        code = main(
            ["evaluate", "--checkpoint", str(ckpt), "--checkpoint", str(ckpt),
             "--data", str(root / "corrupted.csv"), "--mask", str(root / "mask.csv"),
             "--originals", str(root / "originals.csv")]
        )
        assert code == 0
        assert "aggregate over checkpoints" in capsys.readouterr().out

    def test_empty_mask_is_not_an_error(self, data_csv, pipeline, tmp_path):
        root, ckpt = pipeline
        clean_dir = tmp_path / "clean"
        main(["corrupt", str(data_csv), "--out-dir", str(clean_dir), "--fraction", "0"])
        code = main(
            ["evaluate", "--checkpoint", str(ckpt),
             "--data", str(clean_dir / "corrupted.csv"),
             "--mask", str(clean_dir / "mask.csv"),
             "--originals", str(clean_dir / "originals.csv")]
        )
        assert code == 0

    def test_schema_mismatch_names_columns_and_exits_2(self, pipeline, tmp_path, capsys):
        root, ckpt = pipeline
        other = tmp_path / "other.csv"
        table = make_synthetic_table(n_rows=60, n_categorical=2, n_numeric=2, seed=5)
        table.to_csv(other)
        mask = tmp_path / "mask.csv"
        mask.write_text("cat_0,cat_1,num_0,num_1\n" + "0,0,0,0\n" * 60)
        code = main(
            ["evaluate", "--checkpoint", str(ckpt), "--data", str(other),
             "--mask", str(mask), "--originals", str(root / "originals.csv")]
        )
        assert code == 2
        assert "cat_0" in capsys.readouterr().err


class TestExplainCommand:
    def test_writes_payload(self, data_csv, pipeline, tmp_path):
        _, ckpt = pipeline
        out = tmp_path / "explanation.json"
        code = main(
            ["explain", "--checkpoint", str(ckpt), "--data", str(data_csv),
             "--row", "4", "--out", str(out)]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["row"] == 4
        assert len(doc["neighbors"]) == 5
        assert doc["row_score"] == pytest.approx(
            sum(c["confidence"] for c in doc["cells"]), abs=1e-9
        )

    def test_out_of_range_row_exits_2(self, data_csv, pipeline):
        _, ckpt = pipeline
        code = main(
            ["explain", "--checkpoint", str(ckpt), "--data", str(data_csv), "--row", "99999"]
        )
        assert code == 2


class TestExperimentCommand:
    def test_config_driven_run(self, data_csv, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            f"data={data_csv}\nregimes=pca,dae\nseeds=0\nepochs=5\n"
            "widths=25-16-8-16-25\nfraction=0.1\n"
        )
        out_json = tmp_path / "exp.json"
        code = main(["experiment", "--config", str(cfg), "--out-json", str(out_json)])
        assert code == 0
        doc = json.loads(out_json.read_text())
        assert set(doc["aggregates"]) == {"pca", "dae"}
