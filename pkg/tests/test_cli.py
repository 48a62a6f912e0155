import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from opensetal.cli import load_config, main
from opensetal.errors import ConfigError

pytestmark = pytest.mark.usefixtures("synth_dir")


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """Small synthetic dataset generated through the CLI itself."""
    out = tmp_path_factory.mktemp("data")
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "synth", "--out", str(out),
            "--k-id", "3", "--k-ood", "3", "--dim", "8",
            "--per-class", "40", "--per-class-test", "10", "--seed", "4",
        ],
    )
    assert result.exit_code == 0, result.output
    return out


def config_doc(**overrides):
    doc = {
        "pool_spec": {
            "mismatch_ratio": 0.5,
            "ood_ratio": 0.4,
            "seed": 1,
            "use_manifest_id_classes": True,
        },
        "budget": 6,
        "rounds": 2,
        "strategy": "clipnal",
        "probe": {"steps": 100},
        "tau_grid": {"min": 0.01, "max": 1.0, "steps": 15},
        "seed": 1,
        "paths": {
            "embeddings": "train.emb1",
            "manifest": "train_manifest.json",
            "prompts": "prompts.emb1",
            "test_embeddings": "test.emb1",
            "test_manifest": "test_manifest.json",
        },
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def config_file(synth_dir):
    path = synth_dir / "config.json"
    path.write_text(json.dumps(config_doc()))
    return path


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


class TestConfigLoading:
    def test_valid(self, config_file):
        config, base = load_config(config_file)
        assert config.strategy == "clipnal"
        assert config.tau_grid == (0.01, 1.0, 15)
        assert base == config_file.parent

    def test_unknown_key_rejected(self, synth_dir):
        path = synth_dir / "bad1.json"
        path.write_text(json.dumps(config_doc(bogus_key=1)))
        with pytest.raises(ConfigError, match="bogus_key"):
            load_config(path)

    def test_unknown_nested_key_rejected(self, synth_dir):
        doc = config_doc()
        doc["pool_spec"]["extra"] = 1
        path = synth_dir / "bad2.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="pool_spec.extra"):
            load_config(path)

    def test_missing_key_named(self, synth_dir):
        doc = config_doc()
        del doc["budget"]
        path = synth_dir / "bad3.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="budget"):
            load_config(path)


class TestRunCommand:
    def test_success_writes_outputs(self, config_file, tmp_path):
        out = tmp_path / "run_out"
        result = invoke("run", "--config", config_file, "--out", out)
        assert result.exit_code == 0, result.output
        assert (out / "rounds.csv").exists()
        assert (out / "summary.json").exists()

    def test_bogus_strategy_exit_1(self, synth_dir, tmp_path):
        path = synth_dir / "bogus_strategy.json"
        path.write_text(json.dumps(config_doc(strategy="bogus")))
        result = invoke("run", "--config", path, "--out", tmp_path / "x")
        assert result.exit_code == 1
        assert "strategy" in result.output

    def test_missing_data_exit_2(self, synth_dir, tmp_path):
        doc = config_doc()
        doc["paths"]["embeddings"] = "nope.emb1"
        path = synth_dir / "missing_data.json"
        path.write_text(json.dumps(doc))
        result = invoke("run", "--config", path, "--out", tmp_path / "x")
        assert result.exit_code == 2

    def test_seed_override_echoed(self, config_file, tmp_path):
        out = tmp_path / "seeded"
        result = invoke("run", "--config", config_file, "--out", out, "--seed", "7")
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "summary.json").read_text())
        assert doc["config"]["seed"] == 7


class TestSweepCommand:
    def test_sweep_layout_and_aggregate(self, config_file, tmp_path):
        out = tmp_path / "sweep_out"
        result = invoke(
            "sweep", "--config", config_file, "--out", out, "--seeds", "0,1,2"
        )
        assert result.exit_code == 0, result.output
        for s in (0, 1, 2):
            assert (out / f"seed_{s}" / "rounds.csv").exists()
            assert (out / f"seed_{s}" / "summary.json").exists()

        # aggregate means must equal a recompute from the per-seed files
        per_seed = []
        for s in (0, 1, 2):
            with open(out / f"seed_{s}" / "rounds.csv", newline="") as f:
                per_seed.append(list(csv.DictReader(f)))
        with open(out / "aggregate.csv", newline="") as f:
            agg = list(csv.DictReader(f))
        assert len(agg) == len(per_seed[0])
        for rnd, row in enumerate(agg):
            precisions = [float(rows[rnd]["precision"]) for rows in per_seed]
            accs = [float(rows[rnd]["test_accuracy"]) for rows in per_seed]
            # per-seed CSVs carry 9 significant digits; compare at that precision
            assert float(row["precision_mean"]) == pytest.approx(np.mean(precisions), rel=1e-7)
            assert float(row["accuracy_mean"]) == pytest.approx(np.mean(accs), rel=1e-7)

    def test_single_seed_zero_std(self, config_file, tmp_path):
        out = tmp_path / "single"
        result = invoke("sweep", "--config", config_file, "--out", out, "--seeds", "3")
        assert result.exit_code == 0, result.output
        with open(out / "aggregate.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert all(float(r["precision_std"]) == 0.0 for r in rows)

    def test_empty_seed_list_exit_1(self, config_file, tmp_path):
        result = invoke("sweep", "--config", config_file, "--out", tmp_path / "x", "--seeds", ",")
        assert result.exit_code == 1


class TestOtherCommands:
    def test_pool_command(self, config_file, tmp_path):
        out = tmp_path / "pool_out"
        result = invoke("pool", "--config", config_file, "--out", out)
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "pool.json").read_text())
        assert doc["pool_size"] == doc["n_id"] + doc["n_ood"]
        assert abs(doc["ood_fraction"] - 0.4) < 0.01

    def test_tune_temp_command(self, config_file, tmp_path):
        out = tmp_path / "tau_out"
        result = invoke("tune-temp", "--config", config_file, "--out", out)
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "tau.json").read_text())
        assert doc["tau"] > 0

    def test_score_command(self, config_file, tmp_path):
        out = tmp_path / "score_out"
        result = invoke("score", "--config", config_file, "--out", out)
        assert result.exit_code == 0, result.output
        with open(out / "scores.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert rows
        assert set(rows[0]) == {"index", "p_ood", "max_p_id", "indicator"}
        for row in rows[:20]:
            assert 0.0 <= float(row["p_ood"]) <= 1.0
            assert row["indicator"] in {"0", "1"}

    def test_report_on_run_dir(self, config_file, tmp_path):
        out = tmp_path / "rep"
        assert invoke("run", "--config", config_file, "--out", out).exit_code == 0
        result = invoke("report", "--out", out)
        assert result.exit_code == 0
        assert "aubc=" in result.output

    def test_report_missing_dir_exit_2(self, tmp_path):
        result = invoke("report", "--out", tmp_path / "nothing")
        assert result.exit_code == 2
