import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from graphssl import ConfigError, load_csv
from graphssl.cli import main, read_predictions
from graphssl.experiment import ALGORITHMS, ExperimentConfig, accuracy, run_experiment

ALL = sorted(ALGORITHMS)

# one label per class leaves MKNN's default k=3 vote with two voters
pytestmark = pytest.mark.filterwarnings("ignore:k=3 exceeds")


def write_cfg(tmp_path, **over):
    doc = {"dataset": {"generator": "two-moons", "n": 200, "noise": 0.05, "labels_per_class": 1},
           "graph": {"k": 10, "sigma": "auto"}, "algorithms": ALL, "seed": 0}
    doc.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


class TestAccuracy:
    def test_basic(self):
        assert accuracy([0, 1, 1], [0, 1, 1]) == 1.0
        assert accuracy([1, 0], [0, 1]) == 0.0
        assert accuracy([0, 1, 0, 1], [0, 1, 1, 0]) == 0.5

    def test_mask(self):
        assert accuracy([0, 1, 1], [1, 1, 1], [False, True, True]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([0, 1], [0])


class TestConfig:
    @pytest.mark.parametrize("doc", [
        {},
        {"dataset": {"generator": "spiral"}},
        {"dataset": {"generator": "two-moons"}, "algorithms": ["nope"]},
        {"dataset": {"generator": "two-moons"}, "seed": -1},
        {"dataset": {"generator": "two-moons"}, "graph": {"k": 0}},
        {"dataset": {"generator": "two-moons"}, "graph": {"sigma": "median"}},
        {"dataset": {"generator": "two-moons"}, "extra": 1},
    ])
    def test_rejects(self, doc):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(doc)

    def test_csv_path_relative_to_config(self, tmp_path):
        (tmp_path / "sub").mkdir()
        cfg_path = tmp_path / "sub" / "c.json"
        cfg_path.write_text(json.dumps({"dataset": {"csv": "d.csv"}}))
        assert ExperimentConfig.load(cfg_path).dataset["csv"] == str(tmp_path / "sub" / "d.csv")


class TestRunExperiment:
    def test_zero_algorithms(self):
        rep = run_experiment(ExperimentConfig.from_dict({"dataset": {"generator": "two-moons"}}))
        assert rep.algorithms == [] and not rep.failed

    def test_full_run(self):
        cfg = ExperimentConfig.from_dict({"dataset": {"generator": "two-moons"}, "algorithms": ALL})
        rep = run_experiment(cfg)
        assert not rep.failed
        by_name = {a["name"]: a for a in rep.algorithms}
        assert set(by_name) == set(ALL)
        for name in ("lgc", "gfhf", "flap", "mknn", "deformed", "tllt"):
            assert by_name[name]["accuracy"] >= 0.9
        assert sum(a["wall_ms"] for a in rep.algorithms) < 60_000

    def test_deterministic_modulo_timing(self):
        cfg = ExperimentConfig.from_dict({"dataset": {"generator": "blobs", "n": 120}, "algorithms": ALL, "seed": 4})
        assert run_experiment(cfg).to_json(timings=False) == run_experiment(cfg).to_json(timings=False)

    def test_failure_is_recorded_and_run_continues(self):
        cfg = ExperimentConfig.from_dict({"dataset": {"generator": "two-moons"},
                                          "algorithms": [{"name": "fast_lgc", "sigma": 1e-3}, "lgc"]})
        rep = run_experiment(cfg)
        assert rep.failed
        assert rep.algorithms[0]["error"] and rep.algorithms[0]["accuracy"] is None
        assert rep.algorithms[1]["error"] is None and rep.algorithms[1]["accuracy"] > 0.9

    def test_labeled_samples_not_scored(self):
        cfg = ExperimentConfig.from_dict({"dataset": {"generator": "two-moons", "n": 20, "labels_per_class": 9},
                                          "graph": {"k": 3}, "algorithms": ["gfhf"]})
        rep = run_experiment(cfg)
        acc = rep.algorithms[0]["accuracy"]
        # only two unlabeled samples remain, so accuracy is a multiple of 1/2
        assert acc in (0.0, 0.5, 1.0)

    def test_labels_with_custom_names(self):
        cfg = ExperimentConfig.from_dict({"dataset": {"generator": "two-moons"},
                                          "algorithms": [{"name": "lgc", "label": "lgc_a09", "alpha": 0.9},
                                                         {"name": "lgc", "label": "lgc_a099"}]})
        assert [a["name"] for a in run_experiment(cfg).algorithms] == ["lgc_a09", "lgc_a099"]


class TestCli:
    def test_gen_and_run_from_csv(self, tmp_path):
        csv_path = tmp_path / "moons.csv"
        assert main(["gen", "two-moons", "--n", "100", "--seed", "2", "-o", str(csv_path)]) == 0
        d = load_csv(csv_path)
        assert d.n == 100 and d.labeled_mask.sum() == 2
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"dataset": {"csv": "moons.csv"}, "algorithms": ["lgc", "gfhf"]}))
        report = tmp_path / "r.json"
        assert main(["run", "--config", str(cfg), "-o", str(report)]) == 0
        doc = json.loads(report.read_text())
        assert [a["name"] for a in doc["algorithms"]] == ["lgc", "gfhf"]
        assert set(doc["environment"]) >= {"python", "numpy", "scipy", "kernel_backend"}

    def test_gen_blobs(self, tmp_path):
        out = tmp_path / "b.csv"
        assert main(["gen", "blobs", "--n", "30", "--centers", "0,0;4,4;8,0", "--stddev", "0.5", "-o", str(out)]) == 0
        assert load_csv(out).num_classes == 3

    def test_run_writes_report_predictions_and_history(self, tmp_path):
        cfg = write_cfg(tmp_path, algorithms=["lgc", "tllt"])
        rep, preds, hist = tmp_path / "r.json", tmp_path / "p.csv", tmp_path / "h.jsonl"
        code = main(["run", "--config", str(cfg), "-o", str(rep), "--predictions", str(preds), "--history", str(hist)])
        assert code == 0
        rows = list(csv.DictReader(preds.open()))
        assert len(rows) == 400 and set(rows[0]) == {"x", "y", "true", "predicted", "algorithm"}
        lines = hist.read_text().splitlines()
        assert lines and all(json.loads(l)["s_t"] >= 1 for l in lines)

    def test_report_to_stdout(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, algorithms=["gfhf"])
        assert main(["run", "--config", str(cfg)]) == 0
        assert json.loads(capsys.readouterr().out)["algorithms"][0]["name"] == "gfhf"

    def test_reports_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["run", "--config", str(cfg), "-o", str(a)])
        main(["run", "--config", str(cfg), "-o", str(b)])
        strip = lambda p: json.dumps(  # noqa: E731
            {**json.loads(p.read_text()),
             "algorithms": [{k: v for k, v in x.items() if k != "wall_ms"} for x in json.loads(p.read_text())["algorithms"]]},
            sort_keys=True)
        assert strip(a) == strip(b)

    def test_exit_codes(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--config", str(bad)]) == 1
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
        cfg = write_cfg(tmp_path, algorithms=[{"name": "fast_lgc", "sigma": 1e-3}])
        assert main(["run", "--config", str(cfg), "-o", str(tmp_path / "r.json")]) == 2
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_plot_outputs(self, tmp_path):
        cfg = write_cfg(tmp_path, algorithms=["lgc", "gfhf"])
        preds = tmp_path / "p.csv"
        main(["run", "--config", str(cfg), "-o", str(tmp_path / "r.json"), "--predictions", str(preds)])
        svg, dat = tmp_path / "s.svg", tmp_path / "s.dat"
        assert main(["plot", "--predictions", str(preds), "-o", str(svg)]) == 0
        assert svg.read_text().lstrip().startswith("<?xml")
        assert main(["plot", "--predictions", str(preds), "-o", str(dat), "--algorithm", "gfhf"]) == 0
        text = dat.read_text()
        assert "# index 0: gfhf" in text and "lgc" not in text
        assert len(read_predictions(preds)["lgc"]) == 200

    def test_plot_errors(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("a,b\n1,2\n")
        assert main(["plot", "--predictions", str(p), "-o", str(tmp_path / "o.svg")]) == 1
        assert main(["plot", "--predictions", str(tmp_path / "none.csv"), "-o", str(tmp_path / "o.svg")]) == 1

    def test_module_entry_point_with_thread_cap(self, tmp_path):
        out = tmp_path / "m.csv"
        proc = subprocess.run([sys.executable, "-m", "graphssl", "gen", "two-moons", "--n", "20", "-o", str(out)],
                              env={**os.environ, "SSL_THREADS": "1"}, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert np.isfinite(load_csv(out).features).all()
