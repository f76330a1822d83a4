import json

import numpy as np
import pytest

from strad.cli import main
from strad.config import config_hash, load_config, resolve
from strad.errors import ConfigError
from strad.experiments import read_scores_csv
from strad.series import load_csv, segments_from_labels


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def small_config(outdir, **extra):
    doc = {
        "seed": 5,
        "output_dir": str(outdir),
        "window": {"length": 16, "train_stride": 8},
        "model": {"hidden": [16, 4]},
        "train": {"epochs": 3, "batch_size": 8, "loss": "strad"},
        "threshold": {"mode": "quantile", "q": 0.99},
        "datasets": [
            {
                "name": "demo",
                "source": "synth",
                "synth": {
                    "length": 600,
                    "noise_sigma": 0.05,
                    "train_fraction": 0.5,
                    "channels": [{"shapelet": "sine", "omega": 0.0625}],
                    "anomalies": [
                        {"kind": "seasonal_pattern", "start": 200, "length": 40, "magnitude": 1.5},
                        {"kind": "global_point", "start": 450, "length": 1, "magnitude": 8.0},
                    ],
                },
            }
        ],
    }
    doc.update(extra)
    return doc


class TestConfig:
    def test_defaults_without_file(self):
        cfg = load_config(None)
        assert cfg.seed == 0
        assert cfg.window_length == 64
        assert cfg.train_stride == 32  # defaults to half the window
        assert cfg.loss_weights.lambda1 == 1.5
        assert cfg.loss_weights.lambda2 == 10.0
        assert cfg.loss_weights.epsilon == 1e-7

    def test_unknown_top_level_key(self, tmp_path):
        path = write_config(tmp_path, {"windoww": {}})
        with pytest.raises(ConfigError, match="windoww"):
            load_config(path)

    def test_unknown_nested_key(self, tmp_path):
        path = write_config(tmp_path, {"loss_weights": {"lambda9": 1.0}})
        with pytest.raises(ConfigError, match="loss_weights.lambda9"):
            load_config(path)

    def test_unknown_dataset_key(self, tmp_path):
        doc = {"datasets": [{"name": "x", "source": "synth", "synth": {"lenght": 5}}]}
        path = write_config(tmp_path, doc)
        with pytest.raises(ConfigError, match="lenght"):
            load_config(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))

    def test_overrides(self, tmp_path):
        path = write_config(tmp_path, {"seed": 1})
        cfg = load_config(path, overrides=["seed=9", "window.length=32",
                                           'train.loss="mse"'])
        assert cfg.seed == 9 and cfg.window_length == 32 and cfg.train_loss == "mse"

    def test_hash_ignores_output_dir(self):
        a = resolve({"output_dir": "x"})
        b = resolve({"output_dir": "y"})
        assert config_hash(a) == config_hash(b)
        c = resolve({"seed": 1})
        assert config_hash(a) != config_hash(c)

    def test_anomaly_outside_test_region_rejected(self, tmp_path):
        doc = small_config(tmp_path)
        doc["datasets"][0]["synth"]["anomalies"].append(
            {"kind": "trend_pattern", "start": 590, "length": 20, "magnitude": 0.1})
        path = write_config(tmp_path, doc)
        with pytest.raises(ConfigError, match="trend_pattern.*outside test region"):
            load_config(path)

    def test_bad_threshold_q(self, tmp_path):
        path = write_config(tmp_path, {"threshold": {"q": 1.5}})
        with pytest.raises(ConfigError):
            load_config(path)


class TestCliSynth:
    def test_writes_two_csvs_and_manifest(self, tmp_path):
        out = tmp_path / "out"
        cfgp = write_config(tmp_path, small_config(out))
        assert main(["synth", "-c", cfgp]) == 0
        files = sorted(p.name for p in out.iterdir())
        assert files == ["demo_test.csv", "demo_train.csv", "manifest.json"]

    def test_rerun_byte_identical(self, tmp_path):
        cfgp = write_config(tmp_path, small_config(tmp_path / "a"))
        assert main(["synth", "-c", cfgp]) == 0
        assert main(["synth", "-c", cfgp, "-o", str(tmp_path / "b")]) == 0
        for name in ("demo_train.csv", "demo_test.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_outputs_load_back(self, tmp_path):
        out = tmp_path / "out"
        cfgp = write_config(tmp_path, small_config(out))
        main(["synth", "-c", cfgp])
        train = load_csv(out / "demo_train.csv", ["v0"], "label")
        test = load_csv(out / "demo_test.csv", ["v0"], "label")
        assert train.length == 300 and np.all(train.labels == 0)
        assert test.length == 600 and test.labels.sum() == 41

    def test_out_of_region_spec_is_usage_error(self, tmp_path):
        doc = small_config(tmp_path / "out")
        doc["datasets"][0]["synth"]["anomalies"][0]["start"] = 599
        cfgp = write_config(tmp_path, doc)
        assert main(["synth", "-c", cfgp]) == 1


class TestCliTrain:
    def test_history_rows_equal_epochs(self, tmp_path):
        out = tmp_path / "out"
        cfgp = write_config(tmp_path, small_config(out))
        assert main(["train", "-c", cfgp]) == 0
        lines = [l for l in (out / "demo_history.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        assert lines[0] == "epoch,total,trend,seasonality,shape"
        assert len(lines) - 1 == 3

    def test_mse_history_single_column(self, tmp_path):
        out = tmp_path / "out"
        cfgp = write_config(tmp_path, small_config(out))
        assert main(["train", "-c", cfgp, "--set", 'train.loss="mse"']) == 0
        lines = (out / "demo_history.csv").read_text().splitlines()
        assert "epoch,total" in lines[1]
        assert "trend" not in lines[1]

    def test_checkpoint_reproducible(self, tmp_path):
        cfgp = write_config(tmp_path, small_config(tmp_path / "a"))
        assert main(["train", "-c", cfgp]) == 0
        assert main(["train", "-c", cfgp, "-o", str(tmp_path / "b")]) == 0
        assert ((tmp_path / "a" / "demo_model.ckpt").read_bytes()
                == (tmp_path / "b" / "demo_model.ckpt").read_bytes())


class TestCliDetect:
    def run_train_detect(self, tmp_path, outname="out", **extra):
        out = tmp_path / outname
        cfgp = write_config(tmp_path, small_config(out, **extra), name=f"{outname}.json")
        assert main(["train", "-c", cfgp]) == 0
        assert main(["detect", "-c", cfgp, "--checkpoint", str(out / "demo_model.ckpt")]) == 0
        return out

    def test_score_rows_equal_series_length(self, tmp_path):
        out = self.run_train_detect(tmp_path)
        scores = read_scores_csv(out / "demo_scores.csv")
        assert scores.shape == (600,)

    def test_segments_rederivable_from_scores_and_threshold(self, tmp_path):
        out = self.run_train_detect(tmp_path)
        summary = json.loads((out / "demo_detect.json").read_text())
        scores = read_scores_csv(out / "demo_scores.csv")
        preds = (scores >= summary["threshold"]).astype(int)
        expected = [(s.start, s.end) for s in segments_from_labels(preds)]
        lines = [l for l in (out / "demo_segments.csv").read_text().splitlines()
                 if l and not l.startswith("#")][1:]
        got = [tuple(int(v) for v in l.split(",")) for l in lines]
        assert got == expected

    def test_quantile_mode_ignores_test_labels(self, tmp_path):
        # same data except test labels shuffled: identical scores and threshold
        out_a = self.run_train_detect(tmp_path, "a")
        doc = small_config(tmp_path / "b")
        # move the labeled ranges: quantile thresholding must not care
        doc["datasets"][0]["synth"]["anomalies"][0]["start"] = 210
        cfgp = write_config(tmp_path, doc, name="b.json")
        main(["train", "-c", cfgp])
        main(["detect", "-c", cfgp, "--checkpoint", str(tmp_path / "b" / "demo_model.ckpt")])
        sum_a = json.loads((tmp_path / "a" / "demo_detect.json").read_text())
        sum_b = json.loads((tmp_path / "b" / "demo_detect.json").read_text())
        assert sum_a["threshold"] == sum_b["threshold"]

    def test_incompatible_checkpoint(self, tmp_path):
        out = self.run_train_detect(tmp_path)
        cfgp = write_config(tmp_path, small_config(out, window={"length": 32}), name="w.json")
        code = main(["detect", "-c", cfgp, "--checkpoint", str(out / "demo_model.ckpt")])
        assert code == 2


class TestCliEval:
    def write_pair(self, tmp_path, name, labels, scores):
        data = tmp_path / f"{name}.csv"
        lines = ["v0,label"] + [f"0.0,{l}" for l in labels]
        data.write_text("\n".join(lines) + "\n")
        sc = tmp_path / f"{name}_scores.csv"
        sc.write_text("index,score\n" + "\n".join(f"{i},{s}" for i, s in enumerate(scores)) + "\n")
        return sc, data

    def test_single_dataset_entire_equals_own(self, tmp_path):
        labels = [0, 1, 1, 0, 0, 1, 0]
        scores = [0, 5, 0, 0, 0, 5, 0]
        sc, data = self.write_pair(tmp_path, "solo", labels, scores)
        out = tmp_path / "rep"
        assert main(["eval", "--scores", str(sc), "--data", str(data),
                     "--metric", "rpa", "-o", str(out)]) == 0
        lines = [l for l in (out / "report.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        rows = [dict(zip(lines[0].split(","), l.split(","))) for l in lines[1:]]
        assert rows[0]["rpa_f1"] == rows[1]["rpa_f1"]
        assert rows[1]["name"] == "ENTIRE"

    def test_weighted_entire_example(self, tmp_path):
        # pair A: 2 segments, PA F1 = 0.5 at threshold 3; pair B: 3 segments, PA F1 = 1.0
        labels_a = [1, 1, 0, 0, 1, 1, 1, 0]
        scores_a = [5, 0, 0, 0, 0, 0, 0, 5]
        labels_b = [1, 0, 1, 0, 1, 0]
        scores_b = [9, 0, 9, 0, 9, 0]
        sa, da = self.write_pair(tmp_path, "a", labels_a, scores_a)
        sb, db = self.write_pair(tmp_path, "b", labels_b, scores_b)
        out = tmp_path / "rep"
        assert main(["eval", "--scores", str(sa), "--data", str(da),
                     "--scores", str(sb), "--data", str(db),
                     "--metric", "pa", "--threshold", "3.0", "-o", str(out)]) == 0
        lines = [l for l in (out / "report.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        header = lines[0].split(",")
        rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
        assert float(rows[0]["pa_f1"]) == pytest.approx(0.5)
        assert float(rows[1]["pa_f1"]) == pytest.approx(1.0)
        entire = rows[2]
        assert entire["name"] == "ENTIRE"
        # Eq-style weighting: (2/5)*0.5 + (3/5)*1.0
        assert float(entire["pa_f1"]) == pytest.approx(0.8)

    def test_both_metrics_emitted(self, tmp_path):
        sc, data = self.write_pair(tmp_path, "m", [0, 1, 0], [0, 7, 0])
        out = tmp_path / "rep"
        assert main(["eval", "--scores", str(sc), "--data", str(data), "-o", str(out)]) == 0
        header = [l for l in (out / "report.csv").read_text().splitlines()
                  if l and not l.startswith("#")][0]
        assert "rpa_f1" in header and "pa_f1" in header

    def test_misaligned_inputs(self, tmp_path):
        sc, _ = self.write_pair(tmp_path, "x", [0, 1, 0], [0, 7, 0])
        _, data = self.write_pair(tmp_path, "y", [0, 1], [0, 7])
        assert main(["eval", "--scores", str(sc), "--data", str(data)]) == 2


class TestCliCompare:
    def test_mse_vs_mse_zero_improvement(self, tmp_path):
        out = tmp_path / "out"
        doc = small_config(out, compare={"losses": ["mse", "mse"]})
        cfgp = write_config(tmp_path, doc)
        assert main(["compare", "-c", cfgp]) == 0
        lines = [l for l in (out / "improvement.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        header = lines[0].split(",")
        rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
        second = [r for r in rows if r["arm"] == "mse#2"]
        assert second
        for row in second:
            assert float(row["avg_improved"]) == 0.0
            assert float(row["air"]) == 0.0

    def test_table_row_count(self, tmp_path):
        out = tmp_path / "out"
        doc = small_config(out, compare={"losses": ["mse", "strad", "mse_plus_strad"]})
        cfgp = write_config(tmp_path, doc)
        assert main(["compare", "-c", cfgp]) == 0
        lines = [l for l in (out / "comparison.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        assert len(lines) - 1 == 3 * 1  # losses x datasets

    def test_air_recomputable_from_f1_columns(self, tmp_path):
        from strad.metrics import air, avg_improved

        out = tmp_path / "out"
        doc = small_config(out, compare={"losses": ["mse", "strad"]})
        cfgp = write_config(tmp_path, doc)
        assert main(["compare", "-c", cfgp]) == 0
        comp = [l for l in (out / "comparison.csv").read_text().splitlines()
                if l and not l.startswith("#")]
        header = comp[0].split(",")
        rows = [dict(zip(header, l.split(","))) for l in comp[1:]]
        by_arm = {}
        for row in rows:
            by_arm.setdefault(row["arm"], []).append(float(row["rpa_f1"]))
        imp = [l for l in (out / "improvement.csv").read_text().splitlines()
               if l and not l.startswith("#")]
        iheader = imp[0].split(",")
        irows = [dict(zip(iheader, l.split(","))) for l in imp[1:]]
        strad_rpa = next(r for r in irows if r["arm"] == "strad" and r["metric"] == "rpa")
        assert float(strad_rpa["air"]) == air(by_arm["strad"], by_arm["mse"])
        assert float(strad_rpa["avg_improved"]) == avg_improved(by_arm["strad"], by_arm["mse"])

    def test_mse_required(self, tmp_path):
        doc = small_config(tmp_path / "out", compare={"losses": ["strad", "mse_plus_strad"]})
        cfgp = write_config(tmp_path, doc)
        assert main(["compare", "-c", cfgp]) == 1


class TestCliAblate:
    def test_exactly_seven_rows(self, tmp_path):
        out = tmp_path / "out"
        cfgp = write_config(tmp_path, small_config(out))
        assert main(["ablate", "-c", cfgp]) == 0
        lines = [l for l in (out / "ablation.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        assert len(lines) - 1 == 7

    def test_shape_only_row_equals_zeroed_weights_run(self, tmp_path):
        from strad.config import load_config as load
        from strad.experiments import run_arm
        from strad.losses import LossWeights

        out = tmp_path / "out"
        cfgp = write_config(tmp_path, small_config(out))
        assert main(["ablate", "-c", cfgp]) == 0
        lines = [l for l in (out / "ablation.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        header = lines[0].split(",")
        rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
        shape_only = next(r for r in rows
                          if (r["trend"], r["seasonality"], r["shape"]) == ("0", "0", "1"))
        cfg = load(cfgp)
        manual = run_arm(cfg, 0, "strad",
                         weights=LossWeights(lambda1=0.0, lambda2=0.0, lambda3=1.0,
                                             epsilon=1e-7, trend_variant="monotone"))
        assert float(shape_only["entire_rpa_f1"]) == manual.f1["rpa"]
        assert float(shape_only["entire_pa_f1"]) == manual.f1["pa"]


class TestMultichannel:
    def test_two_channel_pipeline(self, tmp_path):
        out = tmp_path / "out"
        doc = small_config(out)
        doc["datasets"][0]["synth"]["channels"] = [
            {"shapelet": "sine", "omega": 0.0625},
            {"shapelet": "sawtooth", "omega": 0.03125, "amplitude": 0.7},
        ]
        doc["datasets"][0]["synth"]["anomalies"] = [
            {"kind": "seasonal_pattern", "start": 200, "length": 40,
             "magnitude": 1.5, "channel": 1},
        ]
        cfgp = write_config(tmp_path, doc)
        assert main(["synth", "-c", cfgp]) == 0
        header = [l for l in (out / "demo_test.csv").read_text().splitlines()
                  if not l.startswith("#")][0]
        assert header == "v0,v1,label"
        assert main(["train", "-c", cfgp]) == 0
        assert main(["detect", "-c", cfgp,
                     "--checkpoint", str(out / "demo_model.ckpt")]) == 0
        scores = read_scores_csv(out / "demo_scores.csv")
        assert scores.shape == (600,)
        assert main(["eval", "--scores", str(out / "demo_scores.csv"),
                     "--data", str(out / "demo_test.csv"), "-o", str(out)]) == 0


class TestCsvDatasetSource:
    def test_csv_round_trip_pipeline(self, tmp_path):
        # export a synthetic benchmark, then run the whole pipeline from CSVs
        synth_out = tmp_path / "data"
        cfgp = write_config(tmp_path, small_config(synth_out))
        assert main(["synth", "-c", cfgp]) == 0

        doc = small_config(tmp_path / "run")
        doc["datasets"] = [{
            "name": "fromcsv",
            "source": "csv",
            "csv": {
                "train_path": str(synth_out / "demo_train.csv"),
                "test_path": str(synth_out / "demo_test.csv"),
                "value_columns": ["v0"],
                "label_column": "label",
            },
        }]
        csv_cfg = write_config(tmp_path, doc, name="csv_cfg.json")
        assert main(["train", "-c", csv_cfg]) == 0
        assert main(["detect", "-c", csv_cfg,
                     "--checkpoint", str(tmp_path / "run" / "fromcsv_model.ckpt")]) == 0
        scores = read_scores_csv(tmp_path / "run" / "fromcsv_scores.csv")
        assert scores.shape == (600,)

    def test_csv_and_synth_sources_agree(self, tmp_path):
        # the exported CSVs must reproduce the in-memory benchmark exactly
        from strad.config import load_config
        from strad.experiments import materialize_dataset

        synth_out = tmp_path / "data"
        cfgp = write_config(tmp_path, small_config(synth_out))
        assert main(["synth", "-c", cfgp]) == 0
        cfg = load_config(cfgp)
        train_mem, test_mem = materialize_dataset(cfg, 0)
        train_csv = load_csv(synth_out / "demo_train.csv", ["v0"], "label")
        test_csv = load_csv(synth_out / "demo_test.csv", ["v0"], "label")
        assert np.array_equal(train_mem.values, train_csv.values)
        assert np.array_equal(test_mem.values, test_csv.values)
        assert np.array_equal(test_mem.labels, test_csv.labels)


class TestCliGradcheck:
    def test_pass_exit_zero(self, tmp_path):
        report = tmp_path / "grad.txt"
        assert main(["gradcheck", "--windows", "6", "--models", "1",
                     "-o", str(report)]) == 0
        text = report.read_text()
        assert "combined" in text and "max rel err" in text

    def test_perturb_fails_naming_component(self, tmp_path, capsys):
        code = main(["gradcheck", "--windows", "4", "--models", "1",
                     "--perturb", "shape"])
        assert code == 3
        captured = capsys.readouterr()
        assert "shape" in captured.err


class TestExitCodes:
    def test_missing_config_file(self):
        assert main(["train", "-c", "/nonexistent/cfg.json"]) == 1

    def test_unknown_key_is_usage_error(self, tmp_path):
        cfgp = write_config(tmp_path, {"bogus": 1})
        assert main(["train", "-c", cfgp]) == 1
