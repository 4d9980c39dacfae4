import json

import numpy as np
import pytest

from mbfa.cli import main
from mbfa.data import load_dataset
from mbfa.embedding import load_model


@pytest.fixture
def synth_dir(tmp_path):
    """A small synthetic dataset written through the CLI."""
    out = tmp_path / "data"
    rc = main([
        "synth", "--latent-dim", "5", "--classes", "13", "--instances", "6",
        "--unseen", "3", "--view-dims", "12,8,7", "--view-sigmas", "0.1,0,0",
        "--latent-sigma", "0.1", "--seed", "4", "--out", str(out),
    ])
    assert rc == 0
    return out


def manifest_of(synth_dir):
    return str(synth_dir / "manifest.json")


class TestFit:
    def test_model_round_trips(self, synth_dir, tmp_path):
        out = tmp_path / "fit"
        rc = main(["fit", "--manifest", manifest_of(synth_dir),
                   "--d", "4", "--out", str(out)])
        assert rc == 0
        model = load_model(out / "model.json")
        assert model.method == "MBFA"
        assert model.d == 4
        assert model.num_views == 3
        log = (out / "fit.log").read_text()
        assert "eigenvalues" in log and "objective" in log
        assert (out / "run-config.json").is_file()

    def test_mcca_whitening_holds(self, synth_dir, tmp_path):
        out = tmp_path / "fit"
        rc = main(["fit", "--manifest", manifest_of(synth_dir),
                   "--method", "MCCA", "--d", "3", "--out", str(out)])
        assert rc == 0
        model = load_model(out / "model.json")
        assert model.method == "MCCA"
        ds = load_dataset(manifest_of(synth_dir))
        idx = np.flatnonzero(np.isin(ds.labels, ds.seen_classes))
        labels = ds.labels[idx]
        views = [ds.features[:, idx]]
        for t in ds.side_info:
            views.append(t.vectors[labels].T)
        stacked = model.stacked()
        off = 0
        d_mat = np.zeros((stacked.shape[0], stacked.shape[0]))
        for v in views:
            xc = v - v.mean(axis=1, keepdims=True)
            block = xc @ xc.T
            p = block.shape[0]
            block += 1e-6 * np.trace(block) / p * np.eye(p)
            d_mat[off:off + p, off:off + p] = block
            off += p
        np.testing.assert_allclose(
            stacked.T @ d_mat @ stacked, np.eye(3), atol=1e-6
        )

    def test_d_out_of_range_fails(self, synth_dir, tmp_path, capsys):
        rc = main(["fit", "--manifest", manifest_of(synth_dir),
                   "--d", "999", "--out", str(tmp_path / "fit")])
        assert rc != 0
        assert "error:" in capsys.readouterr().err

    def test_missing_manifest_fails(self, tmp_path, capsys):
        rc = main(["fit", "--manifest", str(tmp_path / "none.json"),
                   "--out", str(tmp_path / "fit")])
        assert rc != 0
        assert "error:" in capsys.readouterr().err


class TestEvaluate:
    def test_noiseless_perfect_accuracy(self, tmp_path):
        data = tmp_path / "clean"
        main(["synth", "--latent-dim", "5", "--classes", "10", "--instances", "5",
              "--unseen", "3", "--view-dims", "12,8,7", "--seed", "1",
              "--out", str(data)])
        fit_out = tmp_path / "fit"
        main(["fit", "--manifest", str(data / "manifest.json"), "--d", "4",
              "--out", str(fit_out)])
        eval_out = tmp_path / "eval"
        rc = main(["evaluate", "--manifest", str(data / "manifest.json"),
                   "--model", str(fit_out / "model.json"),
                   "--weights", "0.5,0.5", "--out", str(eval_out)])
        assert rc == 0
        report = json.loads((eval_out / "report.json").read_text())
        assert report["mean_per_class_top1"] == 1.0
        confusion = (eval_out / "confusion.csv").read_text().splitlines()
        assert len(confusion) == 4  # header + 3 unseen classes

    def test_one_hot_matches_single_type(self, synth_dir, tmp_path):
        """Degenerate fusion: weights (1,0) reproduce type-1-only inference."""
        fit_out = tmp_path / "fit"
        main(["fit", "--manifest", manifest_of(synth_dir), "--d", "4",
              "--out", str(fit_out)])
        out_hot = tmp_path / "hot"
        main(["evaluate", "--manifest", manifest_of(synth_dir),
              "--model", str(fit_out / "model.json"),
              "--weights", "1,0", "--out", str(out_hot)])
        hot = json.loads((out_hot / "report.json").read_text())

        from mbfa.evaluation import evaluate
        from mbfa.pipeline import (
            FusionWeights, PrototypeEmbeddings, embed_prototypes, predict_split,
        )
        ds = load_dataset(manifest_of(synth_dir))
        model = load_model(fit_out / "model.json")
        protos = embed_prototypes(model, ds)
        single = PrototypeEmbeddings(protos.class_ids, (protos.tables[0],))
        preds, truth = predict_split(
            ds, model, single, FusionWeights((1.0,)), ds.unseen_classes
        )
        report = evaluate(preds, truth, ds.unseen_classes)
        assert hot["confusion"] == report.confusion.tolist()
        assert hot["mean_per_class_top1"] == report.mean_per_class_top1

    def test_one_hot_fusion_consistency_same_model(self, synth_dir, tmp_path):
        fit_out = tmp_path / "fit"
        main(["fit", "--manifest", manifest_of(synth_dir), "--d", "4",
              "--out", str(fit_out)])
        a = tmp_path / "a"
        b = tmp_path / "b"
        main(["evaluate", "--manifest", manifest_of(synth_dir),
              "--model", str(fit_out / "model.json"),
              "--weights", "1,0", "--out", str(a)])
        main(["evaluate", "--manifest", manifest_of(synth_dir),
              "--model", str(fit_out / "model.json"),
              "--weights", "1.0,0.0", "--out", str(b)])
        assert (a / "confusion.csv").read_bytes() == (b / "confusion.csv").read_bytes()

    def test_repeats_report_mean_std(self, tmp_path):
        data = tmp_path / "data"
        main(["synth", "--latent-dim", "5", "--classes", "14", "--instances", "6",
              "--unseen", "3", "--view-dims", "12,8,7",
              "--view-sigmas", "0.3,0,0", "--latent-sigma", "0.3",
              "--seed", "7", "--out", str(data)])
        out = tmp_path / "eval"
        rc = main(["evaluate", "--manifest", str(data / "manifest.json"),
                   "--grid-step", "0.5", "--repeats", "3", "--d", "4",
                   "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert "std_over_repeats" in report
        assert "mean_over_repeats" in report
        assert len(report["repeat_accuracies"]) == 3

    def test_weights_and_grid_step_conflict(self, synth_dir, tmp_path, capsys):
        rc = main(["evaluate", "--manifest", manifest_of(synth_dir),
                   "--weights", "0.5,0.5", "--grid-step", "0.1",
                   "--out", str(tmp_path / "x")])
        assert rc != 0
        assert "not both" in capsys.readouterr().err


class TestGridSearch:
    def test_logs_eleven_candidates(self, synth_dir, tmp_path):
        out = tmp_path / "grid"
        rc = main(["grid-search", "--manifest", manifest_of(synth_dir),
                   "--d", "4", "--grid-step", "0.1", "--out", str(out)])
        assert rc == 0
        log = (out / "grid.log").read_text()
        assert "evaluated 11 candidates" in log
        assert log.count("candidate ") == 11
        weights = json.loads((out / "weights.json").read_text())
        assert len(weights["candidates"]) == 11
        assert sum(weights["alphas"]) == pytest.approx(1.0)
        assert (out / "model.json").is_file()


class TestSweepD:
    def test_csv_rows(self, synth_dir, tmp_path):
        out = tmp_path / "sweep"
        rc = main(["sweep-d", "--manifest", manifest_of(synth_dir),
                   "--d-list", "2,3,5", "--weights", "0.5,0.5",
                   "--out", str(out)])
        assert rc == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "d,accuracy"
        assert len(lines) == 4
        assert [int(l.split(",")[0]) for l in lines[1:]] == [2, 3, 5]

    def test_default_d_list(self, tmp_path):
        """Without --d-list the sweep covers the documented 40/50/120 grid."""
        data = tmp_path / "wide"
        main(["synth", "--latent-dim", "6", "--classes", "13", "--instances", "4",
              "--unseen", "3", "--view-dims", "90,30,20", "--seed", "2",
              "--out", str(data)])
        out = tmp_path / "sweep"
        rc = main(["sweep-d", "--manifest", str(data / "manifest.json"),
                   "--weights", "0.5,0.5", "--out", str(out)])
        assert rc == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert [int(l.split(",")[0]) for l in lines[1:]] == [40, 50, 120]

    def test_d_list_out_of_range_fails(self, synth_dir, tmp_path, capsys):
        rc = main(["sweep-d", "--manifest", manifest_of(synth_dir),
                   "--d-list", "999", "--out", str(tmp_path / "sweep")])
        assert rc != 0
        assert "d must be" in capsys.readouterr().err


class TestBench:
    def test_prints_timing_fields(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "bench"
        rc = main(["bench", "--manifest", manifest_of(synth_dir),
                   "--d", "3", "--out", str(out)])
        assert rc == 0
        captured = capsys.readouterr().out
        assert "fit_seconds" in captured
        assert "infer_ms_per_image" in captured
        doc = json.loads((out / "bench.json").read_text())
        assert doc["fit_seconds"] > 0
        assert doc["infer_ms_per_image"] > 0


class TestConfigFile:
    def test_flags_override_config(self, synth_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "manifest": manifest_of(synth_dir), "d": 2, "seed": 0,
        }))
        out = tmp_path / "fit"
        rc = main(["fit", "--config", str(cfg), "--d", "4", "--out", str(out)])
        assert rc == 0
        assert load_model(out / "model.json").d == 4
        echoed = json.loads((out / "run-config.json").read_text())
        assert echoed["d"] == 4

    def test_config_supplies_missing_flags(self, synth_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "manifest": manifest_of(synth_dir), "d": 3,
        }))
        out = tmp_path / "fit"
        rc = main(["fit", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        assert load_model(out / "model.json").d == 3


class TestDeterminism:
    def test_rerun_byte_identical(self, synth_dir, tmp_path):
        args = lambda out: [
            "evaluate", "--manifest", manifest_of(synth_dir),
            "--d", "4", "--grid-step", "0.5", "--seed", "11",
            "--out", str(out),
        ]
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(args(a)) == 0
        assert main(args(b)) == 0
        for name in ("report.json", "confusion.csv"):
            aa = (a / name).read_bytes()
            bb = (b / name).read_bytes()
            assert aa == bb, name
        cfg_a = json.loads((a / "run-config.json").read_text())
        cfg_b = json.loads((b / "run-config.json").read_text())
        cfg_a.pop("out")
        cfg_b.pop("out")
        assert cfg_a == cfg_b

    def test_synth_rerun_byte_identical(self, tmp_path):
        outs = []
        for name in ("d1", "d2"):
            out = tmp_path / name
            main(["synth", "--latent-dim", "4", "--classes", "8",
                  "--instances", "4", "--unseen", "2", "--view-dims", "9,6",
                  "--view-sigmas", "0.2,0", "--latent-sigma", "0.1",
                  "--seed", "3", "--out", str(out)])
            outs.append(out)
        for name in ("features.csv", "labels.txt", "side_side1.csv", "manifest.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
