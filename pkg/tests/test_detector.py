"""Training loop, scoring, model round-trips, and the ablation sweep."""

import json

import numpy as np
import pytest

from dbdiag import (
    ScoreSeries,
    TrainConfig,
    load_model,
    make_windows,
    model_digest,
    run_ablation,
    save_model,
    train,
)
from dbdiag.errors import ConfigError, DataError, ModelIOError


FAST = dict(architecture="BTN-(16)-(6)-(16*)-BTN*", max_epochs=6, patience=6,
            batch_size=128)


class TestTrainConfig:
    @pytest.mark.parametrize("kw", [
        {"batch_size": 0},
        {"max_epochs": 0},
        {"patience": 0},
        {"learning_rate": 0.0},
        {"l2_lambda": -0.1},
    ])
    def test_bad_knobs_rejected(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw)


class TestTrain:
    def test_history_and_bookkeeping(self, tiny_run):
        r = tiny_run.result
        assert r.epochs_run == len(r.history)
        assert 1 <= r.best_epoch <= r.epochs_run
        first = r.history[0]
        assert set(first) == {"epoch", "train_objective", "train_mse", "val_mse"}
        assert all(np.isfinite(list(row.values())).all() for row in r.history)

    def test_learning_actually_happens(self, tiny_run):
        hist = tiny_run.result.history
        assert hist[-1]["train_mse"] < hist[0]["train_mse"]

    def test_reported_mse_is_the_mean_of_the_score_matrix(self, tiny_run):
        r = tiny_run.result
        assert r.test_mse == pytest.approx(float(r.test_scores.scores.mean()),
                                           abs=1e-15)

    def test_same_seed_reproduces_training(self, tiny_run):
        frame = tiny_run.scenario.stats
        cfg = TrainConfig(seed=5, **FAST)
        a = train(frame, cfg)
        b = train(frame, cfg)
        np.testing.assert_array_equal(a.test_scores.scores, b.test_scores.scores)
        assert a.test_mse == b.test_mse

    def test_different_seeds_differ(self, tiny_run):
        frame = tiny_run.scenario.stats
        a = train(frame, TrainConfig(seed=1, **FAST))
        b = train(frame, TrainConfig(seed=2, **FAST))
        assert a.test_mse != b.test_mse

    def test_impossible_split_rejected(self, tiny_run):
        with pytest.raises(ConfigError):
            train(tiny_run.scenario.stats,
                  TrainConfig(split=(0.9998, 0.0001, 0.0001), **FAST))


class TestScoring:
    def test_scores_are_per_window_time_means(self, tiny_run):
        det = tiny_run.result.detector
        frame = tiny_run.scenario.stats
        scores = det.score_frame(frame)
        # recompute one entry by hand through the public pieces
        windows = make_windows(frame, det.window_steps)
        i = 17
        x = det.norm.apply(windows.windows[i])[None]
        pred = det.network.forward(x, training=False)
        expect = ((pred[0] - x[0]) ** 2).mean(axis=0)
        np.testing.assert_allclose(scores.scores[i], expect, atol=1e-12)

    def test_window_starts_track_timestamps(self, tiny_run):
        det = tiny_run.result.detector
        scores = det.score_frame(tiny_run.scenario.stats, stride=7)
        assert scores.window_starts[0] == tiny_run.scenario.stats.timestamps[0]
        assert np.all(np.diff(scores.window_starts) == 7)

    def test_feature_name_mismatch_lists_both_sides(self, tiny_run):
        det = tiny_run.result.detector
        frame = tiny_run.scenario.stats
        renamed = type(frame)(tuple(n.upper() for n in frame.metric_names),
                              frame.timestamps, frame.values)
        with pytest.raises(DataError, match="CPU_USED"):
            det.score_frame(renamed)

    def test_wrong_window_length_rejected(self, tiny_run):
        det = tiny_run.result.detector
        windows = make_windows(tiny_run.scenario.stats, det.window_steps + 5)
        with pytest.raises(DataError):
            det.score_windows(windows)

    def test_score_series_json_roundtrip(self, tiny_run, tmp_path):
        scores = tiny_run.result.test_scores
        path = str(tmp_path / "scores.json")
        scores.write_json(path)
        back = ScoreSeries.read_json(path)
        np.testing.assert_array_equal(back.scores, scores.scores)
        np.testing.assert_array_equal(back.window_starts, scores.window_starts)
        assert back.feature_names == scores.feature_names
        assert back.window_steps == scores.window_steps


class TestModelIO:
    def test_roundtrip_scores_identically(self, tiny_run, tmp_path):
        det = tiny_run.result.detector
        path = str(tmp_path / "model.json")
        save_model(det, path)
        loaded = load_model(path)
        frame = tiny_run.scenario.stats
        np.testing.assert_array_equal(loaded.score_frame(frame).scores,
                                      det.score_frame(frame).scores)
        assert loaded.architecture == det.architecture

    def test_digest_is_stable(self, tiny_run, tmp_path):
        path = str(tmp_path / "model.json")
        save_model(tiny_run.result.detector, path)
        assert model_digest(path) == model_digest(path)

    def test_corrupted_payload_rejected(self, tiny_run, tmp_path):
        path = tmp_path / "model.json"
        save_model(tiny_run.result.detector, str(path))
        doc = json.loads(path.read_text())
        doc["window_steps"] = 9999
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelIOError, match="integrity"):
            load_model(str(path))

    def test_wrong_format_marker_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(ModelIOError):
            load_model(str(path))

    def test_unparseable_file_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(ModelIOError):
            load_model(str(path))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ModelIOError):
            load_model(str(tmp_path / "absent.json"))


class TestAblation:
    def test_sweep_reports_per_architecture(self, tiny_run):
        frame = tiny_run.scenario.stats
        rows = run_ablation(frame,
                            architectures=("(16)-(6)-(16*)", "not-a-grammar"),
                            config=TrainConfig(**FAST))
        assert rows[0]["architecture"] == "(16)-(6)-(16*)"
        assert np.isfinite(rows[0]["test_mse"])
        assert "error" in rows[1]
