import json

import numpy as np
import pytest

from seggauge.errors import InputError
from seggauge.events import (
    EVENT_FINISH,
    EVENT_SESSION_START,
    EVENT_STROKE,
    EVENT_UNDO,
    EventRecord,
    InteractionLog,
    LogHeader,
    LogWriter,
    read_log,
    write_log,
)
from seggauge.features import (
    BASE_FEATURE_COUNT,
    LOG_FEATURE_COUNT,
    PCA_COMPONENT_COUNT,
    TOTAL_FEATURE_COUNT,
    PcaModel,
    apply_pca,
    augment_matrix,
    build_features,
    feature_names,
    fit_pca,
    full_feature_names,
    read_feature_csv,
    summarize_task,
    write_feature_csv,
)

HEADER = LogHeader(user_id="u1", kind="semi_manual", task_id="t1", width=11, height=11)


def event(seq, wall, kind, payload=None, ctime=0.0, itime=0.0, metrics=None):
    return EventRecord(
        seq=seq,
        wall_ms=wall,
        kind=kind,
        payload=payload or {},
        computation_ms=ctime,
        interaction_ms=itime,
        metrics=metrics,
    )


def stroke_payload(points, label="foreground"):
    return {"points": [[x, y] for x, y in points], "label": label}


class TestLogSchema:
    def test_write_read_round_trip(self, tmp_path):
        log = InteractionLog(
            header=HEADER,
            events=[
                event(0, 1.0, EVENT_SESSION_START, {"border_seeds": 40, "initial_seeds": []}),
                event(1, 5.0, EVENT_STROKE, stroke_payload([(2, 3)]), ctime=2.0, itime=1.5,
                      metrics={"dice": 0.5}),
                event(2, 9.0, EVENT_FINISH, {}),
            ],
        )
        path = tmp_path / "one.segl"
        write_log(log, path)
        loaded = read_log(path)
        assert loaded.header == HEADER
        assert loaded.events == log.events

    def test_wall_time_must_strictly_increase(self):
        log = InteractionLog(
            header=HEADER,
            events=[event(0, 5.0, EVENT_SESSION_START), event(1, 5.0, EVENT_STROKE)],
        )
        with pytest.raises(InputError):
            log.validate()

    def test_writer_appends_line_per_event(self, tmp_path):
        path = tmp_path / "w.segl"
        writer = LogWriter(HEADER, path)
        writer.append(event(0, 1.0, EVENT_SESSION_START))
        writer.append(event(1, 2.0, EVENT_STROKE, stroke_payload([(1, 1)])))
        writer.close()
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        assert json.loads(lines[0])["schema"] == "segl/1"


class TestSummarizeTask:
    def make_log(self):
        events = [
            event(0, 1.0, EVENT_SESSION_START, {"border_seeds": 40, "initial_seeds": []},
                  ctime=4.0),
            event(1, 100.0, EVENT_STROKE, stroke_payload([(1, 1), (2, 2)]), ctime=10.0, itime=5.0,
                  metrics={"dice": 0.5, "jaccard": 0.33, "rand": 0.6, "ravd": 0.2,
                           "roc_auc": 0.8, "mse": 0.1, "log": 0.4, "obj_tpr": 0.7}),
            event(2, 200.0, EVENT_STROKE, stroke_payload([(3, 3)], "background"),
                  ctime=20.0, itime=6.0),
            event(3, 300.0, EVENT_STROKE, stroke_payload([(4, 4)]), ctime=30.0, itime=7.0),
            event(4, 350.0, EVENT_UNDO, {"reverted": "stroke"},
                  metrics={"dice": 0.95, "jaccard": 0.9, "rand": 0.97, "ravd": 0.01,
                           "roc_auc": 0.99, "mse": 0.02, "log": 0.1, "obj_tpr": 0.97}),
            event(5, 400.0, EVENT_FINISH, {}),
        ]
        return InteractionLog(header=HEADER, events=events)

    def test_interaction_and_undo_counts(self):
        summary = summarize_task(self.make_log())
        assert summary.scalars["interactions"] == 4  # 3 strokes + 1 undo
        assert summary.scalars["undos"] == 1

    def test_time_sums_and_medians(self):
        summary = summarize_task(self.make_log())
        assert summary.scalars["ctime"] == pytest.approx(64.0)  # includes session start
        assert summary.scalars["med_ctime"] == pytest.approx(15.0)  # over user events
        assert summary.scalars["itime"] == pytest.approx(18.0)
        assert summary.scalars["wtime"] == pytest.approx(400.0)
        assert summary.scalars["otime"] == pytest.approx(400.0 - 64.0 - 18.0)

    def test_final_metrics_from_last_snapshot(self):
        summary = summarize_task(self.make_log())
        assert summary.scalars["dice"] == pytest.approx(0.95)
        assert summary.scalars["roc_auc"] == pytest.approx(0.99)

    def test_seed_statistics(self):
        summary = summarize_task(self.make_log())
        assert summary.scalars["seeds"] == 4
        assert summary.scalars["fg_seed_ratio"] == pytest.approx(3 / 4)
        assert summary.scalars["seeds_per_interaction"] == pytest.approx(1.0)
        assert summary.seed_rel_coords.shape == (4, 2)

    def test_median_ctime_worked_example(self):
        events = [
            event(0, 1.0, EVENT_SESSION_START),
            event(1, 50.0, EVENT_STROKE, stroke_payload([(1, 1)]), ctime=10.0),
            event(2, 90.0, EVENT_STROKE, stroke_payload([(2, 2)]), ctime=20.0),
            event(3, 130.0, EVENT_STROKE, stroke_payload([(3, 3)]), ctime=30.0),
            event(4, 150.0, EVENT_FINISH, {}),
        ]
        summary = summarize_task(InteractionLog(header=HEADER, events=events))
        assert summary.scalars["ctime"] == pytest.approx(60.0)
        assert summary.scalars["med_ctime"] == pytest.approx(20.0)

    def test_empty_log_is_flagged(self):
        summary = summarize_task(InteractionLog(header=HEADER, events=[]))
        assert "empty_log" in summary.flags
        assert all(v == 0.0 for v in summary.scalars.values())


def typical_summary(rng, dice=0.9):
    events = [
        event(0, 1.0, EVENT_SESSION_START, ctime=float(rng.uniform(1, 5))),
    ]
    wall = 1.0
    for i in range(int(rng.integers(2, 6))):
        wall += float(rng.uniform(30, 200))
        events.append(
            event(len(events), wall, EVENT_STROKE,
                  stroke_payload([(int(rng.integers(0, 11)), int(rng.integers(0, 11)))]),
                  ctime=float(rng.uniform(1, 20)), itime=float(rng.uniform(1, 40)),
                  metrics={"dice": dice, "jaccard": 0.8, "rand": 0.9, "ravd": 0.1,
                           "roc_auc": 0.92, "mse": 0.05, "log": 0.3, "obj_tpr": 0.88}))
    wall += 10.0
    events.append(event(len(events), wall, EVENT_FINISH, {}))
    return summarize_task(InteractionLog(header=HEADER, events=events))


class TestBuildFeatures:
    def test_counts(self):
        assert BASE_FEATURE_COUNT == 48
        assert LOG_FEATURE_COUNT == 216
        assert TOTAL_FEATURE_COUNT == 238
        assert len(feature_names()) == 216
        assert len(set(feature_names())) == 216
        assert len(full_feature_names()) == 238

    def test_golden_registry_names(self):
        golden = (
            __import__("pathlib").Path(__file__).parent / "data" / "feature_names_golden.txt"
        ).read_text().splitlines()
        assert full_feature_names() == golden

    def test_identical_summaries_make_mean_equal_median(self):
        rng = np.random.default_rng(0)
        summary = typical_summary(rng)
        vector = build_features([summary] * 4)
        names = feature_names()
        for scalar in ("dice", "ctime", "wtime", "undos"):
            mean_idx = names.index(f"mean({scalar})")
            med_idx = names.index(f"med({scalar})")
            assert vector.values[mean_idx] == pytest.approx(vector.values[med_idx])

    def test_wrong_summary_count_rejected(self):
        rng = np.random.default_rng(1)
        with pytest.raises(InputError):
            build_features([typical_summary(rng)] * 3)

    def test_seed_coords_at_center(self):
        rng = np.random.default_rng(2)
        summaries = [typical_summary(rng) for _ in range(4)]
        coords = np.full((10, 2), 0.5)
        vector = build_features(summaries, seed_events=coords)
        names = feature_names()
        assert vector.values[names.index("med_rel_seed_x")] == 0.5
        assert vector.values[names.index("med_rel_seed_y")] == 0.5
        assert vector.values[names.index("std_rel_seed_x")] == 0.0
        assert vector.values[names.index("std_rel_seed_y")] == 0.0

    def test_zero_denominator_flagged(self):
        rng = np.random.default_rng(3)
        summaries = [typical_summary(rng) for _ in range(4)]
        for s in summaries:
            s.scalars["ctime"] = 0.0
        vector = build_features(summaries)
        assert any(f.startswith("zero_denominator") for f in vector.flags)
        names = feature_names()
        assert vector.values[names.index("mean(dice)/mean(ctime)")] == 0.0


class TestPca:
    def test_rank_one_data_concentrates_variance(self):
        rng = np.random.default_rng(4)
        X = np.outer(rng.normal(size=30), rng.normal(size=50))
        model = fit_pca(X, n_components=5)
        ratio = model.explained_variance[0] / model.explained_variance.sum()
        assert ratio >= 0.999

    def test_components_orthonormal_and_sorted(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 30))
        model = fit_pca(X, n_components=10)
        gram = model.components @ model.components.T
        assert np.abs(gram - np.eye(10)).max() < 1e-8
        assert np.all(np.diff(model.explained_variance) <= 1e-10)

    def test_projection_of_training_mean_is_zero(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(25, 12))
        model = fit_pca(X, n_components=4)
        assert np.abs(model.project(X.mean(axis=0))).max() < 1e-10

    def test_augmentation_reaches_238(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(31, 216))
        model = fit_pca(X)
        assert model.n_components == PCA_COMPONENT_COUNT
        row = apply_pca(model, X[0])
        assert row.size == 238
        assert (row[:216] == X[0]).all()
        full = augment_matrix(model, X)
        assert full.shape == (31, 238)

    def test_reconstruction_residual_orthogonal_to_components(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(30, 20))
        model = fit_pca(X, n_components=6)
        z = (X - model.mean) / model.scale
        proj = z @ model.components.T
        residual = z - proj @ model.components
        assert np.abs(residual @ model.components.T).max() < 1e-8

    def test_component_cap_flagged(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(5, 40))
        model = fit_pca(X, n_components=22)
        assert model.n_components == 4
        assert any(f.startswith("components_capped") for f in model.flags)

    def test_zero_variance_feature_flagged(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(20, 6))
        X[:, 2] = 3.14
        model = fit_pca(X, n_components=3)
        assert any(f.startswith("zero_variance") for f in model.flags)
        assert model.scale[2] == 1.0

    def test_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(20, 8))
        model = fit_pca(X, n_components=3)
        path = tmp_path / "pca.json"
        model.save(path)
        loaded = PcaModel.load(path)
        assert np.allclose(loaded.components, model.components)
        assert np.allclose(loaded.project(X), model.project(X))


class TestFeatureCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        rows = rng.normal(size=(3, 216))
        path = tmp_path / "f.csv"
        write_feature_csv(path, rows, ["a", "b", "c"], feature_names())
        ids, names, loaded = read_feature_csv(path)
        assert ids == ["a", "b", "c"]
        assert names == feature_names()
        assert (loaded == rows).all()
