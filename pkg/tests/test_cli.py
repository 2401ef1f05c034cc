import csv
import json

import pytest

from seggauge.cli import main
from seggauge.imageio import write_pgm, write_png
from seggauge.questionnaires import canonical_item_ids
from seggauge.synthetic import builtin_shape

SUS_EXAMPLE = [
    [0, 1, 2, 3, 4, 0, 1, 2, 3, 4],
    [1, 2, 3, 4, 0, 1, 2, 3, 4, 0],
    [2, 3, 4, 0, 1, 2, 3, 4, 0, 1],
]
ATTRAKDIFF_EXAMPLE = {
    "PQ": [[1, 2, 3, 4, 5, 6, 7], [2, 3, 4, 5, 6, 7, 7], [3, 4, 5, 6, 7, 7, 7]],
    "ATT": [[2, 3, 4, 5, 6, 7, 7], [3, 4, 5, 6, 7, 7, 7], [4, 5, 6, 7, 7, 7, 7]],
    "HQ-I": [[3, 4, 5, 6, 7, 7, 7], [4, 5, 6, 7, 7, 7, 7], [5, 6, 7, 7, 7, 7, 7]],
    "HQ-S": [[4, 5, 6, 7, 7, 7, 7], [5, 6, 7, 7, 7, 7, 7], [6, 7, 7, 7, 7, 7, 7]],
}


def write_appendix_csv(path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(canonical_item_ids())
        for s in range(3):
            row = SUS_EXAMPLE[s] + sum((ATTRAKDIFF_EXAMPLE[g][s] for g in ("PQ", "ATT", "HQ-I", "HQ-S")), [])
            writer.writerow(row)


@pytest.fixture
def disk_files(tmp_path):
    image, gt = builtin_shape("disk")
    image_path = tmp_path / "disk.png"
    gt_path = tmp_path / "disk_gt.pgm"
    write_png(image_path, image)
    write_pgm(gt_path, gt.astype(float))
    return image_path, gt_path


class TestSegmentAndMetrics:
    def test_segment_writes_mask_and_metrics(self, tmp_path, disk_files):
        image_path, gt_path = disk_files
        seeds_path = tmp_path / "seeds.json"
        seeds_path.write_text(json.dumps([[24, 24, "foreground"]]))
        out = tmp_path / "out"
        code = main([
            "segment", "--image", str(image_path), "--seeds", str(seeds_path),
            "--border-background", "--gt", str(gt_path), "--out", str(out),
        ])
        assert code == 0
        result = json.loads((out / "result.json").read_text())
        assert result["metrics"]["dice"] > 0.5
        assert (out / "mask.pgm").exists()

    def test_metrics_subcommand(self, tmp_path, disk_files, capsys):
        image_path, gt_path = disk_files
        code = main(["metrics", "--pred", str(gt_path), "--gt", str(gt_path)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["dice"] == 1.0

    def test_missing_file_is_exit_2(self, tmp_path):
        code = main(["metrics", "--pred", str(tmp_path / "no.pgm"), "--gt", str(tmp_path / "no.pgm")])
        assert code == 2


class TestScore:
    def test_appendix_values(self, tmp_path, capsys):
        path = tmp_path / "responses.csv"
        write_appendix_csv(path)
        assert main(["score", "--responses", str(path)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["sus"]["score"] == 50.0
        assert summary["attrakdiff"]["PQ"]["score"] == pytest.approx(4.81, abs=0.005)
        assert summary["attrakdiff"]["PQ"]["ci"] == pytest.approx(0.81, abs=0.01)

    def test_idempotent_output_bytes(self, tmp_path):
        responses = tmp_path / "responses.csv"
        write_appendix_csv(responses)
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        assert main(["score", "--responses", str(responses), "--out", str(out_a)]) == 0
        assert main(["score", "--responses", str(responses), "--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()


@pytest.fixture(scope="module")
def mini_study(tmp_path_factory):
    """A small simulated study shared by the pipeline CLI tests."""

    root = tmp_path_factory.mktemp("study")
    manifest = root / "cohort.json"
    manifest.write_text(json.dumps({
        "tasks": [
            {"id": "warmup", "image": "builtin:disk", "ground_truth": "builtin:disk"},
            {"id": "t1", "image": "builtin:disk", "ground_truth": "builtin:disk"},
            {"id": "t2", "image": "builtin:blob", "ground_truth": "builtin:blob"},
            {"id": "t3", "image": "builtin:wedge", "ground_truth": "builtin:wedge"},
        ],
        "personas": [
            {"name": "fast", "patience": 4},
            {"name": "slow", "patience": 7, "jitter_sigma": 1.0},
        ],
        "n_users": 12,
        "noise_level": 0.0,
        "rng_seed": 5,
    }))
    out = root / "sim"
    assert main(["simulate", "--manifest", str(manifest), "--out", str(out)]) == 0
    return root


class TestPipelineCli:
    def test_simulate_layout(self, mini_study):
        out = mini_study / "sim"
        assert (out / "targets.csv").exists()
        assert (out / "cohort.json").exists()
        logs = list((out / "logs").rglob("*.segl"))
        assert len(logs) == 12 * 4

    def test_simulate_is_deterministic(self, mini_study, tmp_path):
        out2 = tmp_path / "sim2"
        assert main(["simulate", "--manifest", str(mini_study / "cohort.json"),
                     "--out", str(out2)]) == 0
        a = (mini_study / "sim" / "targets.csv").read_bytes()
        b = (out2 / "targets.csv").read_bytes()
        assert a == b
        for log in sorted((mini_study / "sim" / "logs").rglob("*.segl"))[:3]:
            twin = out2 / "logs" / log.relative_to(mini_study / "sim" / "logs")
            assert log.read_bytes() == twin.read_bytes()

    def test_features_and_train_and_predict(self, mini_study):
        out = mini_study / "sim"
        features = mini_study / "features.csv"
        pca = mini_study / "pca.json"
        assert main(["features", "--logs", str(out / "logs"), "--out", str(features),
                     "--pca-model", str(pca)]) == 0
        header = features.read_text().splitlines()[0].split(",")
        # 12 samples cap the PCA at 11 components (216 + 11); the full
        # 238-wide matrix needs at least 23 samples and is covered by the
        # acceptance suite's 31-user cohort
        assert len(header) == 1 + 216 + 11

        grid = mini_study / "grid.json"
        grid.write_text(json.dumps({
            "n_stages": [60], "learning_rates": [0.15], "max_depths": [2],
            "subsamples": [1.0], "min_leaf_sizes": [1], "huber_deltas": [1.0],
        }))
        predictor = mini_study / "predictor.json"
        report = mini_study / "report.json"
        assert main(["train", "--features", str(features), "--targets", str(out / "targets.csv"),
                     "--grid", str(grid), "--pca-model", str(pca), "--folds", "4",
                     "--seed", "1", "--out", str(predictor), "--report", str(report)]) == 0
        loaded = json.loads(report.read_text())
        assert set(loaded["targets"]) == {"PQ", "ATT", "HQ-I", "HQ-S", "HQ", "SUS"}

        predictions = mini_study / "predictions.json"
        assert main(["predict", "--predictor", str(predictor), "--logs", str(out / "logs"),
                     "--out", str(predictions)]) == 0
        values = json.loads(predictions.read_text())
        assert len(values) == 12
        sample = next(iter(values.values()))
        assert set(sample) == {"PQ", "ATT", "HQ-I", "HQ-S", "HQ", "SUS"}

    def test_features_output_is_byte_identical(self, mini_study, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for path in (a, b):
            assert main(["features", "--logs", str(mini_study / "sim" / "logs"),
                         "--out", str(path)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_raw_features_are_216(self, mini_study):
        raw = mini_study / "raw.csv"
        assert main(["features", "--logs", str(mini_study / "sim" / "logs"),
                     "--out", str(raw), "--raw"]) == 0
        header = raw.read_text().splitlines()[0].split(",")
        assert len(header) == 1 + 216

    def test_report_outputs_curves(self, mini_study, tmp_path):
        responses = tmp_path / "responses.csv"
        write_appendix_csv(responses)
        out = tmp_path / "report"
        assert main(["report", "--logs", str(mini_study / "sim" / "logs"),
                     "--questionnaires", str(responses), "--out", str(out)]) == 0
        curves = (out / "dice_per_interaction.csv").read_text().splitlines()
        assert curves[0] == "kind,interaction,n,median,q25,q75,p025,p975"
        kinds = {line.split(",")[0] for line in curves[1:]}
        assert kinds == {"semi_manual", "guided", "joint"}
        portfolio = json.loads((out / "portfolio.json").read_text())
        assert "all" in portfolio

    def test_predict_without_embedded_pca_is_actionable(self, mini_study, tmp_path, capsys):
        predictor_path = mini_study / "predictor.json"
        stripped = json.loads(predictor_path.read_text())
        stripped.pop("pca", None)
        bare = tmp_path / "nopca.json"
        bare.write_text(json.dumps(stripped))
        code = main(["predict", "--predictor", str(bare),
                     "--logs", str(mini_study / "sim" / "logs")])
        assert code == 2
        assert "retrain with" in capsys.readouterr().err

    def test_report_portfolio_from_service_jsonl(self, mini_study, tmp_path):
        jsonl = tmp_path / "questionnaires.jsonl"
        record = {
            "user_id": "u", "prototype": "guided",
            "sus": [2] * 10,
            "attrakdiff": {"pq": [4] * 7, "att": [4] * 7, "hqi": [4] * 7, "hqs": [4] * 7},
        }
        lines = [json.dumps(record), json.dumps({**record, "prototype": "joint"})]
        jsonl.write_text("\n".join(lines) + "\n")
        out = tmp_path / "report"
        assert main(["report", "--logs", str(mini_study / "sim" / "logs"),
                     "--questionnaires", str(jsonl), "--out", str(out)]) == 0
        portfolio = json.loads((out / "portfolio.json").read_text())
        assert set(portfolio) == {"guided", "joint"}
        assert portfolio["guided"]["sus"]["score"] == 50.0

    def test_invalid_manifest_is_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"tasks": 7}))
        assert main(["simulate", "--manifest", str(bad), "--out", str(tmp_path / "o")]) == 2
