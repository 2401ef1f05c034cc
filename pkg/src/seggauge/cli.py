"""Command-line entry points for the segmentation and usability pipeline.

Exit codes: 0 success, 2 validation error, 3 runtime failure. Every source
of randomness is controlled by an explicit --seed flag, so identical inputs
and seeds produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import questionnaires
from .errors import InputError, SegGaugeError
from .events import read_log, iter_log_files
from .features import (
    PcaModel,
    augment_matrix,
    build_features,
    fit_pca,
    feature_names,
    pca_feature_names,
    read_feature_csv,
    summarize_task,
    write_feature_csv,
    TASKS_PER_SAMPLE,
)
from .gbrf import (
    HyperGrid,
    TARGET_NAMES,
    UsabilityPredictor,
    default_grid,
    train_predictor,
)
from .growcut import segment
from .imageio import read_intensity_image, read_mask_image, write_pgm
from .metrics import metric_report
from .robot import (
    RobotPersona,
    default_personas,
    read_targets_csv,
    synthesize_cohort,
    write_targets_csv,
)
from .tasks import Task, builtin_tasks, load_task, parse_seed_list


def _write_json(path: Path | None, data) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
    if path is None:
        print(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value)!r}")


def _sanitize(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


# ---------------------------------------------------------------------------
# Subcommands


def cmd_segment(args) -> int:
    image = read_intensity_image(args.image)
    seeds = parse_seed_list(json.loads(Path(args.seeds).read_text(encoding="utf-8")))
    if args.border_background:
        from .growcut import border_background_seeds

        seeds = border_background_seeds(image.shape) + seeds
    result = segment(image, seeds, args.max_iterations)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pgm(out / "mask.pgm", result.mask)
    info = {
        "iterations_run": result.iterations_run,
        "foreground_cells": int(result.mask.sum()),
        "width": image.shape[1],
        "height": image.shape[0],
    }
    if args.gt:
        gt = read_mask_image(args.gt)
        info["metrics"] = _sanitize(metric_report(result.mask, result.strengths, gt).as_dict())
    _write_json(out / "result.json", info)
    print(f"segmented {args.image}: {info['foreground_cells']} foreground cells "
          f"in {result.iterations_run} iterations -> {out}")
    return 0


def cmd_metrics(args) -> int:
    pred = read_mask_image(args.pred)
    gt = read_mask_image(args.gt)
    report = metric_report(pred, None, gt)
    _write_json(Path(args.out) if args.out else None, _sanitize(report.as_dict()))
    return 0


def _load_cohort_tasks(manifest: dict, base_dir: Path) -> list[Task]:
    if "tasks" in manifest and isinstance(manifest["tasks"], list):
        entries = manifest["tasks"]
        if entries and isinstance(entries[0], dict):
            return [load_task(d, base_dir) for d in entries]
    if manifest.get("tasks") == "builtin" or "tasks" not in manifest:
        from .synthetic import builtin_shape

        image, gt = builtin_shape("disk", 40)
        warmup = Task(task_id="warmup", image=image, ground_truth=gt)
        return [warmup] + builtin_tasks()
    raise InputError("cohort manifest 'tasks' must be a descriptor list or \"builtin\"")


def cmd_simulate(args) -> int:
    manifest = {}
    base_dir = Path(".")
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        base_dir = Path(args.manifest).parent
    tasks = _load_cohort_tasks(manifest, base_dir)
    personas = (
        [RobotPersona.from_json(p) for p in manifest["personas"]]
        if manifest.get("personas")
        else default_personas()
    )
    n_users = args.users if args.users is not None else int(manifest.get("n_users", 31))
    noise = args.noise if args.noise is not None else float(manifest.get("noise_level", 0.1))
    seed = args.seed if args.seed is not None else int(manifest.get("rng_seed", 0))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cohort = synthesize_cohort(
        tasks, personas, n_users=n_users, rng_seed=seed, noise_level=noise,
        log_dir=out / "logs",
    )
    write_targets_csv(cohort, out / "targets.csv")
    if noise > 0:
        write_targets_csv(cohort, out / "targets_clean.csv", clean=True)
    resolved = {
        "n_users": n_users,
        "noise_level": noise,
        "rng_seed": seed,
        "tasks": [t.task_id for t in tasks],
        "personas": [p.to_json() for p in personas],
        "hidden_target_params": _sanitize(cohort.hidden_params),
    }
    _write_json(out / "cohort.json", resolved)
    print(f"simulated {len(cohort.samples)} samples over {len(tasks)} tasks -> {out}")
    return 0


def _collect_samples(log_dir: Path):
    """Group .segl files into (user, kind) samples of exactly four task logs."""

    groups = defaultdict(list)
    for path in iter_log_files(log_dir):
        log = read_log(path)
        groups[(log.header.user_id, log.header.kind)].append(log)
    if not groups:
        raise InputError(f"no .segl logs under {log_dir}")
    samples = []
    for (user, kind), logs in sorted(groups.items()):
        if len(logs) != TASKS_PER_SAMPLE:
            raise InputError(
                f"sample {user}:{kind} has {len(logs)} task logs, expected {TASKS_PER_SAMPLE}"
            )
        logs.sort(key=lambda lg: lg.header.task_id)
        samples.append((f"{user}:{kind}", logs))
    return samples


def cmd_features(args) -> int:
    samples = _collect_samples(Path(args.logs))
    ids = [sid for sid, _ in samples]
    rows = np.vstack(
        [build_features([summarize_task(lg) for lg in logs]).values for _, logs in samples]
    )
    if args.raw:
        write_feature_csv(Path(args.out), rows, ids, feature_names())
        print(f"wrote {rows.shape[0]} x {rows.shape[1]} raw feature matrix -> {args.out}")
        return 0
    pca = fit_pca(rows)
    full = augment_matrix(pca, rows)
    names = feature_names() + pca_feature_names(pca.n_components)
    write_feature_csv(Path(args.out), full, ids, names)
    if args.pca_model:
        pca.save(Path(args.pca_model))
    print(f"wrote {full.shape[0]} x {full.shape[1]} feature matrix -> {args.out}")
    return 0


def cmd_score(args) -> int:
    sus, groups = questionnaires.parse_response_csv(args.responses)
    summary = _sanitize(questionnaires.score_summary(sus, groups))
    _write_json(Path(args.out) if args.out else None, summary)
    return 0


def cmd_train(args) -> int:
    ids, names, X = read_feature_csv(args.features)
    target_ids, targets = read_targets_csv(args.targets)
    if ids != target_ids:
        raise InputError("feature and target sample ids differ (order matters)")
    grid = (
        HyperGrid.from_json(json.loads(Path(args.grid).read_text(encoding="utf-8")))
        if args.grid
        else default_grid()
    )
    pca = PcaModel.load(args.pca_model) if args.pca_model else None
    predictor, report = train_predictor(
        X, targets, split_seed=args.seed, grid=grid, folds=args.folds, pca=pca
    )
    predictor.save(Path(args.out))
    if args.report and args.report.endswith(".csv"):
        lines = ["target,mean_relative_error,median_relative_error,std_relative_error,cv_loss"]
        for name in TARGET_NAMES:
            row = report["targets"][name]
            lines.append(
                f"{name},{row['mean_relative_error']!r},{row['median_relative_error']!r},"
                f"{row['std_relative_error']!r},{row['cv_loss']!r}"
            )
        Path(args.report).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        _write_json(Path(args.report) if args.report else None, _sanitize(report))
    medians = {t: report["targets"][t]["median_relative_error"] for t in TARGET_NAMES}
    print("trained predictor ->", args.out)
    for name, value in medians.items():
        print(f"  {name:5s} median relative error {100 * value:.1f}%")
    return 0


def cmd_predict(args) -> int:
    predictor = UsabilityPredictor.load(args.predictor)
    samples = _collect_samples(Path(args.logs))
    ids = [sid for sid, _ in samples]
    rows = np.vstack(
        [build_features([summarize_task(lg) for lg in logs]).values for _, logs in samples]
    )
    if predictor.n_features != rows.shape[1]:
        if predictor.pca is None:
            raise InputError(
                f"predictor expects {predictor.n_features} features but logs yield "
                f"{rows.shape[1]}; it has no embedded PCA model, so retrain with "
                "--pca-model to predict from logs"
            )
        if predictor.n_features != rows.shape[1] + predictor.pca.n_components:
            raise InputError(
                f"predictor expects {predictor.n_features} features; logs plus its "
                f"{predictor.pca.n_components}-component PCA give "
                f"{rows.shape[1] + predictor.pca.n_components}"
            )
        rows = augment_matrix(predictor.pca, rows)
    predictions = predictor.predict(rows)
    out = {
        sid: {t: float(predictions[t][i]) for t in TARGET_NAMES} for i, sid in enumerate(ids)
    }
    _write_json(Path(args.out) if args.out else None, out)
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logs = [read_log(p) for p in iter_log_files(Path(args.logs))]
    if not logs:
        raise InputError(f"no .segl logs under {args.logs}")

    # Dice per interaction index, per prototype kind.
    series: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for log in logs:
        step = 0
        for event in log.events:
            if event.metrics is None or event.metrics.get("dice") is None:
                continue
            series[log.header.kind][step].append(float(event.metrics["dice"]))
            step += 1
    lines = ["kind,interaction,n,median,q25,q75,p025,p975"]
    for kind in sorted(series):
        for step in sorted(series[kind]):
            values = np.asarray(series[kind][step])
            q = np.percentile(values, [50, 25, 75, 2.5, 97.5])
            lines.append(
                f"{kind},{step},{values.size},{q[0]:.6f},{q[1]:.6f},{q[2]:.6f},{q[3]:.6f},{q[4]:.6f}"
            )
    (out / "dice_per_interaction.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if args.questionnaires:
        qpath = Path(args.questionnaires)
        portfolios = {}
        if qpath.suffix == ".jsonl":
            by_kind: dict[str, list[dict]] = defaultdict(list)
            for line in qpath.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    record = json.loads(line)
                    by_kind[record["prototype"]].append(record)
            for kind, records in sorted(by_kind.items()):
                sus = np.asarray([r["sus"] for r in records])
                groups = {
                    "PQ": np.asarray([r["attrakdiff"]["pq"] for r in records]),
                    "ATT": np.asarray([r["attrakdiff"]["att"] for r in records]),
                    "HQ-I": np.asarray([r["attrakdiff"]["hqi"] for r in records]),
                    "HQ-S": np.asarray([r["attrakdiff"]["hqs"] for r in records]),
                }
                portfolios[kind] = questionnaires.score_summary(sus, groups)
        else:
            sus, groups = questionnaires.parse_response_csv(qpath)
            portfolios["all"] = questionnaires.score_summary(sus, groups)
        _write_json(out / "portfolio.json", _sanitize(portfolios))
    print(f"report written -> {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_file(args.config)
    if args.port is not None:
        config.port = args.port
    if args.host is not None:
        config.host = args.host
    if args.data_dir is not None:
        config.data_dir = args.data_dir
    if args.tasks is not None:
        config.task_manifest = args.tasks
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seggauge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one image from a seed file")
    p.add_argument("--image", required=True)
    p.add_argument("--seeds", required=True, help="JSON list of [x, y, label]")
    p.add_argument("--border-background", action="store_true",
                   help="add background seeds along the image border")
    p.add_argument("--gt", help="ground-truth mask for metrics")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("metrics", help="compare a predicted mask against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="synthesize a robot-user cohort")
    p.add_argument("--manifest", help="cohort manifest JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("features", help="build the feature matrix from interaction logs")
    p.add_argument("--logs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--raw", action="store_true", help="write the 216 log features without PCA")
    p.add_argument("--pca-model", help="where to store the fitted PCA model JSON")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("score", help="score a questionnaire response CSV")
    p.add_argument("--responses", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="train the six-target usability predictor")
    p.add_argument("--features", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--grid", help="hyperparameter grid JSON (default: the full 20480 grid)")
    p.add_argument("--pca-model", help="PCA model JSON to embed for predict-from-logs")
    p.add_argument("--folds", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="where to write the error report JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict questionnaire scores from logs")
    p.add_argument("--predictor", required=True)
    p.add_argument("--logs", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="study report: dice curves and portfolio data")
    p.add_argument("--logs", required=True)
    p.add_argument("--questionnaires", help="responses CSV or service questionnaires.jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.add_argument("--tasks", help="task manifest JSON")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except (InputError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SegGaugeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit code 3
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
