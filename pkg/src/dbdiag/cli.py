"""Command-line interface.

Subcommands cover the whole pipeline: ``gen`` makes a labeled synthetic
scenario, ``train`` fits a model, ``score`` turns metrics into reconstruction
scores, ``detect`` extracts anomaly periods, ``match`` ranks wait events over
a period, ``report`` runs score+detect+match end to end, and ``ablate``
compares architectures on one data set.

Exit codes: 0 success, 2 usage or configuration problem, 3 input data
problem, 4 model problem (training failure, unreadable or corrupt model
file), 5 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .data import iso_to_minute, load_metrics, minute_to_iso, write_metrics
from .detector import (
    SELECTED_ARCHITECTURE,
    TABLE_ARCHITECTURES,
    ScoreSeries,
    TrainConfig,
    load_model,
    model_digest,
    run_ablation,
    save_model,
    train,
)
from .errors import ConfigError, DataError, DiagError, ModelError
from .report import ReportConfig, build_report, render_text, write_report
from .similarity import match_events
from .spc import DEFAULT_SIGMA_K, detect, find_out_of_control, group_periods
from .synth import (
    ScenarioSpec,
    default_scenario,
    drift_scenario,
    generate,
    null_scenario,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODEL = 4
EXIT_INTERNAL = 5

_SUPPRESS_CONTROL_KEYS = {"command", "config"}


def _add_common(sp: argparse.ArgumentParser, suppress: bool) -> None:
    # --config supplies defaults for tuning options; explicit flags win.
    sp.add_argument("--config", default=None if not suppress else argparse.SUPPRESS,
                    help="JSON file of option defaults (flag names with "
                         "underscores); explicit flags override it")


def _opt(sp: argparse.ArgumentParser, suppress: bool, *names, default=None, **kw):
    if suppress:
        kw["default"] = argparse.SUPPRESS
    else:
        kw["default"] = default
    sp.add_argument(*names, **kw)


def _split_type(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"split needs three comma-separated fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split fractions {text!r}") from None


def _build_parser(suppress: bool = False) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbdiag",
        description="Anomaly-period detection and wait-event ranking for "
                    "DBMS metric series.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="generate a labeled synthetic scenario")
    sp.add_argument("--out-dir", required=True, help="directory for the CSVs and labels")
    _opt(sp, suppress, "--seed", type=int, default=None)
    _opt(sp, suppress, "--duration", type=int, default=None,
         help="scenario length in minutes")
    _opt(sp, suppress, "--null", action="store_true", default=False,
         help="no injections (clean baseline)")
    _opt(sp, suppress, "--drift", action="store_true", default=False,
         help="add per-feature level drift (non-stationary variant)")
    _opt(sp, suppress, "--spec", default=None,
         help="scenario JSON (mutually exclusive with the other knobs)")
    _add_common(sp, suppress)

    sp = sub.add_parser("train", help="fit a detector on a metric CSV")
    sp.add_argument("--stats", required=True, help="metric CSV to train on")
    sp.add_argument("--model", required=True, help="output model JSON path")
    _opt(sp, suppress, "--architecture", default=SELECTED_ARCHITECTURE)
    _opt(sp, suppress, "--window", type=int, default=30,
         help="window length in minutes")
    _opt(sp, suppress, "--stride", type=int, default=1)
    _opt(sp, suppress, "--learning-rate", type=float, default=0.001)
    _opt(sp, suppress, "--l2-lambda", type=float, default=0.001)
    _opt(sp, suppress, "--batch-size", type=int, default=1500)
    _opt(sp, suppress, "--epochs", type=int, default=200, help="epoch cap")
    _opt(sp, suppress, "--patience", type=int, default=20,
         help="early-stop patience in epochs")
    _opt(sp, suppress, "--seed", type=int, default=0)
    _opt(sp, suppress, "--split", type=_split_type, default=(0.6, 0.2, 0.2),
         help="train,val,test fractions")
    _opt(sp, suppress, "--history", default=None,
         help="also write per-epoch history JSON here")
    _opt(sp, suppress, "--verbose", action="store_true", default=False)
    _add_common(sp, suppress)

    sp = sub.add_parser("score", help="score a metric CSV with a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--stats", required=True)
    sp.add_argument("--out", required=True, help="output scores JSON")
    _opt(sp, suppress, "--csv", default=None, help="also write scores as CSV")
    _opt(sp, suppress, "--stride", type=int, default=1)
    _add_common(sp, suppress)

    sp = sub.add_parser("detect", help="find anomaly periods in a score series")
    sp.add_argument("--scores", required=True, help="scores JSON from 'score'")
    sp.add_argument("--out", required=True, help="output detections JSON")
    _opt(sp, suppress, "--sigma", type=float, default=DEFAULT_SIGMA_K,
         help="control-limit multiplier")
    _opt(sp, suppress, "--gap-tolerance", type=int, default=0,
         help="unflagged windows allowed inside one period")
    _opt(sp, suppress, "--baseline", default=None,
         help="fit limits on this scores JSON instead of the scored series")
    _add_common(sp, suppress)

    sp = sub.add_parser("match", help="rank wait events against a metric over a period")
    sp.add_argument("--stats", required=True)
    sp.add_argument("--events", required=True)
    sp.add_argument("--feature", required=True)
    sp.add_argument("--start", required=True,
                    help="period start (ISO-8601 or epoch seconds)")
    sp.add_argument("--end", required=True,
                    help="period end, exclusive (ISO-8601 or epoch seconds)")
    _opt(sp, suppress, "--margin", type=int, default=0,
         help="extra minutes after the period")
    _opt(sp, suppress, "--top", type=int, default=10)
    _opt(sp, suppress, "--out", default=None, help="write matches JSON here")
    _add_common(sp, suppress)

    sp = sub.add_parser("report", help="full diagnosis: score, detect, rank, chart")
    sp.add_argument("--model", required=True)
    sp.add_argument("--stats", required=True)
    sp.add_argument("--out-dir", required=True)
    _opt(sp, suppress, "--events", default=None, help="wait-event CSV")
    _opt(sp, suppress, "--sigma", type=float, default=DEFAULT_SIGMA_K)
    _opt(sp, suppress, "--gap-tolerance", type=int, default=0)
    _opt(sp, suppress, "--top-periods", type=int, default=5)
    _opt(sp, suppress, "--top-events", type=int, default=5)
    _opt(sp, suppress, "--margin", type=int, default=0)
    _opt(sp, suppress, "--stride", type=int, default=1)
    _opt(sp, suppress, "--quiet", action="store_true", default=False)
    _add_common(sp, suppress)

    sp = sub.add_parser("ablate", help="train several architectures on one data set")
    sp.add_argument("--stats", required=True)
    _opt(sp, suppress, "--architectures", default=None,
         help="semicolon-separated list (default: the built-in comparison set)")
    _opt(sp, suppress, "--window", type=int, default=30)
    _opt(sp, suppress, "--learning-rate", type=float, default=0.001)
    _opt(sp, suppress, "--l2-lambda", type=float, default=0.001)
    _opt(sp, suppress, "--batch-size", type=int, default=1500)
    _opt(sp, suppress, "--epochs", type=int, default=200)
    _opt(sp, suppress, "--patience", type=int, default=20)
    _opt(sp, suppress, "--seed", type=int, default=0)
    _opt(sp, suppress, "--out", default=None, help="write results JSON here")
    _add_common(sp, suppress)

    return parser


def _merge_config(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot open config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")

    allowed = set(vars(args)) - _SUPPRESS_CONTROL_KEYS
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"config {path} has unknown option(s) for "
                          f"'{args.command}': {', '.join(sorted(unknown))}")
    explicit = vars(_build_parser(suppress=True).parse_args(argv))
    for key, value in cfg.items():
        if key not in explicit:
            if key == "split" and isinstance(value, list):
                value = tuple(float(v) for v in value)
            setattr(args, key, value)
    return args


def _cmd_gen(args) -> int:
    if args.spec and (args.seed is not None or args.duration is not None
                      or args.null or args.drift):
        raise ConfigError("--spec cannot be combined with --seed, --duration, "
                          "--null or --drift")
    if args.null and args.drift:
        raise ConfigError("--null and --drift are mutually exclusive")
    if args.spec:
        spec = ScenarioSpec.read_json(args.spec)
    elif args.null:
        spec = null_scenario(seed=11 if args.seed is None else args.seed,
                             duration_minutes=args.duration or 2000)
    elif args.drift:
        spec = drift_scenario(seed=13 if args.seed is None else args.seed,
                              duration_minutes=args.duration or 10_800)
    else:
        spec = default_scenario(seed=7 if args.seed is None else args.seed,
                                duration_minutes=args.duration or 10_800)
    scenario = generate(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    stats_path = os.path.join(args.out_dir, "stats.csv")
    events_path = os.path.join(args.out_dir, "events.csv")
    write_metrics(stats_path, scenario.stats)
    write_metrics(events_path, scenario.events)
    spec.write_json(os.path.join(args.out_dir, "scenario.json"))
    labels = [{**lab.to_dict(), "start": minute_to_iso(lab.start),
               "end": minute_to_iso(lab.end), "start_minute": lab.start,
               "end_minute": lab.end} for lab in scenario.labels]
    with open(os.path.join(args.out_dir, "labels.json"), "w") as fh:
        json.dump(labels, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {spec.duration_minutes}-minute scenario to {args.out_dir} "
          f"({len(scenario.labels)} labeled anomalies)")
    return EXIT_OK


def _cmd_train(args) -> int:
    frame = load_metrics(args.stats)
    config = TrainConfig(
        architecture=args.architecture, window_steps=args.window,
        stride=args.stride, learning_rate=args.learning_rate,
        l2_lambda=args.l2_lambda, batch_size=args.batch_size,
        max_epochs=args.epochs, patience=args.patience, seed=args.seed,
        split=tuple(args.split))
    result = train(frame, config)
    if args.verbose:
        for row in result.history:
            print(f"epoch {row['epoch']:4d}  objective {row['train_objective']:.6f}  "
                  f"train_mse {row['train_mse']:.6f}  val_mse {row['val_mse']:.6f}")
    save_model(result.detector, args.model)
    if args.history:
        with open(args.history, "w") as fh:
            json.dump(result.history, fh, indent=2)
            fh.write("\n")
    print(f"trained {config.architecture} on {len(frame.timestamps)} minutes: "
          f"{result.epochs_run} epochs (best {result.best_epoch}), "
          f"val_mse {result.val_mse:.6f}, test_mse {result.test_mse:.6f}")
    print(f"model written to {args.model}")
    return EXIT_OK


def _cmd_score(args) -> int:
    detector = load_model(args.model)
    frame = load_metrics(args.stats)
    scores = detector.score_frame(frame, stride=args.stride)
    scores.write_json(args.out)
    if args.csv:
        scores.write_csv(args.csv)
    print(f"scored {len(scores)} windows of {scores.window_steps} minutes "
          f"over {len(scores.feature_names)} features -> {args.out}")
    return EXIT_OK


def _cmd_detect(args) -> int:
    scores = ScoreSeries.read_json(args.scores)
    baseline = ScoreSeries.read_json(args.baseline) if args.baseline else None
    result = detect(scores, k=args.sigma, gap_tolerance=args.gap_tolerance,
                    baseline=baseline)
    groups = group_periods(result)
    payload = {
        "format": "dbdiag-detections",
        "format_version": 1,
        "sigma_k": args.sigma,
        "gap_tolerance": args.gap_tolerance,
        "charts": {
            name: {**chart.to_dict(),
                   "flagged_windows": int(find_out_of_control(
                       scores.column(name), chart).size)}
            for name, chart in result.charts.items()},
        "feature_periods": {name: [p.to_dict() for p in plist]
                            for name, plist in result.periods.items()},
        "groups": [g.to_dict() for g in groups],
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    total = sum(len(p) for p in result.periods.values())
    print(f"{total} per-feature period(s) in {len(groups)} group(s) "
          f"at {args.sigma:g} sigma -> {args.out}")
    for g in groups:
        print(f"  rank {g.rank}: {minute_to_iso(g.start)} .. {minute_to_iso(g.end)} "
              f"primary {g.primary_feature} peak {g.peak_score:.4g}")
    return EXIT_OK


def _cmd_match(args) -> int:
    stats = load_metrics(args.stats)
    events = load_metrics(args.events, kind="event")
    start = iso_to_minute(args.start)
    end = iso_to_minute(args.end)
    matches = match_events(stats, args.feature, events, start, end,
                           margin=args.margin)
    shown = matches[:args.top]
    width = max((len(m.event) for m in shown), default=5)
    print(f"{'event':<{width}}  {'dtw':>10}  {'corr':>7}  rank_dtw  rank_corr")
    for m in shown:
        corr = "n/a" if m.correlation is None else f"{m.correlation:7.4f}"
        print(f"{m.event:<{width}}  {m.dtw:10.4f}  {corr:>7}  "
              f"{m.rank_dtw:8d}  {m.rank_correlation:9d}")
    if args.out:
        if args.out.endswith(".csv"):
            with open(args.out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["event", "dtw", "correlation",
                                 "rank_dtw", "rank_correlation"])
                for m in matches:
                    corr = "" if m.correlation is None else repr(m.correlation)
                    writer.writerow([m.event, repr(m.dtw), corr,
                                     m.rank_dtw, m.rank_correlation])
        else:
            payload = {"feature": args.feature, "start": args.start,
                       "end": args.end, "margin": args.margin,
                       "matches": [m.to_dict() for m in matches]}
            with open(args.out, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
    return EXIT_OK


def _cmd_report(args) -> int:
    detector = load_model(args.model)
    stats = load_metrics(args.stats)
    events = load_metrics(args.events, kind="event") if args.events else None
    scores = detector.score_frame(stats, stride=args.stride)
    config = ReportConfig(sigma_k=args.sigma, gap_tolerance=args.gap_tolerance,
                          top_periods=args.top_periods, top_events=args.top_events,
                          match_margin=args.margin)
    model_info = {
        "digest": model_digest(args.model),
        "architecture": detector.architecture,
        "window_steps": detector.window_steps,
        "features": list(detector.feature_names),
    }
    report, charts = build_report(scores, stats, events, model_info, config)
    written = write_report(args.out_dir, report, charts)
    if not args.quiet:
        print(render_text(report), end="")
    print(f"report written to {args.out_dir} ({len(written)} files)")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    frame = load_metrics(args.stats)
    if args.architectures:
        archs = tuple(a.strip() for a in args.architectures.split(";") if a.strip())
        if not archs:
            raise ConfigError("--architectures is empty")
    else:
        archs = TABLE_ARCHITECTURES
    base = TrainConfig(window_steps=args.window, learning_rate=args.learning_rate,
                       l2_lambda=args.l2_lambda, batch_size=args.batch_size,
                       max_epochs=args.epochs, patience=args.patience,
                       seed=args.seed)
    rows = run_ablation(frame, archs, base)
    width = max(len(r["architecture"]) for r in rows)
    print(f"{'architecture':<{width}}  {'test_mse':>10}  {'val_mse':>10}  best/epochs")
    for r in rows:
        if "error" in r:
            print(f"{r['architecture']:<{width}}  failed: {r['error']}")
        else:
            print(f"{r['architecture']:<{width}}  {r['test_mse']:10.4f}  "
                  f"{r['val_mse']:10.4f}  {r['best_epoch']}/{r['epochs_run']}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "score": _cmd_score,
    "detect": _cmd_detect,
    "match": _cmd_match,
    "report": _cmd_report,
    "ablate": _cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _merge_config(args, argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except DiagError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
