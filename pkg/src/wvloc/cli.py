"""Command-line pipeline: generate, validate, train, localize, evaluate, compare.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as ds
from . import evaluate as ev
from .model import OutOfMapError, Sample
from .network import DivergenceError, load_checkpoint, save_checkpoint
from .pipeline import (
    DEFAULT_TRAIN_PARAMS,
    BaselineParams,
    FUSION_MODES,
    MODE_MODELS,
    estimates_arrays,
    localize_samples,
    read_estimates,
    train_classifier,
    write_estimates,
)
from .simulate import STREAM_TRAJECTORY, derive_rng, generate_trajectory, simulate_request

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _require_file(path, what) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def cmd_generate(args) -> int:
    try:
        cfg = ds.load_generator_config(_require_file(args.config, "generator config"))
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid generator config: {exc}") from exc
    if args.seed is not None:
        cfg = ds.config_from_dict({**ds.config_to_dict(cfg), "seed": args.seed})
    out = ds.generate_dataset(cfg, args.out)
    problems = ds.validate_dataset(out)
    if problems:
        print("\n".join(problems), file=sys.stderr)
        return EXIT_RUNTIME
    print(f"dataset written to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    _require_file(args.dataset, "dataset directory")
    problems = ds.validate_dataset(args.dataset)
    if problems:
        print("\n".join(problems), file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{args.dataset}: ok")
    return EXIT_OK


def cmd_train(args) -> int:
    _require_file(args.dataset, "dataset directory")
    problems = ds.validate_dataset(args.dataset)
    if problems:
        raise UsageError(f"dataset invalid: {problems[0]}")
    samples, grid, manifest = ds.load_samples(args.dataset, mode=args.association)
    overrides = dict(DEFAULT_TRAIN_PARAMS[args.which])
    for key, value in (("epochs", args.epochs), ("learning_rate", args.learning_rate),
                       ("batch_size", args.batch_size)):
        if value is not None:
            overrides[key] = value
    overrides["seed"] = args.seed
    # the wifi-only net runs at the native feature size D = max(M, K)
    input_size = max(manifest["m"], manifest["k"]) if args.which == "wifi" else None
    model = train_classifier(samples, args.which, grid.n_cells,
                             manifest["image_size"], manifest["s"],
                             input_size=input_size, **overrides)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    log_path = out.with_suffix(".log.csv")
    lines = ["epoch,loss,accuracy"]
    lines += [f"{i},{loss:.6f},{acc:.6f}" for i, (loss, acc) in enumerate(model.training_log)]
    log_path.write_text("\n".join(lines) + "\n")
    final = model.training_log[-1] if model.training_log else (float("nan"), float("nan"))
    print(f"{args.which} model -> {out} (final loss {final[0]:.4f}, "
          f"train acc {final[1]:.3f}, log {log_path})")
    return EXIT_OK


def _load_models(args, mode) -> dict:
    paths = {"wifi": args.wifi_model, "visual": args.visual_model, "joint": args.joint_model}
    models = {}
    for which in MODE_MODELS[mode]:
        if paths[which] is None:
            raise UsageError(f"fusion mode {mode!r} requires --{which}-model")
        model = load_checkpoint(_require_file(paths[which], f"{which} checkpoint"))
        if model.config.source != which:
            raise UsageError(f"{paths[which]} holds a {model.config.source!r} model, "
                             f"expected {which!r}")
        models[which] = model
    return models


def _trajectory_samples(args) -> tuple[list[Sample], "ds.CellGrid"]:
    if args.config is None:
        raise UsageError("--trajectory requires --config (the generator JSON)")
    cfg = ds.load_generator_config(_require_file(args.config, "generator config"))
    spec = json.loads(_require_file(args.trajectory, "trajectory file").read_text())
    try:
        waypoints = spec["waypoints"]
        step = spec["step"]
    except KeyError as exc:
        raise UsageError(f"trajectory file missing field {exc.args[0]!r}") from exc
    seed = args.seed if args.seed is not None else spec.get("seed", cfg.seed + 1)
    grid = cfg.build_grid()
    aps = cfg.effective_aps()
    scene = cfg.effective_scene()
    points = generate_trajectory(grid, waypoints, step)
    n_steps = int(round(360.0 / cfg.plan.rotation_step_deg))
    samples = []
    for i, (x, y, label) in enumerate(points):
        rng = derive_rng(seed, i, STREAM_TRAJECTORY)
        rssi, images = simulate_request((x, y), i % n_steps, cfg.plan, aps, scene, grid, rng)
        samples.append(Sample(label, rssi, images, x, y))
    return samples, grid


def cmd_localize(args) -> int:
    if (args.dataset is None) == (args.trajectory is None):
        raise UsageError("exactly one of --dataset or --trajectory is required")
    if args.dataset is not None:
        _require_file(args.dataset, "dataset directory")
        samples, grid, _ = ds.load_samples(args.dataset, mode=args.association)
    else:
        samples, grid = _trajectory_samples(args)
    models = _load_models(args, args.fusion)
    params = BaselineParams(distance_threshold_d=args.d,
                            probability_threshold_gamma=args.gamma,
                            top_k=args.topk)
    rows = localize_samples(samples, grid, models, args.fusion, params)
    write_estimates(rows, args.out)
    print(f"{len(rows)} estimates ({args.fusion}) -> {args.out}")
    return EXIT_OK


def _mode_labels(args) -> list[str]:
    if args.labels:
        labels = [s.strip() for s in args.labels.split(",")]
        if len(labels) != len(args.estimates):
            raise UsageError(f"{len(labels)} labels for {len(args.estimates)} files")
        return labels
    return [Path(p).stem.removeprefix("estimates_") for p in args.estimates]


def _evaluate_files(args, need_comparison: bool) -> int:
    labels = _mode_labels(args)
    reports = []
    truth_sets = []
    est_by_mode = {}
    for path, label in zip(args.estimates, labels):
        rows = read_estimates(_require_file(path, "estimates file"))
        truths, estimates = estimates_arrays(rows)
        reports.append(ev.compute_metrics(estimates, truths, label))
        truth_sets.append(truths)
        est_by_mode[label] = estimates
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(ev.report_table_csv(reports))
    (out / "cdf.csv").write_text(ev.cdf_table_csv(reports))
    wrote = ["report.csv", "cdf.csv"]
    if len(reports) >= 2 or need_comparison:
        artifact = ev.compare_modes(reports)
        (out / "comparison.svg").write_text(artifact.comparison_svg)
        wrote.append("comparison.svg")
    same_truths = all((t.shape == truth_sets[0].shape) and (t == truth_sets[0]).all()
                      for t in truth_sets)
    if same_truths and not need_comparison:
        bounds = (min(truth_sets[0][:, 0].min(), *(e[:, 0].min() for e in est_by_mode.values())),
                  min(truth_sets[0][:, 1].min(), *(e[:, 1].min() for e in est_by_mode.values())),
                  max(truth_sets[0][:, 0].max(), *(e[:, 0].max() for e in est_by_mode.values())),
                  max(truth_sets[0][:, 1].max(), *(e[:, 1].max() for e in est_by_mode.values())))
        (out / "trajectory.svg").write_text(
            ev.trajectory_svg(truth_sets[0], est_by_mode, bounds))
        wrote.append("trajectory.svg")
    for r in sorted(reports, key=lambda r: (r.rmse, r.mode_label)):
        print(f"{r.mode_label}: RMSE {r.rmse:.3f} m, MAE {r.mae:.3f} m, STD {r.std:.3f} m")
    print(f"artifacts in {out}: {', '.join(wrote)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    return _evaluate_files(args, need_comparison=False)


def cmd_compare(args) -> int:
    if len(args.estimates) < 2:
        raise UsageError("compare needs at least 2 estimates files")
    return _evaluate_files(args, need_comparison=True)


def build_parser() -> _Parser:
    parser = _Parser(prog="wvloc",
                     description="WiFi-Visual soft-fusion localization pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset directory")
    p.add_argument("config", help="generator config JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a dataset directory for consistency")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train one classifier from a dataset")
    p.add_argument("dataset")
    p.add_argument("--which", required=True, choices=("wifi", "visual", "joint"))
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--association", default=None, choices=(None, "diagonal", "full"),
                   help="override the dataset's association mode")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("localize", help="estimate positions for a dataset or trajectory")
    p.add_argument("--dataset", default=None, help="test dataset directory")
    p.add_argument("--trajectory", default=None, help="trajectory JSON (waypoints, step, seed)")
    p.add_argument("--config", default=None, help="generator config JSON (trajectory mode)")
    p.add_argument("--fusion", required=True, choices=FUSION_MODES)
    p.add_argument("--wifi-model", default=None)
    p.add_argument("--visual-model", default=None)
    p.add_argument("--joint-model", default=None)
    p.add_argument("--d", type=float, default=4.0, help="distance threshold (m)")
    p.add_argument("--gamma", type=float, default=0.9, help="probability threshold")
    p.add_argument("--topk", type=int, default=5, help="Top-K candidate count")
    p.add_argument("--association", default=None, choices=(None, "diagonal", "full"))
    p.add_argument("--seed", type=int, default=None, help="trajectory simulation seed")
    p.add_argument("--out", required=True, help="estimates CSV output path")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="metrics and plots from estimates CSVs")
    p.add_argument("estimates", nargs="+")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.add_argument("--labels", default=None, help="comma-separated mode labels")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="comparison artifacts across >= 2 estimate sets")
    p.add_argument("estimates", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, OutOfMapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
