"""Command-line entry point: ``msmr <subcommand> ...``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

log = logging.getLogger("msmr")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msmr", description="Hand mesh hierarchy, scene generation, training and evaluation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("build-hierarchy", help="build a multi-level mesh hierarchy from the hand template")
    h.add_argument("--out", required=True, type=Path)
    h.add_argument("--levels", type=_positive, default=5)
    h.add_argument("--finest-count", type=_positive, default=None, help="decimate the template to this size first")
    h.add_argument("--spiral-lengths", type=_ints, default=None)
    h.add_argument("--toy", action="store_true", help="4 levels from a 20-vertex finest mesh")

    g = sub.add_parser("gen-scenes", help="generate interaction scenes with masks and a manifest")
    g.add_argument("--count", required=True, type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mode", choices=["hand-hand", "hand-object"], default="hand-hand")
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--threads", type=_positive, default=1)
    g.add_argument("--size", type=_positive, default=224, help="image width and height in pixels")
    g.add_argument("--angle-limit", type=float, default=60.0, help="joint angle limit in degrees")

    t = sub.add_parser("train-toy", help="train the mesh network on a generated dataset")
    t.add_argument("--data", required=True, type=Path, help="gen-scenes output directory")
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--hierarchy", type=Path, default=None, help="default: the toy hierarchy")
    t.add_argument("--config", type=Path, default=None, help="experiment config JSON")
    t.add_argument("--epochs", type=_positive, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--single-path", action="store_true")
    t.add_argument("--no-attention", action="store_true")

    pr = sub.add_parser("predict", help="predict hand meshes for every scene of a dataset")
    pr.add_argument("--model", required=True, type=Path)
    pr.add_argument("--data", required=True, type=Path)
    pr.add_argument("--out", required=True, type=Path)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--pred", required=True, type=Path)
    e.add_argument("--gt", required=True, type=Path)
    e.add_argument("--out", required=True, type=Path)

    v = sub.add_parser("vr-report", help="metrics bucketed by visibility ratio, as CSV")
    v.add_argument("--manifest", required=True, type=Path)
    v.add_argument("--pred", required=True, type=Path)
    v.add_argument("--out", required=True, type=Path)
    return p


def cmd_build_hierarchy(args) -> None:
    from msmr.hierarchy.pyramid import build_hierarchy, save_hierarchy
    from msmr.mesh.assets import load_hand
    from msmr.pipeline import experiment

    if args.toy:
        h = experiment.toy_hierarchy()
    else:
        asset = load_hand()
        h = build_hierarchy(asset.mesh, args.levels, args.spiral_lengths, asset.regressor, finest_count=args.finest_count)
    save_hierarchy(h, args.out)
    print(f"levels: {h.counts}")


def cmd_gen_scenes(args) -> None:
    from msmr.pipeline.experiment import generate_dataset
    from msmr.scenegen.generate import GenerationConfig
    from msmr.scenegen.raster import Camera

    if args.count < 0:
        raise ValueError("--count must be non-negative")
    cfg = GenerationConfig(angle_limit_deg=args.angle_limit)
    cam = Camera.centred(args.size, focal=500.0 * args.size / 224)
    m = generate_dataset(args.out, args.count, args.seed, args.mode, args.threads, cam, cfg)
    print(f"wrote {len(m)} scenes to {args.out}")


def cmd_train_toy(args) -> None:
    from msmr.hierarchy.pyramid import load_hierarchy
    from msmr.pipeline import experiment
    from msmr.pipeline.config import ExperimentConfig, toy_model_config, toy_train_config
    from msmr.pipeline.manifest import load_manifest

    if args.config is not None:
        exp = ExperimentConfig.load(args.config)
        model_cfg, train_cfg = exp.model, exp.train
        hierarchy = load_hierarchy(exp.resolve(args.config.parent))
    else:
        model_cfg = toy_model_config(single_path=args.single_path, attention=not args.no_attention)
        train_cfg = toy_train_config(seed=args.seed)
        hierarchy = load_hierarchy(args.hierarchy) if args.hierarchy else experiment.toy_hierarchy()
    if args.epochs is not None:
        train_cfg.epochs = args.epochs
    manifest = load_manifest(args.data)

    def report(e):
        print(f"epoch {e.epoch:3d}  lr {e.lr:.2e}  loss {e.loss:.6f}", flush=True)

    outcome = experiment.train_model(manifest, hierarchy, model_cfg, train_cfg, on_epoch=report)
    experiment.save_model(args.out, outcome, train_cfg)
    print(f"parameters: {outcome.model.n_parameters()}")


def cmd_predict(args) -> None:
    from msmr.pipeline import experiment
    from msmr.pipeline.manifest import load_manifest

    n = experiment.predict_dataset(experiment.load_model(args.model), load_manifest(args.data), args.out)
    print(f"wrote {n} predictions to {args.out}")


def cmd_eval(args) -> None:
    from msmr.pipeline import experiment

    report = experiment.evaluate_predictions(args.pred, args.gt)
    experiment.write_json(args.out, report)
    print(" ".join(f"{k}={v:.4f}" for k, v in report["mean"].items()))


def cmd_vr_report(args) -> None:
    from msmr.metrics.visibility import format_report
    from msmr.pipeline import experiment
    from msmr.pipeline.atomic import atomic_write_text

    text = format_report(experiment.vr_rows(args.pred, args.manifest))
    atomic_write_text(args.out, text)
    sys.stdout.write(text)


COMMANDS = {
    "build-hierarchy": cmd_build_hierarchy,
    "gen-scenes": cmd_gen_scenes,
    "train-toy": cmd_train_toy,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "vr-report": cmd_vr_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # any module error is a domain failure
        log.info("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
