"""``cistgcn`` command-line interface.

Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure, 5 verification
failure. Errors are reported on stderr as one line ``error: <category>: <message>``.
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import evaluation, interpret
from .config import ConfigError, RunConfig
from .data import FormatError, PoseSequence, SequenceDataset, load_pseq, save_pseq, synth_dataset
from .data.synth import CLASSES
from .tensor import NumericError
from .tensor.dump import TensorFormatError
from .training.checkpoint import CheckpointError
from .training.trainer import Trainer, forecast, load_model

log = logging.getLogger("cistgcn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, category, message, code):
        super().__init__(message)
        self.category, self.code = category, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_USAGE)


def _floats(text):
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _override(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def _resolve(args, extra=None):
    overrides = dict(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    overrides.update(extra or {})
    cfg = RunConfig.load(getattr(args, "config", None), overrides)
    for line in cfg.lines():
        log.info("config %s", line)
    return cfg


def _write_resolved(cfg, directory):
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "config.resolved"), "w", encoding="utf-8") as f:
        f.write("\n".join(cfg.lines()) + "\n")


def _load_data(path):
    if not path:
        raise CliError("usage", "--data is required", EXIT_USAGE)
    return SequenceDataset.load(path)


def cmd_synth(args):
    extra = {k: v for k, v in (("data.count", args.count), ("data.frames", args.frames),
                               ("data.classes", args.classes), ("data.fps", args.fps),
                               ("data.joints", args.joints)) if v is not None}
    cfg = _resolve(args, extra)
    classes = tuple(c.strip() for c in cfg["data.classes"].split(",") if c.strip())
    unknown = set(classes) - set(CLASSES)
    if unknown:
        raise CliError("usage", f"unknown classes {sorted(unknown)}; choose from {CLASSES}", EXIT_USAGE)
    ds = synth_dataset(cfg["data.count"], classes, cfg["data.frames"], cfg["data.joints"],
                       cfg["data.fps"], cfg["seed"])
    ds.save(args.out)
    _write_resolved(cfg, args.out)
    print(f"wrote {len(ds.sequences)} sequences to {args.out}")


def cmd_train(args):
    extra = {"train.epochs": args.epochs} if args.epochs is not None else {}
    cfg = _resolve(args, extra)
    dataset = _load_data(args.data)
    if args.resume:
        trainer = Trainer.from_checkpoint(args.resume, dataset)
        if args.epochs is not None:
            trainer.config.epochs = args.epochs
        log.info("resumed from %s at epoch %d", args.resume, trainer.epoch)
    else:
        trainer = Trainer.create(cfg.model_config(), cfg.train_config(), dataset)
    os.makedirs(args.out, exist_ok=True)
    _write_resolved(cfg, args.out)
    history = trainer.fit(log_path=os.path.join(args.out, "train.log"), checkpoint_dir=args.out,
                          validate=not args.no_val)
    if history:
        last = history[-1]
        val = "" if args.no_val else f" val {last.val_mpjpe:.4f}"
        print(f"epoch {last.epoch}: loss {last.loss:.4f}{val}")


def _eval_windows(cfg, dataset, model, split_key, stride_key):
    c = model.config
    windows = dataset.windows(cfg[split_key], c.t1, c.t2, cfg[stride_key])
    if len(windows) == 0:
        raise CliError("data", f"split {cfg[split_key]!r} has no windows of {c.t1}+{c.t2} frames",
                       EXIT_DATA)
    return windows


def _fps(dataset, cfg):
    return dataset.sequences[0].fps if dataset.sequences else cfg["data.fps"]


def cmd_eval(args):
    extra = {k: v for k, v in (("eval.horizons", args.horizons), ("eval.sampling", args.sampling),
                               ("eval.split", args.split), ("eval.format", args.format)) if v is not None}
    if args.averaged:
        extra["eval.averaged"] = True
    cfg = _resolve(args, extra)
    dataset = _load_data(args.data)
    model = load_model(args.checkpoint)
    windows = _eval_windows(cfg, dataset, model, "eval.split", "eval.window_stride")
    horizons = [int(v) for v in _floats(cfg["eval.horizons"])]
    predictor = evaluation.ZeroVelocity(model.config.t2) if args.baseline else model
    table = evaluation.evaluate(predictor, windows, horizons, _fps(dataset, cfg), cfg["eval.sampling"],
                                cfg["eval.per_action"], cfg["seed"], cfg["eval.averaged"], args.workers)
    evaluation.emit_report(table, args.out, cfg["eval.format"])
    print(f"average MPJPE at {horizons[-1]} ms: {table.rows['average'][-1]:.3f} mm")


def cmd_sweep(args):
    cfg = _resolve(args, {"eval.format": args.format} if args.format else {})
    dataset = _load_data(args.data)
    model = load_model(args.checkpoint)
    windows = _eval_windows(cfg, dataset, model, "eval.split", "eval.window_stride")
    try:
        report = evaluation.robustness_sweep(model, windows, args.kind, args.grid, cfg["seed"],
                                             workers=args.workers)
    except ValueError as e:
        raise CliError("usage", str(e), EXIT_USAGE) from None
    evaluation.emit_report(report, args.out, cfg["eval.format"])
    print(f"{args.kind} sweep max/min MPJPE ratio {report.ratio:.3f}")


def cmd_interpret(args):
    cfg = _resolve(args)
    dataset = _load_data(args.data)
    model = load_model(args.checkpoint)
    windows = _eval_windows(cfg, dataset, model, "interpret.split", "interpret.window_stride")
    os.makedirs(args.out, exist_ok=True)
    records = interpret.importance_table(model, windows)
    interpret.write_importance_tsv(records, os.path.join(args.out, "importance.tsv"))
    analysis = interpret.centroid_analysis(records)
    interpret.write_centroids_tsv(analysis, os.path.join(args.out, "centroids.tsv"))
    coords, _ = interpret.pca_project(records, cfg["interpret.pca_dims"], seed=cfg["seed"])
    interpret.write_pca_tsv(records, coords, os.path.join(args.out, "pca.tsv"))
    count = min(cfg["interpret.bundles"], len(windows))
    _, bundle = interpret.extract_bundle(model, windows.inputs[:count])
    for i in range(count):
        interpret.export_bundle(bundle.sample(i), os.path.join(args.out, "bundles", f"{i:05d}"))
    sep = analysis["separation"]
    print(f"{len(records)} importance records; separation "
          f"{'n/a' if sep is None else f'{sep:.4f}'}; {count} bundles exported")


def cmd_predict(args):
    _resolve(args)
    model = load_model(args.checkpoint)
    seq = load_pseq(args.input)
    c = model.config
    if seq.n_frames < c.t1 or seq.n_joints != c.joints:
        raise CliError("data", f"input needs >= {c.t1} frames of {c.joints} joints, got "
                       f"{seq.n_frames}x{seq.n_joints}", EXIT_DATA)
    window = seq.frames[-c.t1:][None]
    pred = forecast(model, window)[0]
    out = PoseSequence(pred, seq.fps, seq.action_label, seq.subject_id + "-pred" if seq.subject_id else "pred")
    save_pseq(out, args.out)
    print(f"wrote {c.t2} predicted frames to {args.out}")


def cmd_gradcheck(args):
    from .verification import run_suite
    cfg = _resolve(args)
    passed, results, seconds = run_suite(cfg.model_config(), samples=args.samples, seed=cfg["seed"])
    print(f"gradcheck {'passed' if passed else 'FAILED'}: {len(results)} checks in {seconds:.1f}s")
    if not passed:
        failed = ", ".join(name for name, r in results if not r.passed)
        raise CliError("verification", f"gradient mismatch in {failed}", EXIT_VERIFY)


def build_parser():
    p = _Parser(prog="cistgcn", description="CIST-GCN motion forecasting toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, fn, help_text):
        s = sub.add_parser(name, help=help_text)
        s.set_defaults(func=fn)
        s.add_argument("--config", help="key=value config file")
        s.add_argument("--set", action="append", type=_override, metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        s.add_argument("--seed", type=int, help="global seed (default: $CISTGCN_SEED or 0)")
        s.add_argument("--workers", type=int, default=1, help="evaluation worker threads")
        s.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
        return s

    s = command("synth", cmd_synth, "generate a synthetic dataset")
    s.add_argument("--classes")
    s.add_argument("--frames", type=int)
    s.add_argument("--count", type=int)
    s.add_argument("--fps", type=float)
    s.add_argument("--joints", type=int)
    s.add_argument("--out", required=True)

    s = command("train", cmd_train, "train a model")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="directory for checkpoints and train.log")
    s.add_argument("--epochs", type=int)
    s.add_argument("--resume", help="checkpoint to continue from")
    s.add_argument("--no-val", action="store_true", help="skip validation after each epoch")

    s = command("eval", cmd_eval, "horizon MPJPE table")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--horizons", help="comma-separated milliseconds")
    s.add_argument("--sampling", choices=evaluation.SAMPLINGS)
    s.add_argument("--split")
    s.add_argument("--averaged", action="store_true", help="average frames 1..h instead of frame h")
    s.add_argument("--baseline", action="store_true", help="evaluate the zero-velocity predictor")
    s.add_argument("--format", choices=("tsv", "jsonl"))
    s.add_argument("--out", required=True)

    s = command("sweep", cmd_sweep, "robustness sweep")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--kind", choices=evaluation.SWEEP_KINDS, required=True)
    s.add_argument("--grid", type=_floats, required=True, help="a,b,c or start:stop:step")
    s.add_argument("--format", choices=("tsv", "jsonl"))
    s.add_argument("--out", required=True)

    s = command("interpret", cmd_interpret, "export maps, importance vectors and cluster analysis")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)

    s = command("predict", cmd_predict, "forecast the frames following a PSEQ file")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)

    s = command("gradcheck", cmd_gradcheck, "finite-difference verification suite")
    s.add_argument("--samples", type=int, default=200, help="model parameters to check")
    return p


def _classify(exc):
    if isinstance(exc, CliError):
        return exc.category, exc.code
    if isinstance(exc, (ConfigError, KeyError)):
        return "usage", EXIT_USAGE
    if isinstance(exc, NumericError):
        return "numeric", EXIT_NUMERIC
    if isinstance(exc, (FormatError, CheckpointError, TensorFormatError, OSError)):
        return "data", EXIT_DATA
    if isinstance(exc, ValueError):
        return "usage", EXIT_USAGE
    return None, None


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise CliError("usage", "a command is required (try --help)", EXIT_USAGE)
        if args.workers < 1:
            raise CliError("usage", "--workers must be >= 1", EXIT_USAGE)
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one error line
        category, code = _classify(exc)
        if category is None:
            raise
        message = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"error: {category}: {' '.join(message.split())}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
