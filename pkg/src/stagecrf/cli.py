"""Command-line workflow: synthesize, train, decode, evaluate, ablate.

Every command takes an ``-o`` output directory and leaves a manifest.json
there recording the fully resolved configuration, the seed, input and output
paths, a sha256 per written artifact, and the wall-clock time. Reruns with
the same inputs produce byte-identical artifacts; only the manifest's clock
differs.

Exit codes: 0 success, 1 bad usage or flag values, 2 broken or mismatched
data files, 3 numeric failure during training.
"""

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import data, metrics, potentials
from .errors import DataError, NumericError
from .train import TrainConfig, fit

SPLIT_NAMES = ("train", "val", "test")
DECODE_MODES = ("argmax", "dp-unary", "crf")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data problems
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, command, config, seed, inputs, outputs, started):
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "artifacts": {
            str(Path(p).relative_to(out_dir)): _sha256(p) for p in outputs.values()
        },
        "wall_clock_seconds": round(time.monotonic() - started, 3),
    }
    path = Path(out_dir) / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fractions(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions")
    return tuple(parts)


def _weights(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated weights")
    return tuple(parts)


def _load_split(root, name):
    path = Path(root) / f"{name}.jsonl"
    if not path.exists():
        raise DataError(f"missing split file {path}")
    return data.load_jsonl(path)


def _resolve_dataset(path_arg, split):
    path = Path(path_arg)
    if path.is_dir():
        return Path(path) / f"{split}.jsonl"
    return path


def cmd_synth(args):
    started = time.monotonic()
    overrides = {}
    for flag, key in (
        ("classes", "num_classes"),
        ("dim", "feature_dim"),
        ("mean_length", "mean_length"),
        ("decay", "duration_decay"),
        ("noise", "noise_sigma"),
        ("confusion", "confusion_rate"),
        ("drift", "ordinal_drift"),
        ("event", "event_strength"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    config = data.preset_config(args.preset, args.videos, seed=args.seed, **overrides)

    videos = data.generate(config)
    parts = data.split(videos, args.fractions, seed=args.seed)

    out = _out_dir(args)
    outputs = {"dataset": out / "dataset.jsonl"}
    data.save_jsonl(outputs["dataset"], videos)
    for name, part in zip(SPLIT_NAMES, parts):
        outputs[name] = out / f"{name}.jsonl"
        data.save_jsonl(outputs[name], part)

    resolved = {
        "preset": args.preset,
        "fractions": list(args.fractions),
        **{k: getattr(config, k) for k in (
            "num_videos", "num_classes", "feature_dim", "mean_length",
            "duration_decay", "noise_sigma", "confusion_rate",
            "ordinal_drift", "event_strength", "seed",
        )},
    }
    _write_manifest(out, "synth", resolved, args.seed, {}, outputs, started)
    print(f"wrote {len(videos)} videos to {out}")
    return 0


def _train_one(train_videos, val_videos, args, loss_weights, val_decode_mode):
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        frames_per_video=args.frames_per_video,
        seed=args.seed,
        loss_weights=loss_weights,
        patience=args.patience,
        feature_jitter=args.jitter,
        val_decode_mode=val_decode_mode,
    )
    state, history = fit(train_videos, val_videos, config, num_classes=args.classes)
    return config, state, history


def _write_training_outputs(out, state, history, smooth_decode):
    outputs = {"checkpoint": out / "checkpoint.json", "log": out / "train_log.jsonl"}
    potentials.save_checkpoint(outputs["checkpoint"], state.model, smooth_decode=smooth_decode)
    with open(outputs["log"], "w", encoding="utf-8") as fh:
        for record in history:
            json.dump(record, fh)
            fh.write("\n")
    return outputs


ABLATION_SETTINGS = {
    # rung name -> (loss weights, validation decode mode, smoothing hint)
    "argmax": ((0.0, 1.0, 0.0), "argmax", False),
    "dp-unary": ((0.0, 1.0, 0.0), "dp-unary", True),
    "crf": (None, "crf", True),
}


def cmd_train(args):
    started = time.monotonic()
    train_videos = _load_split(args.data, "train")
    val_videos = _load_split(args.data, "val")

    if args.ablation is None:
        loss_weights, mode, smooth = args.loss_weights, "crf", True
    else:
        rung = {"argmax": "argmax", "unary-dp": "dp-unary"}[args.ablation]
        rung_weights, mode, smooth = ABLATION_SETTINGS[rung]
        loss_weights = rung_weights or args.loss_weights

    config, state, history = _train_one(train_videos, val_videos, args, loss_weights, mode)
    out = _out_dir(args)
    outputs = _write_training_outputs(out, state, history, smooth)

    resolved = {
        "epochs": config.epochs, "learning_rate": config.learning_rate,
        "batch_size": config.batch_size, "frames_per_video": config.frames_per_video,
        "loss_weights": list(config.loss_weights), "patience": config.patience,
        "feature_jitter": config.feature_jitter, "val_decode_mode": config.val_decode_mode,
        "ablation": args.ablation, "num_classes": state.model.num_classes,
    }
    _write_manifest(out, "train", resolved, args.seed, {"data": args.data}, outputs, started)
    last = history[-1] if history else {}
    print(f"trained {len(history)} epochs; val global {last.get('val_global', 'n/a')}")
    return 0


def _decode_videos(model, videos, mode, smooth):
    preds = {}
    for video in videos:
        if video.features.shape[1] != model.feature_dim:
            raise DataError(
                f"video {video.id} has feature dim {video.features.shape[1]}, "
                f"checkpoint expects {model.feature_dim}"
            )
        if video.labels.max() > model.num_classes:
            raise DataError(
                f"video {video.id} uses stage {video.labels.max()}, "
                f"checkpoint only has {model.num_classes}"
            )
        preds[video.id] = potentials.predict_labels(model, video.features, mode, smooth)
    return preds


def _save_predictions(path, preds):
    with open(path, "w", encoding="utf-8") as fh:
        for vid in sorted(preds):
            json.dump({"id": vid, "pred": np.asarray(preds[vid]).tolist()}, fh)
            fh.write("\n")


def _load_predictions(path):
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                preds[str(doc["id"])] = np.asarray(doc["pred"], dtype=np.int64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
    return preds


def cmd_decode(args):
    started = time.monotonic()
    model, _ = potentials.load_checkpoint(args.checkpoint)
    dataset_path = _resolve_dataset(args.data, args.split)
    videos = data.load_jsonl(dataset_path)
    smooth = {"auto": None, "on": True, "off": False}[args.smooth]

    preds = _decode_videos(model, videos, args.mode, smooth)
    out = _out_dir(args)
    outputs = {"predictions": out / "predictions.jsonl"}
    _save_predictions(outputs["predictions"], preds)

    resolved = {"mode": args.mode, "smooth": args.smooth, "split": args.split}
    inputs = {"checkpoint": args.checkpoint, "data": dataset_path}
    _write_manifest(out, "decode", resolved, None, inputs, outputs, started)
    print(f"decoded {len(preds)} videos ({args.mode})")
    return 0


def cmd_eval(args):
    started = time.monotonic()
    out = _out_dir(args)
    if args.seeds:
        reports = []
        for run_dir in args.seeds:
            path = Path(run_dir) / "report.json"
            if not path.exists():
                raise DataError(f"missing report file {path}")
            with open(path, encoding="utf-8") as fh:
                reports.append(metrics.EvalReport.from_dict(json.load(fh)))
        aggregated = metrics.aggregate_seeds(reports)
        outputs = {
            "aggregate": out / "aggregate.json",
            "table": out / "aggregate.txt",
        }
        with open(outputs["aggregate"], "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "global": list(aggregated["global"]),
                    "mean_per_stage": list(aggregated["mean_per_stage"]),
                    "per_stage": {str(s): list(v) for s, v in aggregated["per_stage"].items()},
                    "num_runs": len(reports),
                },
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
        table = metrics.format_table(aggregated, title=f"aggregate of {len(reports)} runs")
        outputs["table"].write_text(table, encoding="utf-8")
        inputs = {f"run_{i}": d for i, d in enumerate(args.seeds)}
        _write_manifest(out, "eval", {"seeds": len(reports)}, None, inputs, outputs, started)
        print(table, end="")
        return 0

    preds = _load_predictions(args.pred)
    golds = {v.id: v.labels for v in data.load_jsonl(_resolve_dataset(args.data, args.split))}
    try:
        report = metrics.evaluate(preds, golds)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    outputs = {"report": out / "report.json", "table": out / "report.txt"}
    outputs["report"].write_text(report.to_json(), encoding="utf-8")
    table = metrics.format_report(report, title="evaluation")
    outputs["table"].write_text(table, encoding="utf-8")
    inputs = {"pred": args.pred, "data": args.data}
    _write_manifest(out, "eval", {"split": args.split}, None, inputs, outputs, started)
    print(table, end="")
    return 0


def cmd_ablation(args):
    started = time.monotonic()
    train_videos = _load_split(args.data, "train")
    val_videos = _load_split(args.data, "val")
    test_videos = _load_split(args.data, "test")
    golds = {v.id: v.labels for v in test_videos}

    rungs = args.rungs
    out = _out_dir(args)
    outputs = {}
    # the two unary-only rungs share one trained model; decode differs
    trained = {}
    results = {}
    for rung in rungs:
        loss_weights, mode, smooth_hint = ABLATION_SETTINGS[rung]
        key = loss_weights or tuple(args.loss_weights)
        if key not in trained:
            config, state, history = _train_one(
                train_videos, val_videos, args, key, mode
            )
            trained[key] = state
        state = trained[key]

        rung_dir = out / rung
        rung_dir.mkdir(parents=True, exist_ok=True)
        ckpt = rung_dir / "checkpoint.json"
        potentials.save_checkpoint(ckpt, state.model, smooth_decode=smooth_hint)
        preds = _decode_videos(state.model, test_videos, rung, None)
        pred_path = rung_dir / "predictions.jsonl"
        _save_predictions(pred_path, preds)
        report = metrics.evaluate(preds, golds)
        report_path = rung_dir / "report.json"
        report_path.write_text(report.to_json(), encoding="utf-8")
        outputs[f"{rung}_checkpoint"] = ckpt
        outputs[f"{rung}_predictions"] = pred_path
        outputs[f"{rung}_report"] = report_path
        results[rung] = report

    ordered = [r for r in DECODE_MODES if r in results]
    globals_ = [results[r].global_accuracy for r in ordered]
    comparison = {
        "rungs": {
            r: {"global": results[r].global_accuracy, "mean_per_stage": results[r].mean_per_stage}
            for r in ordered
        },
        "ordering_ok": all(a <= b + 1e-12 for a, b in zip(globals_, globals_[1:])),
    }
    outputs["comparison"] = out / "comparison.json"
    with open(outputs["comparison"], "w", encoding="utf-8") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")

    lines = [f"{'rung':>10}  {'Global':>8}  {'Per-Stage':>9}"]
    for r in ordered:
        lines.append(
            f"{r:>10}  {100 * results[r].global_accuracy:8.1f}  "
            f"{100 * results[r].mean_per_stage:9.1f}"
        )
    if not comparison["ordering_ok"]:
        lines.append("warning: Global accuracy not non-decreasing across rungs")
    text = "\n".join(lines) + "\n"
    outputs["comparison_table"] = out / "comparison.txt"
    outputs["comparison_table"].write_text(text, encoding="utf-8")

    resolved = {
        "rungs": list(rungs), "epochs": args.epochs, "learning_rate": args.lr,
        "batch_size": args.batch_size, "frames_per_video": args.frames_per_video,
        "loss_weights": list(args.loss_weights), "patience": args.patience,
        "feature_jitter": args.jitter,
    }
    _write_manifest(out, "ablation", resolved, args.seed, {"data": args.data}, outputs, started)
    print(text, end="")
    return 0


def _add_train_flags(parser):
    parser.add_argument("--epochs", type=int, required=True, help="training epochs")
    parser.add_argument("--lr", type=float, default=1e-4, help="learning rate")
    parser.add_argument("--batch-size", type=int, default=4)
    parser.add_argument("--frames-per-video", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--loss-weights", type=_weights, default=(1.0, 1.0, 1.0),
        metavar="NLL,IMAGE,CHANGE", help="weights of the three loss terms",
    )
    parser.add_argument("--patience", type=int, default=10,
                        help="early-stop after this many non-improving epochs (0 disables)")
    parser.add_argument("--jitter", type=float, default=0.0,
                        help="sigma of Gaussian feature jitter during training")
    parser.add_argument("--classes", type=int, default=None,
                        help="number of stages (default: largest label in the data)")


def build_parser():
    parser = _Parser(prog="stagecrf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--preset", choices=sorted(data.PRESETS), default="human")
    p.add_argument("--videos", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--mean-length", type=float, default=None)
    p.add_argument("--decay", type=float, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--confusion", type=float, default=None)
    p.add_argument("--drift", type=float, default=None,
                   help="shared-axis weight of each stage-to-stage embedding step")
    p.add_argument("--event", type=float, default=None,
                   help="strength of the stage-start transition marker")
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1),
                   metavar="TRAIN,VAL,TEST")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the two-stream model")
    p.add_argument("-d", "--data", required=True, help="directory with train/val splits")
    _add_train_flags(p)
    p.add_argument("--ablation", choices=("argmax", "unary-dp"), default=None,
                   help="train the image head only, validated under this decode mode")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="predict stage sequences")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("-d", "--data", required=True, help="dataset file or synth directory")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test",
                   help="split to decode when --data is a directory")
    p.add_argument("--mode", choices=DECODE_MODES, default="crf")
    p.add_argument("--smooth", choices=("auto", "on", "off"), default="auto",
                   help="auto: off for argmax, on otherwise")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--pred", help="predictions file")
    p.add_argument("-d", "--data", help="gold dataset file or synth directory")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test")
    p.add_argument("--seeds", nargs="+", default=None,
                   help="aggregate report.json from these run directories instead")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablation", help="compare the three decode rungs")
    p.add_argument("-d", "--data", required=True, help="directory with train/val/test splits")
    _add_train_flags(p)
    p.add_argument("--rungs", type=lambda s: tuple(s.split(",")), default=DECODE_MODES,
                   metavar="RUNG[,RUNG...]")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_ablation)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and not args.seeds and not (args.pred and args.data):
        parser.error("eval needs either --pred and --data, or --seeds")
    if args.command == "ablation":
        bad = [r for r in args.rungs if r not in DECODE_MODES]
        if bad:
            parser.error(f"unknown rung {bad[0]!r}")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"stagecrf: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, FileNotFoundError) as exc:
        print(f"stagecrf: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"stagecrf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
