"""Experiment command line: train, sweep, compare-ms-ss, rank-energy,
preprocess, split, convert-check.

Every command records a run manifest (config snapshot, dataset paths,
seeds, timestamps, version) so a run can be reproduced exactly; repeated
serial runs with the same manifest produce bit-identical result files.

Exit codes: 0 success, 2 usage error, 3 data-format error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import struct
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    MAGIC,
    VERSION,
    FormatError,
    SplitSpec,
    build_validation_split,
    grayscale_to_rgb32,
    read_container,
    read_idx,
    write_container,
    write_record,
)
from .model import ModelConfig, build_model, load_checkpoint, save_checkpoint
from .preprocess import preprocess_images
from .training import TrainConfig, evaluate, train_epoch

#: Reference validation error rates (percent) reported for the original
#: full-scale pooling sweep; juxtaposed with desk-scale results so the two
#: are never conflated.
SWEEP_REFERENCE = {2.0: 5.62, 4.0: 5.64, 12.0: 5.61, math.inf: 7.57}

#: Reference single-stage vs multi-stage validation errors (percent) and
#: the relative improvement for the full-scale runs.
COMPARE_REFERENCE = {"ss": 5.72, "ms": 5.67, "improvement_pct": 0.9}

DEFAULT_SWEEP_PS = (1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 32.0, math.inf)


def _parse_p(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid pooling exponent {text!r}")
    if not p >= 1:
        raise argparse.ArgumentTypeError(
            f"pooling exponent must be >= 1 (or 'inf'), got {text}")
    return p


def _parse_p_list(text: str) -> list[float]:
    return [_parse_p(item) for item in text.split(",") if item]


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}")


def _fmt_p(p: float) -> str:
    if math.isinf(p):
        return "inf"
    return f"{p:g}"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=_parse_p, default=2.0,
                        help="pooling exponent, >= 1 or 'inf' (default 2)")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--ms", dest="multi_stage", action="store_true",
                       default=True, help="multi-stage features (default)")
    group.add_argument("--ss", dest="multi_stage", action="store_false",
                       help="single-stage features")
    parser.add_argument("--stage1-features", type=int, default=16)
    parser.add_argument("--stage2-features", type=int, default=512)
    parser.add_argument("--hidden-units", type=int, default=20)
    parser.add_argument("--norm-kernel", type=int, default=5)


def _add_train_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--lr-decay", type=float, default=1e-5)
    parser.add_argument("--l2", type=float, default=1e-5)
    parser.add_argument("--batch-size", type=int, default=1)


def _model_config(args, seed: int | None = None, multi_stage: bool | None = None,
                  p: float | None = None) -> ModelConfig:
    return ModelConfig(
        pooling_p=args.p if p is None else p,
        multi_stage=args.multi_stage if multi_stage is None else multi_stage,
        stage1_features=args.stage1_features,
        stage2_features=args.stage2_features,
        hidden_units=args.hidden_units,
        norm_kernel=args.norm_kernel,
        seed=args.seed if seed is None else seed,
    )


def _train_config(args, seed: int | None = None) -> TrainConfig:
    return TrainConfig(lr0=args.lr, lr_decay=args.lr_decay, l2=args.l2,
                       epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed if seed is None else seed)


def load_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a container and return (preprocessed f64 images, labels).

    u8 containers are normalized here; f64 containers are assumed to be
    already preprocessed.
    """
    images, labels = read_container(path)
    if images.dtype == np.uint8:
        images = preprocess_images(images)
    return images.astype(np.float64), labels


class _Manifest:
    def __init__(self, command: str, config: dict):
        self.record = {
            "command": command,
            "version": f"lpnet-{__version__}",
            "config": config,
            "started_at": _utc_now(),
        }

    def write(self, path) -> None:
        self.record["finished_at"] = _utc_now()
        Path(path).write_text(json.dumps(self.record, indent=2, sort_keys=True) + "\n")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _train_one(model_cfg: ModelConfig, train_cfg: TrainConfig,
               train_set, val_set=None, log=None, snapshot=None):
    """Train a fresh model; returns (model, per-epoch rows)."""
    images, labels = train_set
    model = build_model(model_cfg)
    rows = []
    step = 0
    for epoch in range(train_cfg.epochs):
        lr_now = train_cfg.lr0 / (1.0 + train_cfg.lr_decay * step)
        energy, step = train_epoch(model, images, labels, train_cfg, epoch, step)
        val_error = None
        if val_set is not None:
            val_error = evaluate(model, val_set[0], val_set[1]).error_rate
        rows.append([epoch, energy, val_error, lr_now])
        if snapshot:
            snapshot(model, epoch)
        if log:
            msg = f"epoch {epoch}: energy {energy:.4f}"
            if val_error is not None:
                msg += f", val error {val_error:.4f}"
            log(msg)
    return model, rows


def cmd_train(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_cfg = _model_config(args)
    train_cfg = _train_config(args)
    manifest = _Manifest("train", {
        "model": model_cfg.to_dict(),
        "train": asdict(train_cfg),
        "data": str(args.data),
        "val": str(args.val) if args.val else None,
    })
    train_set = load_dataset(args.data)
    val_set = load_dataset(args.val) if args.val else None
    log = None if args.quiet else lambda msg: print(msg, flush=True)
    snapshot = None
    if args.checkpoint_every:
        def snapshot(model, epoch, every=args.checkpoint_every):
            if (epoch + 1) % every == 0:
                save_checkpoint(model, out_dir / f"checkpoint-epoch{epoch}.cnd")
    model, rows = _train_one(model_cfg, train_cfg, train_set, val_set, log,
                             snapshot)
    _write_csv(out_dir / "metrics.csv",
               ["epoch", "train_energy", "val_error", "lr"], rows)
    save_checkpoint(model, out_dir / "checkpoint.cnd")
    manifest.write(out_dir / "manifest.json")
    return 0


def cmd_sweep(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ps = args.p_list
    seeds = args.seeds
    manifest = _Manifest("sweep", {
        "model": _model_config(args).to_dict(),
        "train": asdict(_train_config(args)),
        "data": str(args.data),
        "val": str(args.val),
        "p_list": [_fmt_p(p) for p in ps],
        "seeds": seeds,
    })
    train_set = load_dataset(args.data)
    val_set = load_dataset(args.val)
    rows = []
    for p in ps:
        for seed in seeds:
            model_cfg = _model_config(args, seed=seed, p=p)
            train_cfg = _train_config(args, seed=seed)
            model, _ = _train_one(model_cfg, train_cfg, train_set)
            err = evaluate(model, val_set[0], val_set[1]).error_rate
            rows.append([_fmt_p(p), seed, err, SWEEP_REFERENCE.get(p)])
            if not args.quiet:
                print(f"p={_fmt_p(p)} seed={seed}: val error {err:.4f}", flush=True)
    _write_csv(out_dir / "sweep.csv",
               ["p", "seed", "val_error", "reference_error_pct"], rows)
    manifest.write(out_dir / "manifest.json")
    return 0


def cmd_compare_ms_ss(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = args.seeds
    manifest = _Manifest("compare-ms-ss", {
        "model": _model_config(args).to_dict(),
        "train": asdict(_train_config(args)),
        "data": str(args.data),
        "val": str(args.val),
        "seeds": seeds,
    })
    train_set = load_dataset(args.data)
    val_set = load_dataset(args.val)
    rows = []
    for seed in seeds:
        errors = {}
        for variant, multi_stage in (("ss", False), ("ms", True)):
            model_cfg = _model_config(args, seed=seed, multi_stage=multi_stage)
            train_cfg = _train_config(args, seed=seed)
            model, _ = _train_one(model_cfg, train_cfg, train_set)
            errors[variant] = evaluate(model, val_set[0], val_set[1]).error_rate
            manifest.record.setdefault("classifier_inputs", {})[variant] = \
                model.plan["features"][0]
        improvement = None
        if errors["ss"] > 0:
            improvement = 100.0 * (errors["ss"] - errors["ms"]) / errors["ss"]
        for variant in ("ss", "ms"):
            rows.append([seed, variant, errors[variant],
                         COMPARE_REFERENCE[variant], improvement])
        if not args.quiet:
            print(f"seed={seed}: ss {errors['ss']:.4f} ms {errors['ms']:.4f}",
                  flush=True)
    _write_csv(out_dir / "compare.csv",
               ["seed", "variant", "val_error", "reference_error_pct",
                "improvement_pct"], rows)
    manifest.write(out_dir / "manifest.json")
    return 0


def cmd_rank_energy(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_checkpoint(args.checkpoint)
    manifest = _Manifest("rank-energy", {
        "model": model.config.to_dict(),
        "checkpoint": str(args.checkpoint),
        "data": str(args.data),
        "k": args.k,
    })
    images, labels = load_dataset(args.data)
    metrics = evaluate(model, images, labels)
    k = args.k
    if k > images.shape[0]:
        print(f"warning: k={k} exceeds dataset size {images.shape[0]}, clamping",
              file=sys.stderr)
        k = images.shape[0]
    order = np.argsort(-np.asarray(metrics.per_sample_energy), kind="stable")[:k]
    rows = []
    for rank, idx in enumerate(order):
        logits, _, _ = model.forward(images[idx])
        rows.append([rank, int(idx), int(labels[idx]), int(np.argmax(logits)),
                     metrics.per_sample_energy[idx]])
    _write_csv(out_dir / "energies.csv",
               ["rank", "index", "label", "prediction", "energy"], rows)
    with open(out_dir / "energy_y.cnd", "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        write_record(f, images[order][:, 0, :, :].astype(np.float64))
    manifest.write(out_dir / "manifest.json")
    return 0


def cmd_preprocess(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.data:
        manifest = _Manifest("preprocess", {"data": str(args.data), "out": str(out)})
        images, labels = read_container(args.data)
        if images.dtype != np.uint8:
            raise ValueError(f"{args.data} already holds preprocessed images")
    else:
        if not args.images or not args.labels:
            raise ValueError("provide either --data or both --images and --labels")
        manifest = _Manifest("preprocess", {
            "images": str(args.images), "labels": str(args.labels),
            "out": str(out), "raw": args.raw,
        })
        raw_images = read_idx(args.images)
        labels = read_idx(args.labels)
        if raw_images.ndim != 3 or labels.ndim != 1:
            raise FormatError(
                f"expected 3-d images and 1-d labels, got {raw_images.shape} "
                f"and {labels.shape}")
        if raw_images.shape[0] != labels.shape[0]:
            raise FormatError(
                f"{raw_images.shape[0]} images but {labels.shape[0]} labels")
        images = grayscale_to_rgb32(raw_images.astype(np.uint8))
        labels = labels.astype(np.uint8)
    if args.raw:
        write_container(out, images, labels)
    else:
        write_container(out, preprocess_images(images), labels)
    manifest.write(str(out) + ".manifest.json")
    return 0


def cmd_split(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SplitSpec(per_class_from_train=args.per_class_train,
                     per_class_from_extra=args.per_class_extra,
                     seed=args.seed)
    manifest = _Manifest("split", {
        "train": str(args.train), "extra": str(args.extra),
        "split": asdict(spec),
    })
    train_images, train_labels = read_container(args.train)
    extra_images, extra_labels = read_container(args.extra)
    if train_images.dtype != extra_images.dtype:
        raise ValueError("train and extra containers must share a dtype")
    split = build_validation_split(train_labels, extra_labels, spec)
    val_images = np.concatenate([train_images[split.val_train],
                                 extra_images[split.val_extra]])
    val_labels = np.concatenate([train_labels[split.val_train],
                                 extra_labels[split.val_extra]])
    write_container(out_dir / "validation.cnd", val_images, val_labels)
    write_container(out_dir / "train_rest.cnd",
                    train_images[split.rest_train], train_labels[split.rest_train])
    write_container(out_dir / "extra_rest.cnd",
                    extra_images[split.rest_extra], extra_labels[split.rest_extra])
    manifest.record["sizes"] = {
        "validation": int(val_labels.size),
        "train_rest": int(split.rest_train.size),
        "extra_rest": int(split.rest_extra.size),
    }
    manifest.write(out_dir / "manifest.json")
    return 0


def cmd_convert_check(args) -> int:
    images, labels = read_container(args.data)
    histogram = np.bincount(labels, minlength=10).tolist()
    summary = {
        "path": str(args.data),
        "samples": int(labels.size),
        "dtype": str(images.dtype),
        "label_histogram": histogram,
        "valid": True,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = _Manifest("convert-check", {"data": str(args.data)})
        manifest.record["summary"] = summary
        manifest.write(out_dir / "manifest.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpnet",
        description="Lp-pooling convolutional network experiments")
    parser.add_argument("--version", action="version",
                        version=f"lpnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model, log per-epoch metrics")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--val")
    _add_model_args(p_train)
    _add_train_args(p_train)
    p_train.add_argument("--checkpoint-every", type=int, default=0, metavar="N",
                         help="also snapshot the model every N epochs")
    p_train.add_argument("--out-dir", required=True)
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="train one model per pooling exponent")
    p_sweep.add_argument("--data", required=True)
    p_sweep.add_argument("--val", required=True)
    _add_model_args(p_sweep)
    _add_train_args(p_sweep)
    p_sweep.add_argument("--p-list", type=_parse_p_list,
                         default=list(DEFAULT_SWEEP_PS),
                         help="comma-separated exponents (default 1,2,4,8,12,16,32,inf)")
    p_sweep.add_argument("--seeds", type=_parse_seeds, default=[0])
    p_sweep.add_argument("--out-dir", required=True)
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare-ms-ss",
                           help="paired multi-stage vs single-stage runs")
    p_cmp.add_argument("--data", required=True)
    p_cmp.add_argument("--val", required=True)
    _add_model_args(p_cmp)
    _add_train_args(p_cmp)
    p_cmp.add_argument("--seeds", type=_parse_seeds, default=[0])
    p_cmp.add_argument("--out-dir", required=True)
    p_cmp.add_argument("--quiet", action="store_true")
    p_cmp.set_defaults(func=cmd_compare_ms_ss)

    p_rank = sub.add_parser("rank-energy",
                            help="list highest-energy samples and dump their luma maps")
    p_rank.add_argument("--checkpoint", required=True)
    p_rank.add_argument("--data", required=True)
    p_rank.add_argument("--k", type=int, default=64)
    p_rank.add_argument("--out-dir", required=True)
    p_rank.set_defaults(func=cmd_rank_energy)

    p_pre = sub.add_parser("preprocess",
                           help="normalize a raw container, or import IDX files")
    p_pre.add_argument("--data", help="raw u8 container to normalize")
    p_pre.add_argument("--images", help="IDX image file to import")
    p_pre.add_argument("--labels", help="IDX label file to import")
    p_pre.add_argument("--raw", action="store_true",
                       help="skip normalization, package pixels as-is")
    p_pre.add_argument("--out", required=True)
    p_pre.set_defaults(func=cmd_preprocess)

    p_split = sub.add_parser("split",
                             help="draw a per-class validation split from two containers")
    p_split.add_argument("--train", required=True)
    p_split.add_argument("--extra", required=True)
    p_split.add_argument("--per-class-train", type=int, default=400)
    p_split.add_argument("--per-class-extra", type=int, default=200)
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--out-dir", required=True)
    p_split.set_defaults(func=cmd_split)

    p_check = sub.add_parser("convert-check",
                             help="validate a container and print a summary")
    p_check.add_argument("--data", required=True)
    p_check.add_argument("--out-dir")
    p_check.set_defaults(func=cmd_convert_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
