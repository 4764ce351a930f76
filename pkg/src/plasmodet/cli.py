"""Command-line entry point: ``plasmodet {synth,train,detect,eval,activations}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or input-format error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import synth as synth_mod
from .config import ConfigError, RunConfig, load_config
from .evalkit import match_boxes, metrics_report
from .formats import (
    FormatError,
    detection_record,
    image_id,
    load_annotations,
    load_detection_records,
    write_json,
)
from .imaging import normalize_patch, read_rgb, resize, write_rgb
from .nnet import CorruptModelError, TrainingAborted, forward, load_params, save_params, train, write_log_csv
from .pipeline import DetectConfig, detect
from .texture import write_features_csv
from .viz import FILTERED_COLOR, KEPT_COLOR, activation_grid, draw_boxes

log = logging.getLogger("plasmodet")

IMAGE_SUFFIXES = {".png", ".bmp"}


class UsageError(Exception):
    pass


def _csv_floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _csv_ints(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _run_config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    flags = {
        "seed": "seed",
        "silhouette_min": "silhouette_min",
        "pair_distance_min": "pairwise_distance_min",
        "box_sizes": "box_sizes",
        "sigmas": "sigmas",
        "threshold": "threshold",
        "epochs": "epochs",
        "target_per_class": "target_per_class",
    }
    values = {}
    for attr, key in flags.items():
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = v
    if getattr(args, "no_glcm_filter", False):
        values["use_glcm_filter"] = False
    return cfg.updated(values) if values else cfg


def _list_images(inputs) -> list[Path]:
    out = []
    for p in map(Path, inputs):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
        else:
            out.append(p)
    return sorted(out)


def _load_class_dir(root: Path, size: int = 100):
    images, labels = [], []
    for label, name in enumerate(synth_mod.CLASS_DIRS):
        d = root / name
        files = sorted(q for q in d.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES) if d.is_dir() else []
        if not files:
            raise UsageError(f"class folder {d} is missing or has no images")
        for f in files:
            images.append(resize(read_rgb(f), size, size))
            labels.append(label)
    return np.stack(images), np.asarray(labels, dtype=np.int64)


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "patches":
        synth_mod.write_patch_corpus(out, args.seed, args.per_class)
        print(f"wrote {2 * args.per_class} patches under {out}")
        return 0
    for i in range(args.count):
        name = f"smear_{i:03d}.png"
        img, ann = synth_mod.synth_smear(args.seed + i, args.parasites, args.distractors, image_name=name)
        write_rgb(out / name, img)
        write_json(out / f"smear_{i:03d}.json", ann)
    print(f"wrote {args.count} smears under {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    images, labels = _load_class_dir(Path(args.train_dir))
    log.info("loaded %d patches (%d plasmodium)", len(labels), int(labels.sum()))
    params, history = train(images, labels, cfg.train, cfg.augment)
    save_params(args.weights, params)
    if args.log:
        write_log_csv(args.log, history)
    if history:
        best = max(history, key=lambda r: (r.val_acc, r.epoch))
        print(f"final train_acc {history[-1].train_acc:.4f} val_acc {history[-1].val_acc:.4f}; "
              f"saved epoch {best.epoch} (val_acc {best.val_acc:.4f})")
    else:
        print("epochs = 0: saved initial parameters")
    return 0


def cmd_detect(args) -> int:
    cfg = _run_config(args)
    params = load_params(args.weights)
    dcfg = DetectConfig(cfg.roi, cfg.filter, cfg.threshold, cfg.use_glcm_filter)
    paths = _list_images(args.inputs)
    if not paths:
        raise UsageError("no input images")
    png_dir = Path(args.png_dir) if args.png_dir else None
    if png_dir:
        png_dir.mkdir(parents=True, exist_ok=True)
    records, feature_rows, failures = [], [], 0
    for path in paths:
        try:
            img = read_rgb(path)
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable image %s: %s", path, exc)
            failures += 1
            continue
        t0 = time.perf_counter()
        result = detect(img, params, dcfg)
        log.info("%s: %d kept of %d CNN-positive in %.2fs", path.name, len(result.kept),
                 len(result.detections), time.perf_counter() - t0)
        records.append(detection_record(str(path), result))
        for j, d in enumerate(result.detections):
            feature_rows.append((f"{image_id(path)}#{j}", d.texture))
        if png_dir:
            kept = [d.box for d in result.detections if d.kept_by_filter]
            dropped = [d.box for d in result.detections if not d.kept_by_filter]
            overlay = draw_boxes(draw_boxes(img, dropped, FILTERED_COLOR), kept, KEPT_COLOR)
            write_rgb(png_dir / f"{path.stem}_detections.png", overlay)
    if failures == len(paths):
        log.error("no image could be read")
        return 1
    write_json(args.out, records)
    if args.features_csv:
        write_features_csv(args.features_csv, feature_rows)
    print(f"{len(records)} images, {sum(len([d for d in r['detections'] if d['kept_by_filter']]) for r in records)} "
          f"kept detections -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    records = load_detection_records(args.detections)
    annotations = load_annotations(args.annotations)
    missing = sorted(set(records) - set(annotations))
    if missing:
        raise UsageError(f"no annotation for detected images: {missing}")
    per_image = []
    for name in sorted(annotations):
        rec = records.get(name, {"detections": []})
        dets = [
            ((d["box"]["x"], d["box"]["y"], d["box"]["w"], d["box"]["h"]), d["confidence"])
            for d in rec["detections"]
            if d.get("kept_by_filter", True)
        ]
        per_image.append((name, match_boxes(dets, annotations[name]["boxes"]).counts))
    report = metrics_report(per_image)
    if args.out:
        write_json(args.out, report)
    agg = report["aggregate"]
    fmt = lambda v: "undefined" if v is None else f"{v:.2f}%"
    print(f"TP {agg['tp']}  FP {agg['fp']}  FN {agg['fn']}  TN n/a")
    print(f"PPV {fmt(agg['ppv'])}  sensitivity {fmt(agg['sensitivity'])}")
    return 0


def cmd_activations(args) -> int:
    params = load_params(args.weights)
    size = params.arch.input_size
    patch = resize(read_rgb(args.patch), size, size)
    _, acts = forward(params, normalize_patch(patch))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rgb(out / "input.png", patch)
    for layer, cols in (("conv1", 4), ("conv2", 8)):
        grid = activation_grid(acts[layer], cols=cols)
        write_rgb(out / f"{layer}.png", grid)
        print(f"{layer}: {acts[layer].shape[2]} maps -> {out / f'{layer}.png'}")
    return 0


def _add_stage_flags(p, detect_flags: bool):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    if detect_flags:
        p.add_argument("--silhouette-min", type=float)
        p.add_argument("--pair-distance-min", type=float)
        p.add_argument("--box-sizes", type=_csv_ints, help="comma list, e.g. 40,60,80")
        p.add_argument("--sigmas", type=_csv_floats, help="comma list, e.g. 4,5,6,7")
        p.add_argument("--threshold", type=float, help="Plasmodium probability cut-off")
        p.add_argument("--no-glcm-filter", action="store_true", help="keep every CNN-positive ROI")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plasmodet", description=__doc__.splitlines()[0])
    ap.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic smears or training patches")
    p.add_argument("kind", choices=["smears", "patches"])
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10, help="number of smears")
    p.add_argument("--parasites", type=int, default=5)
    p.add_argument("--distractors", type=int, default=5)
    p.add_argument("--per-class", type=int, default=200, help="patches per class")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the classifier on class folders")
    p.add_argument("train_dir", help=f"folder with {' and '.join(synth_mod.CLASS_DIRS)} subfolders")
    p.add_argument("--weights", required=True)
    p.add_argument("--log", help="per-epoch CSV log")
    p.add_argument("--epochs", type=int)
    p.add_argument("--target-per-class", type=int)
    _add_stage_flags(p, detect_flags=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="detect parasites in smear images")
    p.add_argument("inputs", nargs="+", help="image files or folders")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True, help="detection JSON")
    p.add_argument("--png-dir", help="write box overlays here")
    p.add_argument("--features-csv", help="write GLCM features of every detection")
    _add_stage_flags(p, detect_flags=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against annotations")
    p.add_argument("detections")
    p.add_argument("annotations", nargs="+", help="annotation files or folders")
    p.add_argument("--out", help="metrics JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("activations", help="dump conv-layer activation grids")
    p.add_argument("patch")
    p.add_argument("--weights", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_activations)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, FormatError, FileNotFoundError) as exc:
        print(f"plasmodet: error: {exc}", file=sys.stderr)
        return 2
    except (CorruptModelError, TrainingAborted, OSError, ValueError) as exc:
        print(f"plasmodet: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
