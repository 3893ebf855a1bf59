"""Command-line interface: ``hkface detect | classify-map | synth | eval``.

Pipeline settings resolve as flag > ``--config`` file > built-in default, and
the effective settings are echoed in every JSON output. Exit codes: 0 ok,
2 input error, 3 detection failure, 4 config error. Failures print
``{"error": {"stage", "code", "message"}}`` as JSON on stdout.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .curvature import HKClass, class_counts, classify, compute_curvature_field, save_class_map
from .errors import BadParams, DetectionError, HKFaceError, InputError
from .evaluate import DEFAULT_POSES, run_eval
from .landmarks import CSV_COLUMNS
from .pipeline import CENTRAL, PipelineConfig, StageError, preprocess_image, run_pipeline
from .rangeio import RangeFormat, RangeImage, load_range_image, save_range_image
from .synth import (
    SURFACE_KINDS,
    PhantomSpec,
    PoseSpec,
    make_phantom,
    make_surface,
    random_phantom_spec,
    rotate_and_rasterize,
    rotate_phantom,
    spec_to_dict,
)

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_INPUT, EXIT_DETECT, EXIT_CONFIG = 0, 2, 3, 4

RANGE_EXTENSIONS = (".pgm", ".pnm", ".rig", ".txt")

# flag dest -> flat config key
_FLAG_KEYS = {
    "crop": "crop",
    "sigma": "sigma",
    "radius": "radius",
    "otsu_bins": "otsu_bins",
    "fit_window": "fit_window",
    "pixel_pitch": "pixel_pitch",
    "eps_h": "eps_h",
    "eps_k": "eps_k",
    "k_threshold": "k_threshold",
    "top_n_nose": "top_n_nose",
    "min_separation": "min_separation",
}


class _ConfigError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _error_doc(stage, code, message, **extra) -> dict:
    doc = {"error": {"stage": stage, "code": code, "message": message}}
    doc.update(extra)
    return doc


def _exit_for(exc) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, (InputError, FileNotFoundError, IsADirectoryError)):
        return EXIT_INPUT
    if isinstance(cause, DetectionError):
        return EXIT_DETECT
    if isinstance(cause, BadParams):
        return EXIT_CONFIG
    return EXIT_DETECT


def resolve_config(args, base: PipelineConfig) -> PipelineConfig:
    """Layer ``--config`` then explicit flags over ``base``."""
    try:
        cfg = base
        if args.config:
            cfg = PipelineConfig.load(args.config, base=cfg)
        kv = {key: getattr(args, dest) for dest, key in _FLAG_KEYS.items()
              if getattr(args, dest) is not None}
        if args.no_threshold:
            kv["otsu"] = "false"
        if args.no_smooth:
            kv["smooth"] = "false"
        return PipelineConfig.from_flat({k: str(v) for k, v in kv.items()}, base=cfg)
    except (BadParams, OSError) as exc:
        raise _ConfigError(str(exc)) from None


# -- parser ------------------------------------------------------------------

def _shared() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline settings")
    g.add_argument("--config", metavar="FILE", help="flat key=value settings file")
    g.add_argument("--crop", metavar="R0,C0,ROWS,COLS",
                   help="crop rectangle, 'central' (centred 70x70) or 'none'")
    g.add_argument("--sigma", type=float, help="Gaussian sigma (default 1.0)")
    g.add_argument("--radius", type=int, help="Gaussian kernel radius (default 2)")
    g.add_argument("--no-smooth", action="store_true", help="skip Gaussian smoothing")
    g.add_argument("--otsu-bins", type=int, help="histogram bins for Otsu (default 256)")
    g.add_argument("--no-threshold", action="store_true", help="skip Otsu background removal")
    g.add_argument("--fit-window", type=int, help="fit window half-width (default 2, i.e. 5x5)")
    g.add_argument("--pixel-pitch", type=float, help="grid spacing in depth units (default 1)")
    g.add_argument("--eps-h", type=float, help="zero band for H (default 1e-6)")
    g.add_argument("--eps-k", type=float, help="zero band for K (default 1e-6)")
    g.add_argument("--k-threshold", type=float, help="K threshold for candidates (default 1e-4)")
    g.add_argument("--top-n-nose", type=int, help="nose candidates ranked by intensity (default 5)")
    g.add_argument("--min-separation", type=float, help="min eye-corner distance in px (default 8)")
    g.add_argument("--format", choices=("json", "csv"),
                   help="output format (default json; eval defaults to a text table)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    return p


def build_parser() -> argparse.ArgumentParser:
    shared = _shared()
    ap = argparse.ArgumentParser(prog="hkface", description="HK-curvature facial landmark detection")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[shared], help="detect nose tip and eye corners")
    p.add_argument("input", help="range image file, or a directory for batch mode")
    p.add_argument("-o", "--output", help="write results here instead of stdout")
    p.add_argument("--baseline", action="store_true", help="also report the max-intensity nose")
    p.add_argument("--input-format", choices=[f.value for f in RangeFormat],
                   help="override the extension-based format guess")

    p = sub.add_parser("classify-map", parents=[shared], help="write the HK class map as PGM")
    p.add_argument("input")
    p.add_argument("output", help="8-bit PGM path")
    p.add_argument("--input-format", choices=[f.value for f in RangeFormat])

    p = sub.add_parser("synth", parents=[shared], help="generate synthetic range images")
    p.add_argument("output", help="range image path (.pgm for 16-bit PGM, else ASCII grid)")
    p.add_argument("--kind", choices=("phantom",) + SURFACE_KINDS, default="phantom")
    p.add_argument("--size", type=int, help="grid side (default 128 phantom, 101 surfaces)")
    p.add_argument("--surface-radius", type=float, default=50.0, help="radius for analytic surfaces")
    p.add_argument("--pose", default="frontal", help="e.g. Y+30, X-15, Z+90 or frontal")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="Gaussian depth noise")
    p.add_argument("--jitter", action="store_true", help="seeded variation of landmark centres")
    p.add_argument("--truth", help="truth sidecar path (default: output with .json suffix)")

    p = sub.add_parser("eval", parents=[shared], help="pose sweep over seeded phantoms")
    p.add_argument("--poses", default="default",
                   help="'default' (full grid) or comma list such as frontal,Y+30,X-15")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("-o", "--output", help="also write the JSON report here")
    return ap


# -- subcommands ---------------------------------------------------------------

def _emit(text: str, path=None):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _detect_one(path, cfg, args) -> tuple[dict, int]:
    try:
        img = load_range_image(path, args.input_format)
    except (HKFaceError, OSError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        return _error_doc("load", code, str(exc)), EXIT_INPUT
    try:
        res = run_pipeline(img, cfg, baseline=args.baseline)
    except StageError as exc:
        doc = _error_doc(exc.stage, exc.code, str(exc.cause))
        if exc.partial is not None:
            doc.update(_landmark_doc(exc.partial))
        return doc, _exit_for(exc)
    return _landmark_doc(res), EXIT_OK


def _landmark_doc(res) -> dict:
    d = res.landmarks.to_dict()
    d.pop("params")
    d["threshold"] = res.threshold
    d["notes"] = list(res.notes)
    if res.baseline_nose is not None:
        r, c, i = res.baseline_nose
        d["baseline_nose"] = {"row": r, "col": c, "intensity": i}
    return d


def _csv_row(doc) -> str:
    vals = []
    n = doc.get("nose")
    vals += [n["row"], n["col"], repr(n["k"]), n["intensity"]] if n else [""] * 4
    eyes = doc.get("eyes") or []
    for i in range(2):
        e = eyes[i] if i < len(eyes) else None
        vals += [e["row"], e["col"], repr(e["k"])] if e else [""] * 3
    err = doc.get("error")
    vals.append(err["code"] if err else "")
    return ",".join(str(v) for v in vals)


def cmd_detect(args) -> int:
    cfg = resolve_config(args, replace(PipelineConfig(), crop=CENTRAL))
    if os.path.isdir(args.input):
        names = sorted(f for f in os.listdir(args.input)
                       if f.lower().endswith(RANGE_EXTENSIONS))
        items = [(f, _detect_one(os.path.join(args.input, f), cfg, args)) for f in names]
        status = EXIT_OK
    else:
        doc, status = _detect_one(args.input, cfg, args)
        items = [(os.path.basename(args.input), (doc, status))]

    if args.format == "csv":
        lines = [",".join(("input",) + CSV_COLUMNS + ("error",))]
        lines += [f"{name},{_csv_row(doc)}" for name, (doc, _) in items]
        _emit("\n".join(lines) + "\n", args.output)
        return status
    if os.path.isdir(args.input):
        out = {"config": cfg.to_dict(),
               "results": [dict(doc, input=name, exit_code=code) for name, (doc, code) in items]}
    else:
        out = dict(items[0][1][0], input=items[0][0], config=cfg.to_dict())
    _emit(_dump(out), args.output)
    return status


def cmd_classify_map(args) -> int:
    cfg = resolve_config(args, replace(PipelineConfig(), crop=CENTRAL))
    img = load_range_image(args.input, args.input_format)
    pre, offset, t, notes = preprocess_image(img, cfg)
    try:
        fld = compute_curvature_field(pre, cfg.fit, cfg.pixel_pitch)
    except HKFaceError as exc:
        raise StageError("curvature", exc) from exc
    labels = classify(fld, cfg.classify)
    save_class_map(labels, args.output)
    counts = {cls.name.lower(): n for cls, n in class_counts(labels).items()}
    out = {"output": os.path.basename(args.output), "offset": list(offset), "threshold": t,
           "notes": notes, "counts": counts, "config": cfg.to_dict()}
    if args.format == "csv":
        names = [c.name.lower() for c in HKClass]
        _emit(",".join(names) + "\n" + ",".join(str(counts[n]) for n in names) + "\n")
    else:
        _emit(_dump(out))
    return EXIT_OK


def _sidecar_path(output, truth):
    return truth or os.path.splitext(output)[0] + ".json"


def cmd_synth(args) -> int:
    try:
        pose = PoseSpec.parse(args.pose)
        pose.check_range()
        if args.noise_sigma < 0:
            raise BadParams("--noise-sigma must be >= 0")
    except BadParams as exc:
        raise _ConfigError(str(exc)) from None
    rng = np.random.default_rng(args.seed)
    pose_doc = {"axis": pose.axis.value, "angle": pose.angle}
    try:
        if args.kind == "phantom":
            base = PhantomSpec(size=args.size or 128, noise_sigma=args.noise_sigma)
            spec = random_phantom_spec(rng, base) if args.jitter else base
            img, truth = make_phantom(spec, rng)
            if pose.angle != 0:
                img, truth = rotate_phantom(img, truth, pose)
            sidecar = truth.to_dict()
            sidecar["pose"] = pose_doc
            sidecar["phantom"] = spec_to_dict(spec)
        else:
            img = make_surface(args.kind, n=args.size or 101, radius=args.surface_radius)
            if args.noise_sigma > 0:
                z = img.depth + rng.normal(0.0, args.noise_sigma, size=img.shape)
                img = RangeImage(z, img.valid)
            if pose.angle != 0:
                img = rotate_and_rasterize(img, pose)
            sidecar = {"kind": args.kind, "nose": None, "eyes": None, "pose": pose_doc,
                       "size": img.width, "radius": args.surface_radius,
                       "noise_sigma": args.noise_sigma}
    except BadParams as exc:
        raise _ConfigError(str(exc)) from None
    sidecar["seed"] = args.seed
    save_range_image(img, args.output)
    side = _sidecar_path(args.output, args.truth)
    with open(side, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(sidecar))
    _emit(_dump({"output": os.path.basename(args.output), "truth": os.path.basename(side),
                 "shape": list(img.shape), "n_valid": img.n_valid}))
    return EXIT_OK


def _parse_poses(text):
    if text.strip().lower() == "default":
        return DEFAULT_POSES
    return tuple(PoseSpec.parse(t) for t in text.split(",") if t.strip())


def cmd_eval(args) -> int:
    cfg = resolve_config(args, PipelineConfig())
    try:
        poses = _parse_poses(args.poses)
        for p in poses:
            p.check_range()
        if args.trials < 1:
            raise BadParams("--trials must be >= 1")
    except BadParams as exc:
        raise _ConfigError(str(exc)) from None
    report = run_eval(cfg, poses, args.trials, args.seed)
    if args.output:
        _emit(report.to_json() + "\n", args.output)
    if args.format == "json":
        _emit(report.to_json() + "\n")
    elif args.format == "csv":
        lines = ["axis,angle,total,nose,eyes,baseline_nose"]
        lines += [f"{c.axis},{c.angle!r},{c.total},{c.nose},{c.eyes},{c.baseline_nose}"
                  for c in report.cells]
        _emit("\n".join(lines) + "\n")
    else:
        _emit(report.to_text())
    return EXIT_OK


_COMMANDS = {
    "detect": cmd_detect,
    "classify-map": cmd_classify_map,
    "synth": cmd_synth,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _ConfigError as exc:
        _emit(_dump(_error_doc("config", "BadParams", str(exc))))
        return EXIT_CONFIG
    except StageError as exc:
        _emit(_dump(_error_doc(exc.stage, exc.code, str(exc.cause))))
        return _exit_for(exc)
    except (HKFaceError, OSError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        _emit(_dump(_error_doc("load", code, str(exc))))
        return _exit_for(exc)


if __name__ == "__main__":
    sys.exit(main())
