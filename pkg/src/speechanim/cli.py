"""Command-line interface: gen-data, filter, train, infer, render, eval."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_config
from .emotion import EMOTIONS, EmotionVector


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--profile", choices=("desk", "paper"), help="config profile")
    p.add_argument("--seed", type=int, help="random seed override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechanim",
        description="Speech-driven facial landmark animation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    _add_common(p)
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--clips", type=int)
    p.add_argument("--anomaly-rate", type=float)
    p.add_argument("--jitter", type=float)
    p.add_argument("--oracle-seed", type=int)

    p = sub.add_parser("filter", help="filter a corpus manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="filtered manifest path")
    p.add_argument("--report", help="filter report path")

    p = sub.add_parser("train", help="train one model")
    _add_common(p)
    p.add_argument("which", choices=("s2l", "posegen", "l2l"))
    p.add_argument("--manifest", required=True, help="(filtered) corpus manifest")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--steps", type=int, help="total optimization steps")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("infer", help="animate a source frame from audio")
    _add_common(p)
    p.add_argument("--source", required=True, help="landmark-sequence file (frame 0)")
    p.add_argument("--audio", required=True, help="mono WAV file")
    p.add_argument("--s2l", required=True)
    p.add_argument("--l2l", required=True)
    p.add_argument("--posegen")
    p.add_argument("--out", required=True)
    p.add_argument("--pose-mode", default="fixed",
                   help="generated | transfer:<pose file> | fixed")
    p.add_argument("--emotion", choices=EMOTIONS, default="neutral")
    p.add_argument("--intensity", type=float, default=1.0)
    p.add_argument("--blink", help="comma-separated frame indices for blinks")
    p.add_argument("--size", type=int, default=512)

    p = sub.add_parser("render", help="render a landmark or latent sequence")
    p.add_argument("--landmarks", help="landmark-sequence file")
    p.add_argument("--latents", help="latent keypoints .npy file")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=512)

    p = sub.add_parser("eval", help="evaluate checkpoints on a corpus split")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--s2l", required=True)
    p.add_argument("--l2l", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="report path")
    return parser


def _cmd_gen_data(args) -> int:
    from .synthdata import build_corpus

    cfg = load_config(args.config, args.profile).corpus
    for name, value in (("clips", args.clips), ("anomaly_rate", args.anomaly_rate),
                        ("landmark_jitter", args.jitter), ("seed", args.seed),
                        ("oracle_seed", args.oracle_seed)):
        if value is not None:
            cfg = replace(cfg, **{name: value})
    manifest = build_corpus(cfg, args.out)
    print(manifest)
    return 0


def _cmd_filter(args) -> int:
    from .filtering import run_filters

    cfg = load_config(args.config, args.profile).filters
    out, reports = run_filters(args.manifest, cfg, out_manifest=args.out,
                               report_path=args.report)
    kept = sum(1 for r in reports if r.passed)
    print(f"{out} ({kept}/{len(reports)} clips kept)")
    return 0


def _cmd_train(args) -> int:
    from .training import train_model

    cfg = load_config(args.config, args.profile)
    train_cfg = cfg.train
    for name, value in (("total_steps", args.steps), ("batch_size", args.batch_size),
                        ("seed", args.seed)):
        if value is not None:
            train_cfg = replace(train_cfg, **{name: value})
    result = train_model(args.which, args.manifest, train_cfg, cfg.model,
                         out_dir=args.out, quiet=not args.verbose)
    print(f"{result.checkpoint_path} (final loss {result.final_loss:.6f})")
    return 0


def _parse_pose_mode(value: str):
    if value.startswith("transfer:"):
        return "transfer", value.split(":", 1)[1]
    if value in ("generated", "fixed"):
        return value, None
    raise ValueError(f"invalid pose mode {value!r}; "
                     "use generated, fixed, or transfer:<pose file>")


def _cmd_infer(args) -> int:
    from .pipeline import InferenceRequest, infer

    mode, pose_file = _parse_pose_mode(args.pose_mode)
    blink = tuple(int(v) for v in args.blink.split(",")) if args.blink else ()
    req = InferenceRequest(
        source=args.source,
        audio=args.audio,
        pose_mode=mode,
        pose_file=pose_file,
        emotion=EmotionVector.one_hot(args.emotion, args.intensity)
        if args.emotion != "neutral" else EmotionVector.neutral(),
        seed=args.seed or 0,
        blink_frames=blink,
    )
    result = infer(req, args.s2l, args.l2l, posegen_ckpt=args.posegen,
                   out_dir=args.out, render_size=args.size)
    print(result["out_dir"])
    return 0


def _cmd_render(args) -> int:
    from .landmark_io import read_landmark_file
    from .render import render

    faces = eyes = latents = None
    if args.landmarks:
        faces, eyes, _, _ = read_landmark_file(args.landmarks)
    if args.latents:
        latents = np.load(args.latents)
    if faces is None and latents is None:
        raise ValueError("render needs --landmarks and/or --latents")
    paths = render(faces=faces, eyes=eyes, latents=latents, size=args.size,
                   out_dir=args.out)
    print(f"{args.out} ({len(paths)} frames)")
    return 0


def _cmd_eval(args) -> int:
    from .evaluation import evaluate

    report = evaluate(args.s2l, args.l2l, args.manifest, split=args.split,
                      report_path=args.out)
    for key, value in sorted(report.aggregate.items()):
        print(f"{key}: {value:.6f}")
    if args.out:
        print(args.out)
    return 0


COMMANDS = {
    "gen-data": _cmd_gen_data,
    "filter": _cmd_filter,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "render": _cmd_render,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # surface a clean diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
