"""Command-line entry point wiring the whole pipeline.

Exit codes: 0 success, 2 usage or configuration problems, 3 data
problems, 4 runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import config as config_mod
from . import model as model_mod
from . import stats as stats_mod
from . import synthgen
from .errors import ConfigError, DataError, FmimError, MisalignedParticipants, TooShort
from .geometry import canonicalize_sequence, motion_profile
from .landmark_io import (
    IM_DIMENSIONS,
    read_landmark_file,
    read_manifest,
    read_rater_csv,
    read_scores_csv,
    validate_manifest,
    write_landmark_file,
)

DIM_ALIASES = {
    "hsp": "honest_self_promotion",
    "hd": "honest_defensiveness",
    "dic": "deceptive_image_creation",
    "dip": "deceptive_image_protection",
}


def _resolve_dim(value: str) -> list[str]:
    if value == "all":
        return list(IM_DIMENSIONS)
    name = DIM_ALIASES.get(value, value)
    if name not in IM_DIMENSIONS:
        raise ConfigError(f"unknown dimension {value!r}; use one of "
                          f"{', '.join(list(DIM_ALIASES) + ['all'])} or full names")
    return [name]


def _load_config(args) -> config_mod.GlobalConfig:
    if getattr(args, "config", None):
        cfg = config_mod.load_config(args.config)
    else:
        cfg = config_mod.default_config(getattr(args, "preset", "desk") or "desk",
                                        seed=getattr(args, "seed", 0) or 0)
    if getattr(args, "preset", None) and getattr(args, "config", None):
        cfg = config_mod.GlobalConfig(preset=config_mod.get_preset(args.preset),
                                      train=cfg.train, seed=cfg.seed)
        cfg.validate()
    overrides = {}
    for flag, name in (("iterations", "iterations"), ("batch", "batch_size"),
                       ("lr", "learning_rate"), ("eval_every", "eval_every")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = config_mod.GlobalConfig(preset=cfg.preset,
                                      train=replace(cfg.train, **overrides),
                                      seed=overrides.get("seed", cfg.seed))
        cfg.validate()
    return cfg


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if args.n < 1:
        raise ConfigError(f"--n must be at least 1, got {args.n}")
    fps = args.fps if args.fps is not None else cfg.preset.synth.fps
    duration = args.duration if args.duration is not None else cfg.preset.synth.duration_s
    manifest = synthgen.generate_dataset(
        n=args.n, out_dir=args.out, seed=cfg.seed, holdout=args.holdout,
        fps=fps, duration_s=duration,
        min_duration_s=cfg.preset.pipeline.window_s)
    counts = {}
    for e in manifest.entries:
        counts[e.split] = counts.get(e.split, 0) + 1
    split_str = " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    print(f"[synth] wrote {len(manifest.entries)} participants to {args.out} "
          f"(fps={fps:g} duration={duration:g}s seed={cfg.seed})")
    print(f"[synth] split: {split_str}")
    print(f"[synth] manifest: {os.path.join(args.out, 'manifest.csv')}")
    return 0


def _train_one(task) -> str:
    manifest_path, dim, cfg, out_dir = task
    manifest = read_manifest(manifest_path)
    checkpoint = model_mod.train(
        manifest, dim, cfg.preset.architecture, cfg.train, cfg.preset.pipeline,
        progress=lambda rec: print(
            f"[train:{dim}] iter={rec['iteration']} loss={rec['train_loss']:.6f}"
            + (f" val_mse={rec['val_mse']:.6f}" if rec['val_mse'] is not None else ""),
            flush=True))
    path = os.path.join(out_dir, f"{dim}.ckpt")
    model_mod.save_checkpoint(checkpoint, path)
    return path


def cmd_train(args) -> int:
    cfg = _load_config(args)
    dims = _resolve_dim(args.dim)
    os.makedirs(args.out_dir, exist_ok=True)
    t = cfg.train
    split_str = "-".join(f"{int(round(r * 100))}" for r in t.split)
    for dim in dims:
        print(f"[train] dim={dim} preset={cfg.preset.name} lr={t.learning_rate:g} "
              f"batch={t.batch_size} iters={t.iterations} eval-every={t.eval_every} "
              f"split={split_str} seed={t.seed}", flush=True)
    tasks = [(args.manifest, dim, cfg, args.out_dir) for dim in dims]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            paths = list(pool.map(_train_one, tasks))
    else:
        paths = [_train_one(t) for t in tasks]
    for path in paths:
        print(f"[train] checkpoint: {path}")
    return 0


def _checkpoint_paths(path: str) -> list[str]:
    if os.path.isdir(path):
        found = sorted(os.path.join(path, f) for f in os.listdir(path) if f.endswith(".ckpt"))
        if not found:
            raise DataError(f"no .ckpt files in {path}")
        return found
    return [path]


def cmd_eval(args) -> int:
    manifest = read_manifest(args.manifest)
    rows = []
    for ckpt_path in _checkpoint_paths(args.checkpoint):
        checkpoint = model_mod.load_checkpoint(ckpt_path)
        result = model_mod.evaluate(checkpoint, manifest, split=args.split, use=args.use)
        rows.append(result)
        if args.scatter_dir:
            os.makedirs(args.scatter_dir, exist_ok=True)
            scatter = os.path.join(args.scatter_dir, f"scatter_{checkpoint.dimension}.csv")
            with open(scatter, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["participant_id", "label", "prediction"])
                for pid, label, pred in zip(result.participants, result.labels, result.predictions):
                    writer.writerow([pid, f"{label:.6f}", f"{pred:.6f}"])
    print(f"{'dimension':<28} {'R':>8} {'R2':>8} {'RMSE':>8} {'RMSE/SD':>8} {'n':>5}")
    for result in rows:
        rep = result.report
        r = f"{rep.r:.4f}" if rep.r is not None else "n/a"
        r2 = f"{rep.r_squared:.4f}" if rep.r_squared is not None else "n/a"
        ratio = f"{rep.rmse_sd_ratio:.4f}" if rep.rmse_sd_ratio is not None else "n/a"
        print(f"{rep.dimension:<28} {r:>8} {r2:>8} {rep.rmse:>8.4f} {ratio:>8} {rep.n:>5}")
        if rep.degenerate:
            print(f"  note: {rep.degenerate}")
    return 0


def cmd_compare(args) -> int:
    self_scores = read_scores_csv(args.self_csv)
    ai_scores = read_scores_csv(args.ai_csv)
    raters = read_rater_csv(args.rater_csv)
    report = stats_mod.compare_ai_human(self_scores, ai_scores, raters)
    print(report.table())
    if args.scatter_dir:
        os.makedirs(args.scatter_dir, exist_ok=True)
        for dim in report.dimensions:
            path = os.path.join(args.scatter_dir, f"compare_{dim.dimension}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["participant_id", "self", "ai", "human_mean"])
                for pid, s, a, hm in dim.scatter:
                    writer.writerow([pid, f"{s:.6f}", f"{a:.6f}", f"{hm:.6f}"])
    return 0


def cmd_profile(args) -> int:
    seq = read_landmark_file(args.landmark_file)
    try:
        prof = motion_profile(seq)
    except TooShort as exc:
        raise TooShort(f"{args.landmark_file}: too short: {exc}") from exc
    axes = ("twist(theta_xy)", "nod(theta_xz)", "shake(theta_zy)")
    print(f"participant={seq.participant_id} frames={len(seq.frames)} fps={seq.fps:g}")
    for i, name in enumerate(axes):
        print(f"{name:<18} mean|delta|={prof.mean_abs[i]:.6f} deg  "
              f"variance={prof.variance[i]:.6f} deg^2")
    print(f"rigidity index = {prof.rigidity_index:.3f}")
    if args.series:
        print("frame_transition theta_xy theta_xz theta_zy")
        for k, row in enumerate(prof.deltas):
            print(f"{k} {row[0]:.6f} {row[1]:.6f} {row[2]:.6f}")
    return 0


def cmd_canon(args) -> int:
    seq = read_landmark_file(args.input)
    canon = canonicalize_sequence(seq)
    write_landmark_file(canon, args.output)
    print(f"[canon] wrote {args.output}")
    return 0


def cmd_validate(args) -> int:
    failures = 0
    for path in args.paths:
        try:
            if path.endswith(".csv"):
                manifest = read_manifest(path)
                report = validate_manifest(manifest)
                if report:
                    failures += 1
                    print(f"{path}: INVALID")
                    for line in report:
                        print(f"  - {line}")
                else:
                    print(f"{path}: ok ({len(manifest.entries)} entries)")
            else:
                seq = read_landmark_file(path)
                print(f"{path}: ok ({len(seq.frames)} frames, participant={seq.participant_id})")
        except FmimError as exc:
            failures += 1
            print(f"{path}: INVALID: {exc}")
    if failures:
        raise DataError(f"{failures} of {len(args.paths)} inputs failed validation")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmim",
        description="Face-motion impression-management pipeline: synthesize corpora, "
                    "canonicalize landmarks, train and evaluate clip-regression models, "
                    "and compare model scores with human raters.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_train=False):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", choices=["desk", "reference"], help="configuration preset")
        p.add_argument("--seed", type=int, default=None, help="master random seed")
        if with_train:
            p.add_argument("--iterations", type=int, default=None)
            p.add_argument("--batch", type=int, default=None)
            p.add_argument("--lr", type=float, default=None)
            p.add_argument("--eval-every", dest="eval_every", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic landmark corpus")
    add_common(p)
    p.add_argument("--n", type=int, required=True, help="number of participants")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--holdout", type=int, default=0, help="participants tagged holdout")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--duration", type=float, default=None, help="seconds per participant")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train models on a manifest")
    add_common(p, with_train=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--dim", default="all",
                   help="score dimension (hsp, hd, dic, dip, full name, or all)")
    p.add_argument("--out-dir", default=".", help="checkpoint output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for --dim all")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints on a split")
    p.add_argument("--checkpoint", required=True, help=".ckpt file or directory of them")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test",
                   choices=["train", "validation", "test", "holdout"])
    p.add_argument("--use", default="best", choices=["best", "final"])
    p.add_argument("--scatter-dir", dest="scatter_dir", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="compare AI scores with self-reports and raters")
    p.add_argument("--self", dest="self_csv", required=True)
    p.add_argument("--ai", dest="ai_csv", required=True)
    p.add_argument("--raters", dest="rater_csv", required=True)
    p.add_argument("--scatter-dir", dest="scatter_dir", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("profile", help="motion profile of a landmark file")
    p.add_argument("landmark_file")
    p.add_argument("--series", action="store_true", help="dump the per-transition series")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("canon", help="canonicalize a landmark file")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_canon)

    p = sub.add_parser("validate", help="validate landmark files or manifests")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MisalignedParticipants as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FmimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
