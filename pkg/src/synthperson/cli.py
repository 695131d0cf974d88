"""Command-line entry point: synth, stats, eval, ablate, preset.

Exit codes: 0 ok, 2 config/usage error, 3 I/O error, 4 internal invariant
violation.  `--threads N` (or SYNTHPERSON_THREADS) bounds parallelism and
never changes outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .ablation import axes_grid, default_grid, evaluate_manifest, format_report, run_ablation
from .config import apply_overrides, load_config, preset_config, resolve_config, save_config
from .dataset import compute_stats, load_manifest, save_stats
from .errors import ConfigurationError, IntegrityError, SynthPersonError, ValidationError
from .pipeline import synthesize
from .presets import CORNER_PRESETS, apply_corner_preset


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SYNTHPERSON_THREADS", "1")))
    except ValueError:
        return 1


def _load_base_config(args) -> dict:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    elif getattr(args, "preset", None):
        cfg = preset_config(args.preset)
    else:
        cfg = resolve_config({})
    cfg = apply_overrides(cfg, getattr(args, "set", None))
    if getattr(args, "out", None):
        cfg["emission"]["out_dir"] = args.out
    return cfg


def _parse_cam_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _cmd_synth(args) -> int:
    cfg = _load_base_config(args)
    run = synthesize(cfg, threads=args.threads)
    stats = run.stats
    print(f"dataset written to {run.out_dir}")
    print(
        f"identities={stats.n_identities} cameras={stats.n_cameras} images={stats.n_images}"
    )
    return 0


def _cmd_stats(args) -> int:
    manifest = load_manifest(args.out_dir)
    stats = compute_stats(manifest)
    save_stats(stats, args.out_dir)
    print(f"identities: {stats.n_identities}")
    print(f"cameras:    {stats.n_cameras}")
    print(f"images:     {stats.n_images}")
    print("per-camera: " + ", ".join(f"c{k}={v}" for k, v in sorted(stats.per_camera.items())))
    print("per-scene:  " + ", ".join(f"s{k}={v}" for k, v in sorted(stats.per_scene.items())))
    return 0


def _cmd_eval(args) -> int:
    result = evaluate_manifest(
        args.out_dir,
        _parse_cam_list(args.query_cams),
        _parse_cam_list(args.gallery_cams),
        distance=args.distance,
        max_rank=args.max_rank,
    )
    if result.n_excluded > 0:
        print(
            f"warning: {result.n_excluded} queries had no valid cross-camera match "
            "and were excluded from the averages"
        )
    print(f"queries: {result.n_queries} (excluded {result.n_excluded})")
    for k in (1, 5, 10):
        if k <= len(result.cmc):
            print(f"rank-{k}: {result.rank(k):.4f}")
    print(f"mAP:    {result.map:.4f}")
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(result.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_base_config(args)
    if args.axes:
        cells = axes_grid(cfg, [a.strip() for a in args.axes.split(",") if a.strip()])
    else:
        cells = default_grid(cfg["identities"]["count"])
    rows = run_ablation(cfg, cells, args.out_dir, threads=args.threads)
    print(format_report(rows))
    return 0


def _cmd_preset(args) -> int:
    cfg = _load_base_config(args)
    cfg = apply_corner_preset(cfg, args.name)
    if args.output:
        save_config(cfg, args.output)
        print(f"derived config written to {args.output}")
    else:
        print(json.dumps(cfg, indent=2, sort_keys=True))
    return 0


def _add_config_args(p: argparse.ArgumentParser, with_out: bool = True):
    p.add_argument("-c", "--config", help="TOML config or a header.json echo")
    p.add_argument("-p", "--preset", help="named config preset (smoke, desk_full, paper_full)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    if with_out:
        p.add_argument("--out", help="override emission.out_dir")
    p.add_argument("--threads", type=int, default=_default_threads())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthperson", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize an annotated dataset")
    _add_config_args(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("stats", help="recompute statistics of an emitted dataset")
    p.add_argument("out_dir")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("eval", help="cross-camera CMC/mAP on an emitted dataset")
    p.add_argument("out_dir")
    p.add_argument("--query-cams", required=True, help="comma list of camera ids")
    p.add_argument("--gallery-cams", required=True, help="comma list of camera ids")
    p.add_argument("--distance", choices=("l2", "cosine"), default="l2")
    p.add_argument("--max-rank", type=int, default=50)
    p.add_argument("--report", help="write EvalResult JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run a knob grid and report per-cell metrics")
    _add_config_args(p, with_out=False)
    p.add_argument("--axes", help="comma list of axes (texture, accessories, hard, cameras)")
    p.add_argument("--out", dest="out_dir", required=True, help="report directory")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("preset", help="derive a corner-scenario config")
    p.add_argument("name", choices=CORNER_PRESETS)
    _add_config_args(p, with_out=False)
    p.add_argument("-o", "--output", help="write derived config JSON here")
    p.set_defaults(func=_cmd_preset)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (IntegrityError, SynthPersonError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
