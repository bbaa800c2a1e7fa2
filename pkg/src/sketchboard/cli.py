"""Command-line interface.

Subcommands: segment, sketchify, assemble, validate, stats, evaluate,
plan, run. File formats are documented in the README; providers.json
selects mock, subprocess, or HTTP backends per capability.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as dataset_mod
from . import prompts as prompts_mod
from .frames import load_frames, load_gray_png, load_image, save_gray_png
from .metrics import EvalConfig, EventSpec, evaluate_shot
from .pipeline import StoryboardShot, export_video, plan_shot, run_storyboard
from .providers import ProviderSet, StageConfig, embedding_dir_provider, load_provider_set
from .shotdetect import ShotDetectConfig, detect_shots
from .sketch import SketchConfig, sketchify


def _load_providers(path: str | None) -> ProviderSet:
    if path is None:
        return ProviderSet.from_mocks()
    return load_provider_set(path)


def _cmd_segment(args: argparse.Namespace) -> int:
    seq = load_frames(args.input, fps_hint=args.fps)
    cfg = ShotDetectConfig(threshold=args.threshold, min_shot_len=args.min_shot_len)
    shots, trace = detect_shots(seq, cfg)
    payload = {
        "shots": [{"start": s.start, "end": s.end} for s in shots],
        "scores": list(trace.scores),
    }
    Path(args.out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(f"{len(shots)} shots over {len(seq)} frames -> {args.out}")
    return 0


def _cmd_sketchify(args: argparse.Namespace) -> int:
    frame = load_image(args.input)
    sketch = sketchify(frame, SketchConfig(epsilon=args.epsilon))
    save_gray_png(sketch, args.out)
    print(f"sketch {sketch.width}x{sketch.height} -> {args.out}")
    return 0


def _cmd_assemble(args: argparse.Namespace) -> int:
    manifest = dataset_mod.assemble_manifest(args.root)
    dataset_mod.save_manifest(manifest, args.manifest)
    n = len(manifest.all_triplets())
    print(
        f"{n} triplets, {sum(len(r) for r in manifest.subsets.values())} sequences, "
        f"{len(manifest.violations)} violations -> {args.manifest}"
    )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    manifest = dataset_mod.assemble_manifest(args.root)
    for v in manifest.violations:
        print(f"[{v.rule}] {v.path}: {v.detail}")
    n = len(manifest.all_triplets())
    print(f"{n} valid triplets, {len(manifest.violations)} violations")
    return 1 if manifest.violations else 0


def _cmd_stats(args: argparse.Namespace) -> int:
    manifest = dataset_mod.load_manifest(args.manifest)
    stats = dataset_mod.compute_stats(manifest)
    payload = dataset_mod.stats_to_dict(stats)
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        for key, value in payload.items():
            print(f"{key:32s} {value}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    video = load_frames(args.video)
    sketch = load_gray_png(args.sketch)
    appearance = Path(args.appearance).read_text(encoding="utf-8").strip()
    story = Path(args.story).read_text(encoding="utf-8").strip()
    events_payload = json.loads(Path(args.events).read_text(encoding="utf-8"))
    events = EventSpec(
        events=tuple(events_payload["events"]),
        match_threshold=float(events_payload.get("match_threshold", 0.3)),
    )
    providers = _load_providers(args.providers)
    if args.embeddings:
        providers.embed_image = embedding_dir_provider(args.embeddings)
    config = EvalConfig(sample_count=args.samples)
    with providers:
        report = evaluate_shot(
            sketch, video, appearance, story, events, providers, config=config
        )
    Path(args.out).write_text(
        json.dumps(report.as_dict(), indent=2), encoding="utf-8"
    )
    print(f"report -> {args.out}")
    if report.errors:
        for name, err in report.errors.items():
            print(f"  [error] {name}: {err}", file=sys.stderr)
        return 1
    return 0


def _load_board(path: str) -> list[dict]:
    board = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(board, list) or not board:
        raise SystemExit("storyboard must be a non-empty JSON list")
    return board


def _cmd_plan(args: argparse.Namespace) -> int:
    board = _load_board(args.storyboard)
    providers = _load_providers(args.providers)
    shots_out = []
    with providers:
        for entry in board:
            sketch = load_gray_png(entry["sketch_path"])
            appearance = Path(entry["appearance_path"]).read_text(encoding="utf-8").strip()
            story = Path(entry["story_path"]).read_text(encoding="utf-8").strip()
            n_stages = int(entry.get("n_stages", 5))
            shot = StoryboardShot(
                sketch=sketch,
                appearance=prompts_mod.AppearancePrompt(text=appearance),
                motion=prompts_mod.MotionPrompt(text=story),
                n_stages=n_stages,
            )
            assets = prompts_mod.decompose_stages(shot.motion, n_stages, providers)
            graph = plan_shot(shot, assets)
            shots_out.append(
                {
                    "sketch_path": entry["sketch_path"],
                    "appearance": appearance,
                    "motion": story,
                    "n_stages": n_stages,
                    "assets": prompts_mod.stage_assets_to_dict(assets),
                    "nodes": [
                        {
                            "id": n.id,
                            "kind": n.kind,
                            "stage": n.stage,
                            "deps": list(n.deps),
                        }
                        for n in graph.nodes
                    ],
                }
            )
    Path(args.out).write_text(
        json.dumps({"shots": shots_out}, indent=2), encoding="utf-8"
    )
    print(f"{len(shots_out)} shot graphs -> {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    plan = json.loads(Path(args.plan).read_text(encoding="utf-8"))
    providers = _load_providers(args.providers)
    cfg = (
        StageConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
        if args.config
        else StageConfig()
    )
    board: list[StoryboardShot] = []
    assets_per_shot = []
    for entry in plan["shots"]:
        board.append(
            StoryboardShot(
                sketch=load_gray_png(entry["sketch_path"]),
                appearance=prompts_mod.AppearancePrompt(text=entry["appearance"]),
                motion=prompts_mod.MotionPrompt(text=entry["motion"]),
                n_stages=int(entry["n_stages"]),
            )
        )
        assets_per_shot.append(prompts_mod.stage_assets_from_dict(entry["assets"]))
    outdir = Path(args.out)
    with providers:
        video = run_storyboard(
            board,
            providers,
            cfg,
            assets_per_shot=assets_per_shot,
            clip_frames=args.clip_frames,
            cache_dir=outdir / "artifacts",
            on_error=args.on_error,
            workers=args.workers,
            fps=args.fps,
        )
    export_video(video, outdir, fps=args.fps)
    for k, assets in enumerate(assets_per_shot):
        shot_dir = outdir / f"shot_{k:03d}"
        shot_dir.mkdir(parents=True, exist_ok=True)
        prompts_mod.save_stage_assets(assets, shot_dir / "stages.json")
    print(f"{len(video.frames)} frames -> {outdir}")
    if video.skipped_shots:
        print(f"skipped shots: {list(video.skipped_shots)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchboard",
        description="Storyboard dataset, generation, and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="detect shot boundaries")
    p.add_argument("--input", required=True)
    p.add_argument("--threshold", type=float, default=25.0)
    p.add_argument("--min-shot-len", type=int, default=2)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("sketchify", help="convert a keyframe to a sketch")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.set_defaults(func=_cmd_sketchify)

    p = sub.add_parser("assemble", help="build a dataset manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("validate", help="report dataset layout violations")
    p.add_argument("--root", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stats", help="corpus statistics from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("evaluate", help="score a generated shot")
    p.add_argument("--video", required=True)
    p.add_argument("--sketch", required=True)
    p.add_argument("--appearance", required=True)
    p.add_argument("--story", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--providers", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("plan", help="expand a storyboard into shot job graphs")
    p.add_argument("--storyboard", required=True)
    p.add_argument("--providers", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("run", help="execute a plan against providers")
    p.add_argument("--plan", required=True)
    p.add_argument("--providers", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--clip-frames", type=int, default=None)
    p.add_argument("--on-error", choices=("abort", "skip"), default="abort")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--fps", type=float, default=16.0)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
