"""Per-shot job graphs and whole-storyboard execution.

Each shot expands into a small DAG: one anchor coloring node, one derivative
keyframe node per stage, one clip node per stage, and a final concatenation.
Node outputs are content-addressed on disk when a cache directory is given,
so interrupted runs resume without redoing finished work.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frames import Frame, FrameSequence, GrayImage, save_frame_png
from .prompts import AppearancePrompt, MotionPrompt, StageAsset
from .providers import ProviderSet, StageConfig

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A job-graph invariant broke or a backend call failed mid-run."""


@dataclass(frozen=True)
class StoryboardShot:
    """One storyboard entry: sketch, appearance prompt, motion prompt."""

    sketch: GrayImage
    appearance: AppearancePrompt
    motion: MotionPrompt
    n_stages: int = 5

    def __post_init__(self) -> None:
        if self.n_stages < 1:
            raise PipelineError("n_stages must be >= 1")


@dataclass(frozen=True)
class JobNode:
    id: str
    kind: str  # color | derive | clip | concat
    stage: int | None
    deps: tuple[str, ...]


@dataclass(frozen=True)
class JobGraph:
    shot: StoryboardShot
    assets: tuple[StageAsset, ...]
    nodes: tuple[JobNode, ...]

    @property
    def n_stages(self) -> int:
        return self.shot.n_stages

    def node_map(self) -> dict[str, JobNode]:
        return {n.id: n for n in self.nodes}


@dataclass(frozen=True)
class FrameProvenance:
    shot: int
    clip: int
    local: int


@dataclass(frozen=True, eq=False)
class ShotVideo:
    frames: FrameSequence
    provenance: tuple[FrameProvenance, ...]

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.provenance):
            raise PipelineError("provenance must cover every frame")


@dataclass(frozen=True, eq=False)
class LongVideo:
    frames: FrameSequence
    provenance: tuple[FrameProvenance, ...]
    skipped_shots: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.provenance):
            raise PipelineError("provenance must cover every frame")


def plan_shot(shot: StoryboardShot, assets: list[StageAsset]) -> JobGraph:
    """Wire the per-shot DAG: color -> derive_i -> clip_i -> concat.

    Every derivative depends on the anchor color node; clip i joins
    keyframes i-1 and i; the concat node collects every clip. Total node
    count is 2 * n_stages + 2.
    """
    n = shot.n_stages
    if len(assets) != n:
        raise PipelineError(f"expected {n} stage assets, got {len(assets)}")
    stages = [a.stage for a in sorted(assets, key=lambda a: a.stage)]
    if stages != list(range(1, n + 1)):
        raise PipelineError(f"stage ordinals not contiguous 1..{n}: {stages}")
    ordered = tuple(sorted(assets, key=lambda a: a.stage))

    nodes: list[JobNode] = [JobNode(id="color", kind="color", stage=0, deps=())]
    for i in range(1, n + 1):
        nodes.append(
            JobNode(id=f"derive_{i}", kind="derive", stage=i, deps=("color",))
        )
    for i in range(1, n + 1):
        prev = "color" if i == 1 else f"derive_{i - 1}"
        nodes.append(
            JobNode(
                id=f"clip_{i}", kind="clip", stage=i, deps=(prev, f"derive_{i}")
            )
        )
    nodes.append(
        JobNode(
            id="concat",
            kind="concat",
            stage=None,
            deps=tuple(f"clip_{i}" for i in range(1, n + 1)),
        )
    )
    return JobGraph(shot=shot, assets=ordered, nodes=tuple(nodes))


def _hash_array(arr: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def _hash_obj(payload) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


class ArtifactCache:
    """Content-addressed store for node outputs (NPY frames, NPZ clips)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _frame_path(self, key: str) -> Path:
        return self.root / f"{key}.npy"

    def _clip_path(self, key: str) -> Path:
        return self.root / f"{key}.npz"

    def load_frame(self, key: str) -> Frame | None:
        path = self._frame_path(key)
        if not path.exists():
            return None
        return Frame(pixels=np.load(path))

    def store_frame(self, key: str, frame: Frame) -> None:
        np.save(self._frame_path(key), frame.pixels)

    def load_clip(self, key: str) -> list[Frame] | None:
        path = self._clip_path(key)
        if not path.exists():
            return None
        stacked = np.load(path)["frames"]
        return [Frame(pixels=stacked[j], index=j) for j in range(stacked.shape[0])]

    def store_clip(self, key: str, frames: list[Frame]) -> None:
        np.savez(self._clip_path(key), frames=np.stack([f.pixels for f in frames]))


def _node_keys(graph: JobGraph, cfg: StageConfig, clip_frames: int) -> dict[str, str]:
    """Content keys per node, chaining upstream keys so any input change
    invalidates every dependent artifact."""
    keys: dict[str, str] = {}
    sketch_hash = _hash_array(graph.shot.sketch.values)
    keys["color"] = _hash_obj(
        {
            "kind": "color",
            "sketch": sketch_hash,
            "appearance": graph.shot.appearance.text,
            "cfg": cfg.to_dict()["coloring"],
        }
    )
    for asset in graph.assets:
        keys[f"derive_{asset.stage}"] = _hash_obj(
            {
                "kind": "derive",
                "anchor": keys["color"],
                "conversion": asset.conversion.text,
                "cfg": cfg.to_dict()["derivative"],
            }
        )
    for asset in graph.assets:
        i = asset.stage
        prev = keys["color"] if i == 1 else keys[f"derive_{i - 1}"]
        keys[f"clip_{i}"] = _hash_obj(
            {
                "kind": "clip",
                "first": prev,
                "last": keys[f"derive_{i}"],
                "dynamic": [
                    asset.dynamic.positive,
                    asset.dynamic.action,
                    asset.dynamic.face,
                    asset.dynamic.body,
                    asset.dynamic.style,
                ],
                "frames": clip_frames,
                "cfg": cfg.to_dict()["video"],
            }
        )
    return keys


def run_shot(
    graph: JobGraph,
    providers: ProviderSet,
    cfg: StageConfig | None = None,
    shot_index: int = 0,
    clip_frames: int | None = None,
    cache_dir: str | Path | None = None,
    workers: int = 1,
    fps: float = 16.0,
) -> ShotVideo:
    """Execute one shot graph and concatenate its clips.

    All derivative keyframes are generated from the shared anchor render.
    Adjacent clips share their endpoint keyframe, so the first frame of
    every clip after the first is dropped during concatenation. Completed
    node outputs persist in the cache even when a later node fails.
    """
    cfg = cfg or StageConfig()
    n_frames = clip_frames if clip_frames is not None else cfg.video.latent_frames
    if n_frames < 2:
        raise PipelineError("clips need at least 2 frames")
    cache = ArtifactCache(cache_dir) if cache_dir is not None else None
    keys = _node_keys(graph, cfg, n_frames)
    assets = {a.stage: a for a in graph.assets}
    results: dict[str, object] = {}

    def execute(node: JobNode) -> object:
        key = keys.get(node.id)
        if node.kind == "color":
            if cache is not None:
                cached = cache.load_frame(key)
                if cached is not None:
                    return cached
            out = providers.color_sketch(
                graph.shot.sketch, graph.shot.appearance.text, cfg.coloring
            )
            if cache is not None:
                cache.store_frame(key, out)
            return out
        if node.kind == "derive":
            if cache is not None:
                cached = cache.load_frame(key)
                if cached is not None:
                    return cached
            anchor = results["color"]
            out = providers.derive_keyframe(
                anchor, assets[node.stage].conversion.text, cfg.derivative
            )
            if cache is not None:
                cache.store_frame(key, out)
            return out
        if node.kind == "clip":
            if cache is not None:
                cached = cache.load_clip(key)
                if cached is not None:
                    return cached
            first = results[node.deps[0]]
            last = results[node.deps[1]]
            out = providers.generate_clip(
                first, last, assets[node.stage].dynamic, n_frames, cfg.video
            )
            if cache is not None:
                cache.store_clip(key, out)
            return out
        if node.kind == "concat":
            frames: list[Frame] = []
            provenance: list[FrameProvenance] = []
            for i in range(1, graph.n_stages + 1):
                clip = results[f"clip_{i}"]
                start = 1 if i > 1 else 0  # drop duplicated endpoint keyframe
                for j in range(start, len(clip)):
                    frames.append(Frame(pixels=clip[j].pixels, index=len(frames)))
                    provenance.append(
                        FrameProvenance(shot=shot_index, clip=i, local=j)
                    )
            return ShotVideo(
                frames=FrameSequence(frames=tuple(frames), fps=fps),
                provenance=tuple(provenance),
            )
        raise PipelineError(f"unknown node kind: {node.kind!r}")

    node_map = graph.node_map()
    remaining_deps = {n.id: set(n.deps) for n in graph.nodes}
    dependents: dict[str, list[str]] = {nid: [] for nid in node_map}
    for node in graph.nodes:
        for dep in node.deps:
            dependents[dep].append(node.id)
    submitted: set[str] = set()

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {}
        for nid, deps in remaining_deps.items():
            if not deps:
                submitted.add(nid)
                futures[pool.submit(execute, node_map[nid])] = nid
        while futures:
            done, _ = wait(futures, return_when=FIRST_COMPLETED)
            for fut in done:
                nid = futures.pop(fut)
                try:
                    results[nid] = fut.result()
                except Exception as exc:
                    for pending in futures:
                        pending.cancel()
                    raise PipelineError(
                        f"node {nid!r} failed: {exc}"
                    ) from exc
                for child in dependents[nid]:
                    remaining_deps[child].discard(nid)
                    if not remaining_deps[child] and child not in submitted:
                        submitted.add(child)
                        futures[pool.submit(execute, node_map[child])] = child

    if len(results) != len(graph.nodes):
        raise PipelineError("graph execution did not cover every node")
    return results["concat"]


def run_storyboard(
    board: list[StoryboardShot],
    providers: ProviderSet,
    cfg: StageConfig | None = None,
    assets_per_shot: list[list[StageAsset]] | None = None,
    clip_frames: int | None = None,
    cache_dir: str | Path | None = None,
    on_error: str = "abort",
    workers: int = 1,
    fps: float = 16.0,
) -> LongVideo:
    """Run every shot in board order and concatenate the results.

    Stage assets are decomposed through the text provider when not supplied.
    Cross-shot boundaries are cuts: no frame deduplication happens between
    shots. ``on_error`` is ``abort`` (raise on first failing shot) or
    ``skip`` (drop the shot and record its index).
    """
    from .prompts import decompose_stages  # local import to avoid cycle confusion

    if not board:
        raise PipelineError("empty storyboard")
    if on_error not in ("abort", "skip"):
        raise PipelineError(f"unknown on_error policy: {on_error!r}")
    if assets_per_shot is not None and len(assets_per_shot) != len(board):
        raise PipelineError("assets_per_shot length must match board")

    graphs: list[JobGraph] = []
    for k, shot in enumerate(board):
        assets = (
            assets_per_shot[k]
            if assets_per_shot is not None
            else decompose_stages(shot.motion, shot.n_stages, providers)
        )
        graphs.append(plan_shot(shot, assets))

    frames: list[Frame] = []
    provenance: list[FrameProvenance] = []
    skipped: list[int] = []
    for k, graph in enumerate(graphs):
        try:
            shot_video = run_shot(
                graph,
                providers,
                cfg,
                shot_index=k,
                clip_frames=clip_frames,
                cache_dir=cache_dir,
                workers=workers,
                fps=fps,
            )
        except PipelineError:
            if on_error == "abort":
                raise
            logger.warning("skipping failed shot %d", k)
            skipped.append(k)
            continue
        for f, prov in zip(shot_video.frames.frames, shot_video.provenance):
            frames.append(Frame(pixels=f.pixels, index=len(frames)))
            provenance.append(prov)
    if not frames:
        raise PipelineError("no shot produced frames")
    return LongVideo(
        frames=FrameSequence(frames=tuple(frames), fps=fps),
        provenance=tuple(provenance),
        skipped_shots=tuple(skipped),
    )


DEFAULT_ENCODER_TEMPLATE = (
    "ffmpeg",
    "-y",
    "-framerate",
    "{fps}",
    "-i",
    "{frames}",
    "{output}",
)


def export_video(
    v: LongVideo | ShotVideo,
    path: str | Path,
    fps: float = 16.0,
    encoder_template: tuple[str, ...] = DEFAULT_ENCODER_TEMPLATE,
) -> Path:
    """Write the frame directory, provenance JSON, and encoder manifest.

    The encoder is not invoked; the manifest records the exact command an
    external encoder would run over the written frame pattern.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(v.frames.frames):
        save_frame_png(frame, out / f"frame_{i:06d}.png")
    provenance = [
        {"frame": i, "shot": p.shot, "clip": p.clip, "local": p.local}
        for i, p in enumerate(v.provenance)
    ]
    (out / "provenance.json").write_text(
        json.dumps(provenance, indent=2), encoding="utf-8"
    )
    pattern = str(out / "frame_%06d.png")
    command = [
        part.replace("{fps}", str(fps))
        .replace("{frames}", pattern)
        .replace("{output}", str(out / "video.mp4"))
        for part in encoder_template
    ]
    manifest = {"command": command, "fps": fps, "pattern": pattern,
                "frame_count": len(v.frames)}
    (out / "encode_manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    return out
