"""Typed provider facade and the providers.json registry.

``ProviderSet`` is what metrics and the pipeline consume: plain callables
over domain types. It can be assembled from the in-process mocks or from a
registry file mapping each capability to a transport (``mock``, ``stdio``
subprocess command, or ``http`` URL).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable

from . import mocks
from .frames import Frame, GrayImage
from .metrics import EmbeddingVector, MetricError
from .prompts import StructuredDynamicPrompt
from .protocol import (
    HttpConnection,
    ProviderError,
    SubprocessConnection,
    frame_from_b64,
    frame_to_b64,
    gray_to_b64,
)

#: Negative prompt forwarded verbatim with every coloring request.
COLORING_NEGATIVE_PROMPT = (
    "blurry, low quality, distorted face, extra limbs, wrong anatomy, "
    "duplicate characters, text, watermark, background drift, camera motion, "
    "flicker"
)

#: Negative prompt forwarded verbatim with every clip-synthesis request.
VIDEO_NEGATIVE_PROMPT = (
    "background change, camera movement, flicker, unstable outlines, "
    "identity drift, face drift, deformed anatomy, static pose, frozen "
    "motion, weak action, no visible transition between start and end pose"
)

SUPPORTED_VIDEO_RESOLUTIONS = ((640, 480), (640, 640))


@dataclass(frozen=True)
class ColoringConfig:
    control_strength: float = 0.95
    steps: int = 15
    cfg_scale: float = 7.0
    denoise: float = 0.8
    guidance: float = 3.5
    preprocess_resolution: int = 1024

    def __post_init__(self) -> None:
        for name in ("control_strength", "steps", "cfg_scale", "denoise",
                     "guidance", "preprocess_resolution"):
            if getattr(self, name) <= 0:
                raise ValueError(f"coloring {name} must be positive")


@dataclass(frozen=True)
class DerivativeConfig:
    steps: int = 20
    cfg_scale: float = 1.0
    guidance: float = 2.5
    sampler: str = "euler"
    scheduler: str = "simple"

    def __post_init__(self) -> None:
        for name in ("steps", "cfg_scale", "guidance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"derivative {name} must be positive")


@dataclass(frozen=True)
class VideoConfig:
    steps: int = 20
    cfg_scale: float = 4.0
    high_noise_range: tuple[int, int] = (0, 10)
    latent_frames: int = 81
    resolution: tuple[int, int] = (640, 480)

    def __post_init__(self) -> None:
        if self.steps <= 0 or self.cfg_scale <= 0 or self.latent_frames <= 0:
            raise ValueError("video steps/cfg_scale/latent_frames must be positive")
        if tuple(self.resolution) not in SUPPORTED_VIDEO_RESOLUTIONS:
            raise ValueError(f"unsupported video resolution: {self.resolution}")
        object.__setattr__(self, "high_noise_range", tuple(self.high_noise_range))
        object.__setattr__(self, "resolution", tuple(self.resolution))


@dataclass(frozen=True)
class StageConfig:
    """Per-stage generation parameters, carried opaquely to the backends."""

    coloring: ColoringConfig = field(default_factory=ColoringConfig)
    derivative: DerivativeConfig = field(default_factory=DerivativeConfig)
    video: VideoConfig = field(default_factory=VideoConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "StageConfig":
        coloring = payload.get("coloring", {})
        derivative = payload.get("derivative", {})
        video = dict(payload.get("video", {}))
        if "high_noise_range" in video:
            video["high_noise_range"] = tuple(video["high_noise_range"])
        if "resolution" in video:
            video["resolution"] = tuple(video["resolution"])
        return cls(
            coloring=ColoringConfig(**coloring),
            derivative=DerivativeConfig(**derivative),
            video=VideoConfig(**video),
        )


@dataclass
class ProviderSet:
    """Callable bundle consumed by metrics, prompts, and the pipeline."""

    embed_image: Callable[[Frame], EmbeddingVector]
    embed_text: Callable[[str], EmbeddingVector]
    perceptual_distance: Callable[[Frame, Frame], float]
    generate_text: Callable[..., str]
    describe_image: Callable[[Frame, str], str]
    color_sketch: Callable[[GrayImage, str, ColoringConfig], Frame]
    derive_keyframe: Callable[[Frame, str, DerivativeConfig], Frame]
    generate_clip: Callable[
        [Frame, Frame, StructuredDynamicPrompt, int, VideoConfig], list[Frame]
    ]
    close: Callable[[], None] = lambda: None

    def __enter__(self) -> "ProviderSet":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    @classmethod
    def from_mocks(cls) -> "ProviderSet":
        return cls(
            embed_image=mocks.mock_embed_image,
            embed_text=mocks.mock_embed_text,
            perceptual_distance=mocks.mock_perceptual,
            generate_text=mocks.mock_generate_text,
            describe_image=mocks.mock_describe_image,
            color_sketch=lambda sketch, appearance, cfg: mocks.mock_color_sketch(
                sketch, appearance
            ),
            derive_keyframe=lambda ref, conversion, cfg: mocks.mock_derive_keyframe(
                ref, conversion
            ),
            generate_clip=lambda first, last, dynamic, n, cfg: mocks.mock_generate_clip(
                first, last, dynamic, n
            ),
        )


def _wire_calls(conn, declared_dim: int | None):
    """Build the typed callables over one wire connection."""

    def embed_image(f: Frame) -> EmbeddingVector:
        result = conn.call("embed_image", {"image": frame_to_b64(f)})
        vec = EmbeddingVector(values=result["embedding"])
        if declared_dim is not None and vec.dim != declared_dim:
            raise MetricError(
                f"provider returned dim {vec.dim}, declared {declared_dim}"
            )
        return vec

    def embed_text(text: str) -> EmbeddingVector:
        result = conn.call("embed_text", {"text": text})
        vec = EmbeddingVector(values=result["embedding"])
        if declared_dim is not None and vec.dim != declared_dim:
            raise MetricError(
                f"provider returned dim {vec.dim}, declared {declared_dim}"
            )
        return vec

    def perceptual(a: Frame, b: Frame) -> float:
        result = conn.call(
            "perceptual_distance",
            {"image_a": frame_to_b64(a), "image_b": frame_to_b64(b)},
        )
        return float(result["distance"])

    def generate_text(instruction: str, text: str, **hints) -> str:
        payload = {"instruction": instruction, "text": text, **hints}
        return str(conn.call("generate_text", payload)["text"])

    def describe_image(f: Frame, query: str) -> str:
        return str(
            conn.call("describe_image", {"image": frame_to_b64(f), "query": query})[
                "text"
            ]
        )

    def color_sketch(sketch: GrayImage, appearance: str, cfg: ColoringConfig) -> Frame:
        result = conn.call(
            "color_sketch",
            {
                "sketch": gray_to_b64(sketch),
                "appearance": appearance,
                "negative": COLORING_NEGATIVE_PROMPT,
                "config": asdict(cfg),
            },
        )
        return frame_from_b64(result["image"])

    def derive_keyframe(ref: Frame, conversion: str, cfg: DerivativeConfig) -> Frame:
        result = conn.call(
            "derive_keyframe",
            {
                "reference": frame_to_b64(ref),
                "conversion": conversion,
                "config": asdict(cfg),
            },
        )
        return frame_from_b64(result["image"])

    def generate_clip(
        first: Frame,
        last: Frame,
        dynamic: StructuredDynamicPrompt,
        n_frames: int,
        cfg: VideoConfig,
    ) -> list[Frame]:
        result = conn.call(
            "generate_clip",
            {
                "first": frame_to_b64(first),
                "last": frame_to_b64(last),
                "dynamic": {
                    "positive": dynamic.positive,
                    "action": dynamic.action,
                    "face": dynamic.face,
                    "body": dynamic.body,
                    "style": dynamic.style,
                },
                "negative": VIDEO_NEGATIVE_PROMPT,
                "frames": n_frames,
                "config": asdict(cfg),
            },
            timeout=120.0,
        )
        return [frame_from_b64(b, index=i) for i, b in enumerate(result["frames"])]

    return {
        "embed_image": embed_image,
        "embed_text": embed_text,
        "perceptual_distance": perceptual,
        "generate_text": generate_text,
        "describe_image": describe_image,
        "color_sketch": color_sketch,
        "derive_keyframe": derive_keyframe,
        "generate_clip": generate_clip,
    }


CAPABILITY_GROUPS = {
    "embedding": ("embed_image", "embed_text"),
    "perceptual": ("perceptual_distance",),
    "text": ("generate_text", "describe_image"),
    "generation": ("color_sketch", "derive_keyframe", "generate_clip"),
}


def load_provider_set(registry: dict | str | Path) -> ProviderSet:
    """Assemble a ProviderSet from a providers.json registry.

    The registry maps capability groups (``embedding``, ``perceptual``,
    ``text``, ``generation``) or individual ops to entries like
    ``{"transport": "stdio", "command": [...], "dim": 64}``,
    ``{"transport": "http", "url": ...}`` or ``{"transport": "mock"}``.
    Unlisted ops fall back to the mocks.
    """
    if not isinstance(registry, dict):
        registry = json.loads(Path(registry).read_text(encoding="utf-8"))

    mocks_set = ProviderSet.from_mocks()
    calls = {
        op: getattr(mocks_set, op)
        for ops in CAPABILITY_GROUPS.values()
        for op in ops
    }
    connections: list = []
    entries: dict[str, dict] = {}
    for key, entry in registry.items():
        ops = CAPABILITY_GROUPS.get(key, (key,))
        for op in ops:
            if op not in calls:
                raise ProviderError(f"unknown capability in registry: {key!r}")
            entries[op] = entry

    # one connection per distinct stdio command / http url
    conn_cache: dict[str, object] = {}
    for op, entry in entries.items():
        transport = entry.get("transport", "mock")
        if transport == "mock":
            continue
        if transport == "stdio":
            cache_key = "stdio:" + json.dumps(entry["command"])
            if cache_key not in conn_cache:
                conn = SubprocessConnection(list(entry["command"]))
                conn_cache[cache_key] = conn
                connections.append(conn)
        elif transport == "http":
            cache_key = "http:" + entry["url"]
            if cache_key not in conn_cache:
                conn = HttpConnection(entry["url"])
                conn_cache[cache_key] = conn
                connections.append(conn)
        else:
            raise ProviderError(f"unknown transport: {transport!r}")
        wire = _wire_calls(conn_cache[cache_key], entry.get("dim"))
        calls[op] = wire[op]

    def close() -> None:
        for conn in connections:
            conn.close()

    return ProviderSet(close=close, **calls)


def embedding_dir_provider(directory: str | Path):
    """Image embedder reading precomputed per-frame vectors from JSON files.

    Frame index ``i`` maps to ``<directory>/<i:06d>.json`` holding one JSON
    array. Bypasses any image-embedding backend.
    """
    directory = Path(directory)

    def embed_image(f: Frame) -> EmbeddingVector:
        path = directory / f"{f.index:06d}.json"
        if not path.exists():
            raise ProviderError(f"no precomputed embedding for frame {f.index}: {path}")
        return EmbeddingVector(values=json.loads(path.read_text(encoding="utf-8")))

    return embed_image
