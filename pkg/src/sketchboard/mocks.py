"""Deterministic in-process stand-ins for every neural capability.

Each mock is a pure function of its inputs, so a whole pipeline run under
mocks is reproducible byte-for-byte. The same functions back the mock wire
server, letting the protocol stack be exercised without any model.
"""

from __future__ import annotations

import json
import sys
from typing import Any

import numpy as np

from . import prompts as prompts_mod
from .frames import Frame, FrameError, GrayImage, to_grayscale
from .metrics import EmbeddingVector
from .protocol import (
    PROTOCOL_OPS,
    encode_response,
    frame_from_b64,
    frame_to_b64,
    gray_from_b64,
    ProviderResponse,
)

EMBED_DIM = 64

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619


def fnv1a32(data: bytes) -> int:
    """32-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


def _basis_vector() -> EmbeddingVector:
    values = np.zeros(EMBED_DIM)
    values[0] = 1.0
    return EmbeddingVector(values=values)


def _block_mean_8x8(gray: np.ndarray) -> np.ndarray:
    h, w = gray.shape
    rows = [min(int(i * h / 8), h - 1) for i in range(8)] + [h]
    cols = [min(int(j * w / 8), w - 1) for j in range(8)] + [w]
    out = np.empty((8, 8), dtype=np.float64)
    for i in range(8):
        r0 = rows[i]
        r1 = max(rows[i + 1], r0 + 1)
        for j in range(8):
            c0 = cols[j]
            c1 = max(cols[j + 1], c0 + 1)
            out[i, j] = gray[r0:r1, c0:c1].mean()
    return out


def mock_embed_image(f: Frame) -> EmbeddingVector:
    """8x8 mean-pooled grayscale, centered and unit-normalized.

    Zero-variance images (uniform frames) fall back to the first basis
    vector so downstream cosines stay defined.
    """
    gray = to_grayscale(f).values.astype(np.float64)
    pooled = _block_mean_8x8(gray).reshape(-1)
    centered = pooled - pooled.mean()
    norm = np.linalg.norm(centered)
    if norm < 1e-9:
        return _basis_vector()
    return EmbeddingVector(values=centered / norm)


def mock_embed_text(text: str) -> EmbeddingVector:
    """Character trigrams hashed into 64 bins (FNV-1a), unit-normalized."""
    counts = np.zeros(EMBED_DIM, dtype=np.float64)
    for i in range(len(text) - 2):
        trigram = text[i : i + 3]
        counts[fnv1a32(trigram.encode("utf-8")) % EMBED_DIM] += 1.0
    norm = np.linalg.norm(counts)
    if norm < 1e-9:
        return _basis_vector()
    return EmbeddingVector(values=counts / norm)


def mock_perceptual(a: Frame, b: Frame) -> float:
    """Mean absolute pixel difference scaled to [0, 1]."""
    if a.pixels.shape != b.pixels.shape:
        raise FrameError("dimension mismatch")
    diff = np.abs(a.pixels.astype(np.float64) - b.pixels.astype(np.float64))
    return float(diff.mean() / 255.0)


def mock_generate_text(
    instruction: str,
    text: str,
    n_stages: int | None = None,
    format: str | None = None,
) -> str:
    """Echo-style text generation; stage requests get conforming JSON."""
    if format == "stage_assets" and n_stages:
        stages = []
        for i in range(1, n_stages + 1):
            stages.append(
                {
                    "stage": i,
                    "conversion": f"{text}, action state {i} of {n_stages}",
                    "positive": prompts_mod.DEFAULT_POSITIVE,
                    "action": f"stage {i}: {text}",
                    "face": f"expression stays steady through state {i}",
                    "body": f"pose shifts smoothly into state {i}",
                    "style": prompts_mod.DEFAULT_STYLE,
                }
            )
        return json.dumps({"stages": stages})
    return text


def mock_describe_image(f: Frame, query: str) -> str:
    gray = to_grayscale(f).values
    tone = int(gray.mean())
    head = query.split()[0].lower().rstrip(":") if query.split() else "image"
    return f"{head} region of a {f.width}x{f.height} frame with mean tone {tone}"


def mock_color_sketch(sketch: GrayImage, appearance: str) -> Frame:
    """Structure-preserving coloring: sketch in red, prompt hash in green/blue."""
    h = fnv1a32(appearance.encode("utf-8"))
    green = (h >> 8) & 0xFF
    blue = h & 0xFF
    pixels = np.empty((sketch.height, sketch.width, 3), dtype=np.uint8)
    pixels[:, :, 0] = sketch.values
    pixels[:, :, 1] = green
    pixels[:, :, 2] = blue
    return Frame(pixels=pixels)


def prompt_brightness_offset(conversion: str) -> int:
    """Deterministic per-prompt brightness shift in [-16, 16]."""
    return int(fnv1a32(conversion.encode("utf-8")) % 33) - 16


def mock_derive_keyframe(ref: Frame, conversion: str) -> Frame:
    offset = prompt_brightness_offset(conversion)
    shifted = np.clip(ref.pixels.astype(np.int16) + offset, 0, 255).astype(np.uint8)
    return Frame(pixels=shifted)


def mock_generate_clip(
    first: Frame, last: Frame, dynamic: Any, n_frames: int
) -> list[Frame]:
    """Linear cross-fade from first to last over ``n_frames`` frames."""
    if first.pixels.shape != last.pixels.shape:
        raise FrameError("first/last dimension mismatch")
    if n_frames < 2:
        raise ValueError("clip needs at least 2 frames")
    a = first.pixels.astype(np.float64)
    b = last.pixels.astype(np.float64)
    frames = []
    for j in range(n_frames):
        t = j / (n_frames - 1)
        mixed = np.floor((1.0 - t) * a + t * b + 0.5)
        frames.append(
            Frame(pixels=np.clip(mixed, 0, 255).astype(np.uint8), index=j)
        )
    return frames


MANIFEST = {
    "capabilities": list(PROTOCOL_OPS),
    "embedding_dim": EMBED_DIM,
    "models": {
        "embed_image": "mock-gray-8x8-pool",
        "embed_text": "mock-fnv-trigram",
        "perceptual": "mock-mean-absdiff",
        "generation": "mock-crossfade",
    },
}


class MockProviderServer:
    """Wire-protocol server over the in-process mocks.

    ``handle_line`` is a pure string-to-string map, which is what the
    conformance fuzz suite drives; ``serve_stdio`` wraps it in a stdin loop
    after emitting the manifest handshake.
    """

    def handle_request(self, req_id: int, op: str, payload: dict) -> ProviderResponse:
        try:
            result = self._dispatch(op, payload)
        except Exception as exc:
            return ProviderResponse(id=req_id, ok=False, error=f"{exc}")
        return ProviderResponse(id=req_id, ok=True, result=result)

    def _dispatch(self, op: str, payload: dict) -> dict:
        if op == "embed_image":
            vec = mock_embed_image(frame_from_b64(payload["image"]))
            return {"embedding": vec.values.tolist()}
        if op == "embed_text":
            vec = mock_embed_text(str(payload["text"]))
            return {"embedding": vec.values.tolist()}
        if op == "perceptual_distance":
            dist = mock_perceptual(
                frame_from_b64(payload["image_a"]), frame_from_b64(payload["image_b"])
            )
            return {"distance": dist}
        if op == "generate_text":
            out = mock_generate_text(
                str(payload.get("instruction", "")),
                str(payload.get("text", "")),
                n_stages=payload.get("n_stages"),
                format=payload.get("format"),
            )
            return {"text": out}
        if op == "describe_image":
            return {
                "text": mock_describe_image(
                    frame_from_b64(payload["image"]), str(payload.get("query", ""))
                )
            }
        if op == "color_sketch":
            frame = mock_color_sketch(
                gray_from_b64(payload["sketch"]), str(payload.get("appearance", ""))
            )
            return {"image": frame_to_b64(frame)}
        if op == "derive_keyframe":
            frame = mock_derive_keyframe(
                frame_from_b64(payload["reference"]), str(payload.get("conversion", ""))
            )
            return {"image": frame_to_b64(frame)}
        if op == "generate_clip":
            frames = mock_generate_clip(
                frame_from_b64(payload["first"]),
                frame_from_b64(payload["last"]),
                payload.get("dynamic"),
                int(payload["frames"]),
            )
            return {"frames": [frame_to_b64(f) for f in frames]}
        raise ValueError(f"unsupported op: {op!r}")

    def handle_line(self, line: str) -> str:
        try:
            obj = json.loads(line)
            req_id = int(obj["id"])
            op = str(obj["op"])
            payload = dict(obj.get("payload", {}))
        except Exception as exc:
            return encode_response(
                ProviderResponse(id=-1, ok=False, error=f"malformed request: {exc}")
            )
        return encode_response(self.handle_request(req_id, op, payload))

    def serve_stdio(self, stdin=None, stdout=None) -> None:
        stdin = stdin if stdin is not None else sys.stdin
        stdout = stdout if stdout is not None else sys.stdout
        stdout.write(json.dumps({"manifest": MANIFEST}) + "\n")
        stdout.flush()
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            stdout.write(self.handle_line(line) + "\n")
            stdout.flush()
