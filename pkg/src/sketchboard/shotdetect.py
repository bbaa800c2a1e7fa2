"""Shot boundary detection from per-frame content differences.

A boundary fires whenever the HSV content difference between consecutive
frames exceeds a threshold; runs of frames between boundaries become shots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import Frame, FrameError, FrameSequence


@dataclass(frozen=True)
class ShotDetectConfig:
    threshold: float = 25.0
    min_shot_len: int = 2

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")
        if self.min_shot_len < 1:
            raise ValueError("min_shot_len must be >= 1")


@dataclass(frozen=True)
class Shot:
    """Inclusive frame interval [start, end]."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"shot start {self.start} > end {self.end}")

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class BoundaryTrace:
    """Per-transition scores and boundary flags (index t covers frames t-1 -> t)."""

    scores: tuple[float, ...]
    flags: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.scores) != len(self.flags):
            raise ValueError("scores and flags must have equal length")


def rgb_to_hsv255(f: Frame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convert to HSV with every channel scaled to [0, 255].

    Hue follows the standard hexagonal formula (degrees scaled by 255/360),
    saturation is (max-min)/max, value is max(R, G, B). Achromatic pixels
    get H = S = 0.
    """
    rgb = f.pixels.astype(np.float64)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    delta = maxc - minc

    v = maxc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1) * 255.0, 0.0)

    safe = np.where(delta > 0, delta, 1)
    h_deg = np.select(
        [delta == 0, maxc == r, maxc == g],
        [
            np.zeros_like(delta),
            np.mod(60.0 * (g - b) / safe, 360.0),
            60.0 * (b - r) / safe + 120.0,
        ],
        default=60.0 * (r - g) / safe + 240.0,
    )
    h = h_deg * (255.0 / 360.0)
    return h, s, v


def content_difference(a: Frame, b: Frame) -> float:
    """Mean absolute HSV channel difference, hue taken circularly.

    Returns (mean|dH| + mean|dS| + mean|dV|) / 3 on the 0-255 scale, where
    the hue delta is min(|d|, 255 - |d|).
    """
    if (a.width, a.height) != (b.width, b.height):
        raise FrameError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    ha, sa, va = rgb_to_hsv255(a)
    hb, sb, vb = rgb_to_hsv255(b)
    dh = np.abs(ha - hb)
    dh = np.minimum(dh, 255.0 - dh)
    return float((dh.mean() + np.abs(sa - sb).mean() + np.abs(va - vb).mean()) / 3.0)


def shots_from_scores(
    scores: list[float] | tuple[float, ...],
    n_frames: int,
    cfg: ShotDetectConfig,
) -> tuple[list[Shot], BoundaryTrace]:
    """Threshold a score list into shots covering [0, n_frames - 1].

    ``scores[t - 1]`` is the difference between frames t-1 and t. A score
    strictly above the threshold starts a new shot at frame t. Shots shorter
    than ``min_shot_len`` are merged into their predecessor; the first shot
    is never merged away.
    """
    if n_frames < 1:
        raise ValueError("empty sequence")
    if len(scores) != n_frames - 1:
        raise ValueError(f"expected {n_frames - 1} scores, got {len(scores)}")
    flags = tuple(1 if s > cfg.threshold else 0 for s in scores)

    starts = [0] + [t for t in range(1, n_frames) if flags[t - 1] == 1]
    raw = [
        Shot(start=s, end=(starts[i + 1] - 1 if i + 1 < len(starts) else n_frames - 1))
        for i, s in enumerate(starts)
    ]

    merged: list[Shot] = []
    for shot in raw:
        if merged and len(shot) < cfg.min_shot_len:
            merged[-1] = Shot(start=merged[-1].start, end=shot.end)
        else:
            merged.append(shot)
    return merged, BoundaryTrace(scores=tuple(float(s) for s in scores), flags=flags)


def detect_shots(
    seq: FrameSequence, cfg: ShotDetectConfig | None = None
) -> tuple[list[Shot], BoundaryTrace]:
    """Segment a frame sequence into contiguous shots.

    The returned shots partition [0, len(seq) - 1] in order with no gaps.
    """
    cfg = cfg or ShotDetectConfig()
    if len(seq) < 1:
        raise FrameError("empty sequence")
    scores = [
        content_difference(seq[t], seq[t - 1]) for t in range(1, len(seq))
    ]
    return shots_from_scores(scores, len(seq), cfg)


def select_keyframes(shot: Shot, policy: str = "center") -> list[int]:
    """Representative frame indices for a shot.

    ``center`` returns [(start + end) // 2]; ``center+endpoints`` adds the
    shot endpoints, deduplicated and sorted.
    """
    center = (shot.start + shot.end) // 2
    if policy == "center":
        return [center]
    if policy == "center+endpoints":
        return sorted({shot.start, center, shot.end})
    raise ValueError(f"unknown keyframe policy: {policy!r}")
