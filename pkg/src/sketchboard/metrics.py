"""Video evaluation metrics: shot control, shot consistency, story
alignment, event metrics, and dynamic progression.

All semantic similarity goes through caller-supplied embedding providers
and all perceptual distance through a perceptual provider; the kernels here
are pure arithmetic over their outputs, so any engine (or deterministic
mock) can drive them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .frames import Frame, FrameSequence, GrayImage, gray_to_frame, to_grayscale
from .sketch import EdgeMap, canny_edges


class MetricError(ValueError):
    """Invalid metric inputs (dimension mismatches, empty inputs, ...)."""


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """Fixed-length real vector; providers return these unit-normalized."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise MetricError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(v)):
            raise MetricError("embedding has non-finite entries")
        object.__setattr__(self, "values", v)
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def normalized(self) -> "EmbeddingVector":
        n = self.norm()
        if n == 0:
            raise MetricError("cannot normalize a zero vector")
        return EmbeddingVector(values=self.values / n)


@dataclass(frozen=True)
class EventSpec:
    """Ordered local events and the similarity threshold for a match."""

    events: tuple[str, ...]
    match_threshold: float = 0.3

    def __post_init__(self) -> None:
        if len(self.events) < 1:
            raise MetricError("need at least one event")
        if not (-1.0 <= self.match_threshold <= 1.0):
            raise MetricError("match_threshold must lie in [-1, 1]")
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class EventMatchResult:
    best_scores: tuple[float, ...]
    matched: tuple[int, ...]
    best_positions: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (len(self.best_scores) == len(self.matched) == len(self.best_positions)):
            raise MetricError("event result fields must have equal length")


@dataclass(frozen=True)
class MetricWeights:
    """Weights of the controllability and progression mixtures.

    The controllability trio (success, order, confidence) and the
    progression trio (adjacent, long-range, coverage) must each sum to 1.
    ``change_threshold`` is the minimum adjacent-frame change counted as
    observable motion.
    """

    success_weight: float = 0.4
    order_weight: float = 0.3
    confidence_weight: float = 0.3
    adjacent_weight: float = 0.4
    long_range_weight: float = 0.3
    coverage_weight: float = 0.3
    change_threshold: float = 0.02

    def __post_init__(self) -> None:
        for name, total in (
            ("controllability", self.success_weight + self.order_weight + self.confidence_weight),
            ("progression", self.adjacent_weight + self.long_range_weight + self.coverage_weight),
        ):
            if abs(total - 1.0) > 1e-9:
                raise MetricError(f"{name} weights must sum to 1, got {total}")


@dataclass
class MetricReport:
    """One row of the ten-metric protocol plus the auxiliary order score.

    Ranges: lpips_shot and temp_lpips are nonnegative; clip_image_sim,
    temp_clip, static_align, and story_align lie in [-1, 1]; edge_f1 and
    event_completion in [0, 1]; event_order is 0 or 1; dynamic metrics are
    nonnegative mixtures bounded by their weight sums. Fields are None when
    the backing provider failed; the failure text lands in ``errors``.
    """

    lpips_shot: float | None = None
    clip_image_sim: float | None = None
    edge_f1: float | None = None
    temp_clip: float | None = None
    temp_lpips: float | None = None
    static_align: float | None = None
    story_align: float | None = None
    event_completion: float | None = None
    dynamic_controllability: float | None = None
    event_order: float | None = None
    dynamic_progression: float | None = None
    errors: dict[str, str] = field(default_factory=dict)

    METRIC_FIELDS = (
        "lpips_shot",
        "clip_image_sim",
        "edge_f1",
        "temp_clip",
        "temp_lpips",
        "static_align",
        "story_align",
        "event_completion",
        "dynamic_controllability",
        "event_order",
        "dynamic_progression",
    )

    def as_dict(self) -> dict:
        out: dict = {name: getattr(self, name) for name in self.METRIC_FIELDS}
        out["errors"] = dict(self.errors)
        return out


@dataclass(frozen=True)
class EvalConfig:
    """Knobs of evaluate_shot; everything here is a desk-test default."""

    sample_count: int = 16
    segment_count: int | None = None  # None: one segment per event
    canny_low: float = 100.0
    canny_high: float = 200.0
    canny_sigma: float = 1.4
    dilate_radius: int = 0


def cosine_sim(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, clamped to [-1, 1] against floating drift."""
    if a.dim != b.dim:
        raise MetricError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na, nb = a.norm(), b.norm()
    if na == 0 or nb == 0:
        raise MetricError("zero-norm vector")
    return float(np.clip(np.dot(a.values, b.values) / (na * nb), -1.0, 1.0))


def edge_f1(
    a: EdgeMap, b: EdgeMap, dilate_radius: int = 0
) -> tuple[float, float, float]:
    """Edge-overlap precision, recall, and F1.

    ``a`` is the sketch edge map, ``b`` the generated-frame edge map.
    Precision divides the intersection by |b|, recall by |a|. A positive
    ``dilate_radius`` dilates ``a`` by a square of that radius before
    intersecting (a tolerance band). Zero denominators score 0, as does
    F1 when precision + recall = 0.
    """
    if a.bits.shape != b.bits.shape:
        raise MetricError("edge map dimension mismatch")
    reference = a.bits
    if dilate_radius > 0:
        size = 2 * dilate_radius + 1
        reference = ndimage.binary_dilation(
            reference, structure=np.ones((size, size), dtype=bool)
        )
    inter = int(np.logical_and(reference, b.bits).sum())
    count_a = int(a.bits.sum())
    count_b = int(b.bits.sum())
    precision = inter / count_b if count_b else 0.0
    recall = inter / count_a if count_a else 0.0
    # 2PR/(P+R) reduced to one division; identical value, one rounding step
    f1 = 2 * inter / (count_a + count_b) if inter else 0.0
    return precision, recall, f1


def sample_frames(seq: FrameSequence, count: int) -> list[Frame]:
    """Uniformly sample ``count`` frames, always keeping the endpoints.

    Indices are round(k * (n - 1) / (count - 1)); with n <= count every
    frame is returned. Duplicates collapse, order is preserved.
    """
    if count < 1:
        raise MetricError("count must be >= 1")
    n = len(seq)
    if n == 0:
        raise MetricError("empty sequence")
    if count == 1:
        return [seq[0]]
    if n <= count:
        return list(seq.frames)
    picked: list[int] = []
    for k in range(count):
        idx = int(math.floor(k * (n - 1) / (count - 1) + 0.5))
        if not picked or idx != picked[-1]:
            picked.append(idx)
    return [seq[i] for i in picked]


def temporal_clip(anchor: Frame, samples: list[Frame], embed_image) -> float:
    """Mean embedding similarity between the anchor and each sample."""
    if not samples:
        raise MetricError("no samples")
    anchor_vec = embed_image(anchor)
    sims = [cosine_sim(anchor_vec, embed_image(f)) for f in samples]
    return float(np.mean(sims))


def temporal_lpips(anchor: Frame, samples: list[Frame], perceptual) -> float:
    """Mean perceptual distance between the anchor and each sample."""
    if not samples:
        raise MetricError("no samples")
    return float(np.mean([perceptual(anchor, f) for f in samples]))


def text_image_align(
    text: str, images: list[Frame], embed_text, embed_image
) -> float:
    """Text-image similarity; a single image scores directly, several average."""
    if not images:
        raise MetricError("no images")
    text_vec = embed_text(text)
    sims = [cosine_sim(text_vec, embed_image(img)) for img in images]
    return float(np.mean(sims))


def match_events_from_scores(
    table: list[list[float]],
    positions: list[float],
    match_threshold: float,
) -> EventMatchResult:
    """Threshold a (event x segment) similarity table into match results.

    For each event the best segment wins (earliest on ties); the event is
    matched when its best score reaches the threshold.
    """
    if not table or not table[0]:
        raise MetricError("empty score table")
    if any(len(row) != len(positions) for row in table):
        raise MetricError("table row length must match positions")
    best_scores: list[float] = []
    matched: list[int] = []
    best_positions: list[float] = []
    for row in table:
        best_j = 0
        for j in range(1, len(row)):
            if row[j] > row[best_j]:
                best_j = j
        best = row[best_j]
        best_scores.append(float(best))
        matched.append(1 if best >= match_threshold else 0)
        best_positions.append(float(positions[best_j]))
    return EventMatchResult(
        best_scores=tuple(best_scores),
        matched=tuple(matched),
        best_positions=tuple(best_positions),
    )


def match_events(
    spec: EventSpec,
    shot_segments: list[tuple[list[Frame], float]],
    embed_text,
    embed_image,
) -> EventMatchResult:
    """Match each event against shot segments.

    An event-segment similarity is the max text-image cosine over the
    segment's frames; each segment carries its temporal position.
    """
    if not shot_segments:
        raise MetricError("no shot segments")
    positions = [pos for _, pos in shot_segments]
    segment_vecs = [
        [embed_image(f) for f in frames] for frames, _ in shot_segments
    ]
    table: list[list[float]] = []
    for event in spec.events:
        text_vec = embed_text(event)
        row = []
        for vecs in segment_vecs:
            if not vecs:
                raise MetricError("segment without frames")
            row.append(max(cosine_sim(text_vec, v) for v in vecs))
        table.append(row)
    return match_events_from_scores(table, positions, spec.match_threshold)


def event_scores(
    match: EventMatchResult, w: MetricWeights | None = None
) -> tuple[float, float, float]:
    """Event completion, order score, and dynamic controllability.

    Completion is the matched fraction. The order score checks that matched
    events appear at non-decreasing positions (vacuously 1 with fewer than
    two matches). Controllability mixes the success rate, the ratio of
    correctly ordered adjacent matched pairs (1 when no pair is valid), and
    the mean best score.
    """
    w = w or MetricWeights()
    n = len(match.matched)
    if n == 0:
        raise MetricError("empty match result")
    success_rate = sum(match.matched) / n

    matched_positions = [
        match.best_positions[i] for i in range(n) if match.matched[i]
    ]
    order = 1.0
    for prev, nxt in zip(matched_positions, matched_positions[1:]):
        if nxt < prev:
            order = 0.0
            break

    valid_pairs = 0
    ordered_pairs = 0
    for i in range(n - 1):
        if match.matched[i] and match.matched[i + 1]:
            valid_pairs += 1
            if match.best_positions[i] <= match.best_positions[i + 1]:
                ordered_pairs += 1
    order_rate = ordered_pairs / valid_pairs if valid_pairs else 1.0

    confidence = sum(match.best_scores) / n
    controllability = (
        w.success_weight * success_rate
        + w.order_weight * order_rate
        + w.confidence_weight * confidence
    )
    return float(success_rate), float(order), float(controllability)


def progression_from_sims(
    adjacent_sims: list[float],
    first_last_sim: float,
    w: MetricWeights | None = None,
) -> float:
    """Dynamic progression from precomputed similarities.

    Mixes the mean adjacent-frame change, the first-to-last change, and the
    fraction of adjacent changes at or above the change threshold.
    """
    w = w or MetricWeights()
    if not adjacent_sims:
        raise MetricError("need at least one adjacent pair")
    changes = [1.0 - s for s in adjacent_sims]
    mean_adjacent = sum(changes) / len(changes)
    long_range = 1.0 - first_last_sim
    coverage = sum(1 for c in changes if c >= w.change_threshold) / len(changes)
    return float(
        w.adjacent_weight * mean_adjacent
        + w.long_range_weight * long_range
        + w.coverage_weight * coverage
    )


def dynamic_progression(
    samples: list[Frame], embed_image, w: MetricWeights | None = None
) -> float:
    """Observable-motion score over sampled frames (needs >= 2 samples)."""
    if len(samples) < 2:
        raise MetricError("need at least 2 samples")
    vecs = [embed_image(f) for f in samples]
    adjacent = [cosine_sim(vecs[i], vecs[i + 1]) for i in range(len(vecs) - 1)]
    return progression_from_sims(adjacent, cosine_sim(vecs[0], vecs[-1]), w)


def _split_segments(
    seq: FrameSequence, n_segments: int, sample_count: int
) -> list[tuple[list[Frame], float]]:
    """Cut a sequence into contiguous segments, each sampled for matching."""
    n = len(seq)
    n_segments = max(1, min(n_segments, n))
    bounds = [round(i * n / n_segments) for i in range(n_segments + 1)]
    segments: list[tuple[list[Frame], float]] = []
    for j in range(n_segments):
        frames = list(seq.frames[bounds[j] : bounds[j + 1]])
        if not frames:
            continue
        sub = FrameSequence(frames=tuple(frames), fps=seq.fps)
        per_seg = max(1, sample_count // n_segments)
        segments.append((sample_frames(sub, per_seg), float(j)))
    return segments


def evaluate_shot(
    sketch: GrayImage,
    video: FrameSequence,
    appearance_text: str,
    motion_text: str,
    events: EventSpec,
    providers,
    w: MetricWeights | None = None,
    config: EvalConfig | None = None,
) -> MetricReport:
    """Score one generated shot against its inputs with all ten metrics.

    Shot-control metrics compare the sketch with frame 0; consistency
    metrics anchor on frame 0; story alignment uses the prompt texts; the
    event metrics match the event list against temporal segments. Provider
    failures surface per metric in ``report.errors`` instead of aborting.
    """
    w = w or MetricWeights()
    config = config or EvalConfig()
    if len(video) == 0:
        raise MetricError("empty video")
    report = MetricReport()
    first = video[0]
    sketch_frame = gray_to_frame(sketch)

    def attempt(name: str, fn) -> None:
        try:
            setattr(report, name, float(fn()))
        except Exception as exc:  # metric slots stay partial on provider failure
            report.errors[name] = f"{type(exc).__name__}: {exc}"

    samples = sample_frames(video, config.sample_count)

    attempt("lpips_shot", lambda: providers.perceptual_distance(sketch_frame, first))
    attempt(
        "clip_image_sim",
        lambda: cosine_sim(
            providers.embed_image(sketch_frame), providers.embed_image(first)
        ),
    )

    def edge_metric() -> float:
        sketch_edges = canny_edges(
            sketch, config.canny_low, config.canny_high, config.canny_sigma
        )
        frame_edges = canny_edges(
            to_grayscale(first), config.canny_low, config.canny_high, config.canny_sigma
        )
        _, _, f1 = edge_f1(sketch_edges, frame_edges, config.dilate_radius)
        return f1

    attempt("edge_f1", edge_metric)
    attempt("temp_clip", lambda: temporal_clip(first, samples, providers.embed_image))
    attempt(
        "temp_lpips",
        lambda: temporal_lpips(first, samples, providers.perceptual_distance),
    )
    attempt(
        "static_align",
        lambda: text_image_align(
            appearance_text, [first], providers.embed_text, providers.embed_image
        ),
    )
    attempt(
        "story_align",
        lambda: text_image_align(
            motion_text, samples, providers.embed_text, providers.embed_image
        ),
    )

    def event_metrics() -> tuple[float, float, float]:
        n_segments = config.segment_count or len(events.events)
        segments = _split_segments(video, n_segments, config.sample_count)
        match = match_events(
            events, segments, providers.embed_text, providers.embed_image
        )
        return event_scores(match, w)

    try:
        completion, order, controllability = event_metrics()
        report.event_completion = completion
        report.event_order = order
        report.dynamic_controllability = controllability
    except Exception as exc:
        msg = f"{type(exc).__name__}: {exc}"
        for name in ("event_completion", "event_order", "dynamic_controllability"):
            report.errors[name] = msg

    attempt(
        "dynamic_progression",
        lambda: dynamic_progression(samples, providers.embed_image, w)
        if len(samples) >= 2
        else 0.0,
    )
    return report
