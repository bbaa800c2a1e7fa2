"""Triplet dataset assembly, layout validation, and corpus statistics.

A corpus root contains subset directories, each holding ``video_XXX``
directories with the three modality folders ``sketch``, ``static_prompt``,
and ``story``. Every sample is named ``video_XXX_keyframe_XXXX`` across all
three folders. Validation problems are reported, never fatal: invalid
triplets are excluded from the manifest and listed as violations.
"""

from __future__ import annotations

import json
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

MODALITY_DIRS = ("sketch", "static_prompt", "story")
_ID_RE = re.compile(r"^video_(\d{3})_keyframe_(\d{4})$")
_VIDEO_DIR_RE = re.compile(r"^video_(\d{3})$")


class DatasetError(ValueError):
    """Raised for unusable corpus roots, not per-triplet problems."""


@dataclass(frozen=True, order=True)
class TripletId:
    video: int
    keyframe: int

    def __post_init__(self) -> None:
        if not (0 <= self.video <= 999):
            raise DatasetError(f"video ordinal out of range: {self.video}")
        if not (0 <= self.keyframe <= 9999):
            raise DatasetError(f"keyframe ordinal out of range: {self.keyframe}")

    def __str__(self) -> str:
        return f"video_{self.video:03d}_keyframe_{self.keyframe:04d}"

    @classmethod
    def parse(cls, text: str) -> "TripletId":
        m = _ID_RE.match(text)
        if m is None:
            raise DatasetError(f"malformed triplet id: {text!r}")
        return cls(video=int(m.group(1)), keyframe=int(m.group(2)))


@dataclass(frozen=True)
class Triplet:
    id: TripletId
    sketch_path: Path
    appearance_path: Path
    motion_path: Path


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    detail: str


@dataclass(frozen=True)
class SequenceRecord:
    """One video/sequence directory and its valid triplets in keyframe order."""

    subset: str
    video: str
    triplets: tuple[Triplet, ...]


@dataclass
class DatasetManifest:
    subsets: dict[str, list[SequenceRecord]] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)

    def all_triplets(self) -> list[Triplet]:
        return [
            t
            for records in self.subsets.values()
            for rec in records
            for t in rec.triplets
        ]


@dataclass(frozen=True)
class DatasetStats:
    triplet_count: int
    sequence_count: int
    per_subset_counts: dict[str, int]
    mean_triplets_per_sequence: float
    median_triplets_per_sequence: float
    mean_appearance_words: float
    mean_motion_words: float
    resolution_histogram: dict[str, int]


def _files_for_id(folder: Path, triplet_id: str) -> list[Path]:
    """Files in a modality folder that belong to the given sample id."""
    if not folder.is_dir():
        return []
    hits = []
    for p in sorted(folder.iterdir()):
        if not p.is_file():
            continue
        stem = p.stem
        if stem == triplet_id or stem.startswith(triplet_id + "_"):
            hits.append(p)
    return hits


def _is_single_channel_png(path: Path) -> tuple[bool, str]:
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                return False, f"not a PNG (format={img.format})"
            if img.mode != "L":
                return False, f"not single-channel (mode={img.mode})"
            img.load()
    except Exception as exc:
        return False, f"undecodable: {exc}"
    return True, ""


def validate_triplet(video_dir: str | Path, triplet_id: str) -> list[Violation]:
    """Check one sample against the layout rules.

    Rules, in order: parseable id; exactly one file per modality folder;
    the filename's video ordinal matching the containing directory; both
    text files non-empty after trimming; the sketch decoding as a
    single-channel PNG; and no residual ``_sketch`` suffix. Returns an empty
    list iff the triplet is valid.
    """
    video_dir = Path(video_dir)
    if not video_dir.is_dir():
        raise DatasetError(f"unreadable video directory: {video_dir}")
    violations: list[Violation] = []

    try:
        parsed = TripletId.parse(triplet_id)
    except DatasetError as exc:
        return [Violation(path=str(video_dir), rule="bad-id-format", detail=str(exc))]

    found: dict[str, list[Path]] = {}
    for modality in MODALITY_DIRS:
        files = _files_for_id(video_dir / modality, triplet_id)
        found[modality] = files
        rel = f"{modality}/{triplet_id}"
        if len(files) == 0:
            violations.append(
                Violation(path=rel, rule="missing-modality", detail="no file for id")
            )
        elif len(files) > 1:
            violations.append(
                Violation(
                    path=rel,
                    rule="duplicate-modality",
                    detail=f"{len(files)} files: " + ", ".join(p.name for p in files),
                )
            )

    dir_match = _VIDEO_DIR_RE.match(video_dir.name)
    if dir_match is not None and int(dir_match.group(1)) != parsed.video:
        violations.append(
            Violation(
                path=f"{video_dir.name}/{triplet_id}",
                rule="id-mismatch",
                detail=f"file id names video {parsed.video:03d} "
                f"inside directory {video_dir.name}",
            )
        )

    for modality in ("static_prompt", "story"):
        files = found[modality]
        if len(files) == 1 and files[0].suffix == ".txt":
            if not files[0].read_text(encoding="utf-8").strip():
                violations.append(
                    Violation(
                        path=f"{modality}/{files[0].name}",
                        rule="empty-text",
                        detail="text file empty after trimming",
                    )
                )

    sketch_files = found["sketch"]
    if len(sketch_files) == 1:
        ok, detail = _is_single_channel_png(sketch_files[0])
        if not ok:
            violations.append(
                Violation(
                    path=f"sketch/{sketch_files[0].name}",
                    rule="bad-sketch",
                    detail=detail,
                )
            )

    for modality in MODALITY_DIRS:
        for p in found[modality]:
            if p.stem == triplet_id + "_sketch":
                violations.append(
                    Violation(
                        path=f"{modality}/{p.name}",
                        rule="residual-suffix",
                        detail="intermediate _sketch suffix not removed",
                    )
                )

    return violations


def _candidate_ids(video_dir: Path) -> list[str]:
    ids: set[str] = set()
    for modality in MODALITY_DIRS:
        folder = video_dir / modality
        if not folder.is_dir():
            continue
        for p in folder.iterdir():
            if not p.is_file():
                continue
            stem = p.stem
            if stem.endswith("_sketch"):
                stem = stem[: -len("_sketch")]
            if _ID_RE.match(stem):
                ids.add(stem)
    return sorted(ids)


def assemble_manifest(root: str | Path) -> DatasetManifest:
    """Walk a corpus root and collect valid triplets into sequences.

    Sequences are sorted by keyframe ordinal; triplets failing validation are
    excluded and their violations recorded. Sequences with zero valid
    triplets are dropped.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"corpus root is not a directory: {root}")
    manifest = DatasetManifest()
    for subset_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        records: list[SequenceRecord] = []
        seen_ids: set[str] = set()
        for video_dir in sorted(p for p in subset_dir.iterdir() if p.is_dir()):
            triplets: list[Triplet] = []
            for triplet_id in _candidate_ids(video_dir):
                problems = validate_triplet(video_dir, triplet_id)
                if triplet_id in seen_ids:
                    problems.append(
                        Violation(
                            path=f"{video_dir.name}/{triplet_id}",
                            rule="duplicate-id",
                            detail="id already present in subset",
                        )
                    )
                if problems:
                    manifest.violations.extend(problems)
                    continue
                seen_ids.add(triplet_id)
                triplets.append(
                    Triplet(
                        id=TripletId.parse(triplet_id),
                        sketch_path=video_dir / "sketch" / f"{triplet_id}.png",
                        appearance_path=video_dir / "static_prompt" / f"{triplet_id}.txt",
                        motion_path=video_dir / "story" / f"{triplet_id}.txt",
                    )
                )
            if triplets:
                triplets.sort(key=lambda t: t.id.keyframe)
                records.append(
                    SequenceRecord(
                        subset=subset_dir.name,
                        video=video_dir.name,
                        triplets=tuple(triplets),
                    )
                )
        if records:
            manifest.subsets[subset_dir.name] = records
    return manifest


def compute_stats(m: DatasetManifest) -> DatasetStats:
    """Corpus statistics: counts, words per prompt, sketch resolutions.

    Means are rounded to 2 decimals; the median of an even-length sequence
    list is the lower middle element. Words are maximal non-whitespace runs.
    """
    per_subset = {
        name: sum(len(rec.triplets) for rec in records)
        for name, records in m.subsets.items()
    }
    seq_sizes = [
        len(rec.triplets) for records in m.subsets.values() for rec in records
    ]
    triplet_count = sum(per_subset.values())
    sequence_count = len(seq_sizes)

    if seq_sizes:
        mean_per_seq = round(sum(seq_sizes) / len(seq_sizes), 2)
        median_per_seq = float(sorted(seq_sizes)[(len(seq_sizes) - 1) // 2])
    else:
        mean_per_seq = 0.0
        median_per_seq = 0.0

    appearance_words: list[int] = []
    motion_words: list[int] = []
    histogram: dict[str, int] = {}
    for t in m.all_triplets():
        appearance_words.append(
            len(t.appearance_path.read_text(encoding="utf-8").split())
        )
        motion_words.append(len(t.motion_path.read_text(encoding="utf-8").split()))
        with Image.open(t.sketch_path) as img:
            key = f"{img.width}x{img.height}"
        histogram[key] = histogram.get(key, 0) + 1

    return DatasetStats(
        triplet_count=triplet_count,
        sequence_count=sequence_count,
        per_subset_counts=per_subset,
        mean_triplets_per_sequence=mean_per_seq,
        median_triplets_per_sequence=median_per_seq,
        mean_appearance_words=round(statistics.fmean(appearance_words), 2)
        if appearance_words
        else 0.0,
        mean_motion_words=round(statistics.fmean(motion_words), 2)
        if motion_words
        else 0.0,
        resolution_histogram=dict(sorted(histogram.items())),
    )


def manifest_to_dict(m: DatasetManifest) -> dict:
    return {
        "subsets": {
            name: [
                {
                    "video": rec.video,
                    "triplets": [
                        {
                            "id": str(t.id),
                            "sketch": str(t.sketch_path),
                            "appearance": str(t.appearance_path),
                            "motion": str(t.motion_path),
                        }
                        for t in rec.triplets
                    ],
                }
                for rec in records
            ]
            for name, records in m.subsets.items()
        },
        "violations": [
            {"path": v.path, "rule": v.rule, "detail": v.detail}
            for v in m.violations
        ],
    }


def manifest_from_dict(payload: dict) -> DatasetManifest:
    manifest = DatasetManifest()
    for name, records in payload["subsets"].items():
        manifest.subsets[name] = [
            SequenceRecord(
                subset=name,
                video=rec["video"],
                triplets=tuple(
                    Triplet(
                        id=TripletId.parse(t["id"]),
                        sketch_path=Path(t["sketch"]),
                        appearance_path=Path(t["appearance"]),
                        motion_path=Path(t["motion"]),
                    )
                    for t in rec["triplets"]
                ),
            )
            for rec in records
        ]
    manifest.violations = [
        Violation(path=v["path"], rule=v["rule"], detail=v["detail"])
        for v in payload["violations"]
    ]
    return manifest


def save_manifest(m: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(m), indent=2), encoding="utf-8")


def load_manifest(path: str | Path) -> DatasetManifest:
    return manifest_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def stats_to_dict(s: DatasetStats) -> dict:
    return {
        "triplet_count": s.triplet_count,
        "sequence_count": s.sequence_count,
        "per_subset_counts": s.per_subset_counts,
        "mean_triplets_per_sequence": s.mean_triplets_per_sequence,
        "median_triplets_per_sequence": s.median_triplets_per_sequence,
        "mean_appearance_words": s.mean_appearance_words,
        "mean_motion_words": s.mean_motion_words,
        "resolution_histogram": s.resolution_histogram,
    }
