"""
Triplet dataset assembly and validation
=======================================

A corpus is a tree of subset/video directories, each with sketch,
static_prompt, and story folders sharing one sample id per keyframe.
We build a tiny corpus with one planted violation, assemble the manifest,
and compute the corpus statistics.
"""

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from sketchboard import assemble_manifest, compute_stats

root = Path(tempfile.mkdtemp(prefix="sketchboard_demo_")) / "corpus"

############################################################
# Write two videos with three keyframes each


def write_triplet(video_dir: Path, tid: str, story: str):
    for modality in ("sketch", "static_prompt", "story"):
        (video_dir / modality).mkdir(parents=True, exist_ok=True)
    Image.fromarray(
        np.random.default_rng(hash(tid) % 2**32).integers(
            0, 256, size=(34, 60), dtype=np.uint8
        ),
        mode="L",
    ).save(video_dir / "sketch" / f"{tid}.png")
    (video_dir / "static_prompt" / f"{tid}.txt").write_text(
        "a small fox, watercolor style, meadow at dawn", encoding="utf-8"
    )
    (video_dir / "story" / f"{tid}.txt").write_text(story, encoding="utf-8")


for v in (1, 2):
    for k in (1, 2, 3):
        write_triplet(
            root / "demo_subset" / f"video_{v:03d}",
            f"video_{v:03d}_keyframe_{k:04d}",
            f"the fox moves through scene {k}",
        )

############################################################
# Plant a violation: an empty story file

bad = root / "demo_subset" / "video_002" / "story" / "video_002_keyframe_0003.txt"
bad.write_text("   ", encoding="utf-8")

############################################################
# Assemble: valid triplets enter sequences, violations are reported

manifest = assemble_manifest(root)
print(f"valid triplets: {len(manifest.all_triplets())}")
for violation in manifest.violations:
    print(f"violation [{violation.rule}] {violation.path}: {violation.detail}")

############################################################
# Corpus statistics

stats = compute_stats(manifest)
print("sequences:            ", stats.sequence_count)
print("mean per sequence:    ", stats.mean_triplets_per_sequence)
print("mean appearance words:", stats.mean_appearance_words)
print("mean motion words:    ", stats.mean_motion_words)
print("resolutions:          ", stats.resolution_histogram)
