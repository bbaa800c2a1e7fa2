"""Frame ingestion and basic raster operations.

Frames are 8-bit RGB rasters held as numpy arrays. Video files are never
decoded in-process; an external decoder executable is invoked to dump a
frame directory first, which is then loaded like any image directory.
"""

from __future__ import annotations

import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

#: BT.601 luma weights used for every RGB -> grayscale conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class FrameError(ValueError):
    """Raised for invalid frame data or unsatisfiable frame sources."""


class DecoderError(RuntimeError):
    """External video decoder failed; carries the captured stderr."""


def _round_half_up(x: np.ndarray | float) -> np.ndarray | float:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


@dataclass(frozen=True, eq=False)
class Frame:
    """One RGB frame: ``pixels`` is an (h, w, 3) uint8 array."""

    pixels: np.ndarray
    index: int = 0
    timestamp: float | None = None

    def __post_init__(self) -> None:
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise FrameError(f"expected (h, w, 3) uint8 pixels, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise FrameError("frame dimensions must be positive")
        if self.index < 0:
            raise FrameError("frame index must be >= 0")
        if self.timestamp is not None and self.timestamp < 0:
            raise FrameError("timestamp must be >= 0")
        self.pixels.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel 8-bit raster: ``values`` is an (h, w) uint8 array."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.dtype != np.uint8:
            raise FrameError(f"expected (h, w) uint8 values, got {v.shape} {v.dtype}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise FrameError("image dimensions must be positive")
        self.values.setflags(write=False)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Immutable ordered frame list with a uniform raster size."""

    frames: tuple[Frame, ...]
    fps: float = 24.0

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise FrameError("fps must be > 0")
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if frames:
            w, h = frames[0].width, frames[0].height
            last = -1
            for f in frames:
                if (f.width, f.height) != (w, h):
                    raise FrameError(
                        f"mixed dimensions: {f.width}x{f.height} vs {w}x{h}"
                    )
                if f.index <= last:
                    raise FrameError("frame indices must be strictly increasing")
                last = f.index

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass(frozen=True)
class DecoderConfig:
    """Command template for the external video decoder.

    ``{input}`` is replaced with the video path and ``{frames}`` with the
    output pattern ``<tmpdir>/%06d.png``.
    """

    command: tuple[str, ...] = ("ffmpeg", "-i", "{input}", "{frames}")


def gray_to_frame(g: GrayImage, index: int = 0) -> Frame:
    """Replicate a gray raster into the three RGB channels."""
    return Frame(pixels=np.repeat(g.values[:, :, None], 3, axis=2), index=index)


def frame_from_array(arr: np.ndarray, index: int = 0) -> Frame:
    """Build a Frame from any integer/float array, clipping to [0, 255]."""
    a = np.clip(np.asarray(arr), 0, 255).astype(np.uint8)
    if a.ndim == 2:
        a = np.repeat(a[:, :, None], 3, axis=2)
    return Frame(pixels=a, index=index)


def load_image(path: str | Path) -> Frame:
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return Frame(pixels=np.asarray(rgb, dtype=np.uint8))


def save_frame_png(f: Frame, path: str | Path) -> None:
    Image.fromarray(f.pixels, mode="RGB").save(path, format="PNG")


def save_gray_png(g: GrayImage, path: str | Path) -> None:
    Image.fromarray(g.values, mode="L").save(path, format="PNG")


def load_gray_png(path: str | Path) -> GrayImage:
    with Image.open(path) as img:
        if img.mode != "L":
            img = img.convert("L")
        return GrayImage(values=np.asarray(img, dtype=np.uint8))


def _load_directory(directory: Path, fps: float) -> FrameSequence:
    paths = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not paths:
        raise FrameError(f"no frames in {directory}")
    frames = []
    for i, p in enumerate(paths):
        base = load_image(p)
        frames.append(Frame(pixels=base.pixels, index=i))
    return FrameSequence(frames=tuple(frames), fps=fps)


def _decode_video(path: Path, outdir: Path, decoder: DecoderConfig) -> None:
    pattern = str(outdir / "%06d.png")
    cmd = [
        part.replace("{input}", str(path)).replace("{frames}", pattern)
        for part in decoder.command
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise DecoderError(
            f"decoder exited with {proc.returncode}: {proc.stderr.strip()}"
        )


def load_frames(
    source: str | Path,
    fps_hint: float | None = None,
    decoder: DecoderConfig | None = None,
) -> FrameSequence:
    """Load a frame sequence from an image directory or a video file.

    Directories are read in lexicographic filename order. Video files are
    decoded by the configured external decoder into a temporary image
    directory first. All frames must share one resolution.
    """
    src = Path(source)
    fps = fps_hint if fps_hint is not None else 24.0
    if src.is_dir():
        return _load_directory(src, fps)
    if not src.exists():
        raise FrameError(f"source does not exist: {src}")
    if shutil.which((decoder or DecoderConfig()).command[0]) is None:
        raise DecoderError(
            f"decoder executable not found: {(decoder or DecoderConfig()).command[0]}"
        )
    with tempfile.TemporaryDirectory(prefix="sketchboard_decode_") as tmp:
        _decode_video(src, Path(tmp), decoder or DecoderConfig())
        return _load_directory(Path(tmp), fps)


def resize_to_width(f: Frame, target_width: int = 600) -> Frame:
    """Resize to ``target_width`` keeping aspect ratio (bilinear).

    Output height is round(h * target_width / w), at least 1 pixel.
    """
    if target_width < 1:
        raise FrameError("target_width must be >= 1")
    if f.width == target_width:
        return f
    new_h = max(1, int(_round_half_up(f.height * target_width / f.width)))
    img = Image.fromarray(f.pixels, mode="RGB")
    resized = img.resize((target_width, new_h), resample=Image.Resampling.BILINEAR)
    return Frame(
        pixels=np.asarray(resized, dtype=np.uint8),
        index=f.index,
        timestamp=f.timestamp,
    )


def to_grayscale(f: Frame) -> GrayImage:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), half-up."""
    rgb = f.pixels.astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    luma = wr * rgb[:, :, 0] + wg * rgb[:, :, 1] + wb * rgb[:, :, 2]
    out = np.clip(_round_half_up(luma), 0, 255).astype(np.uint8)
    return GrayImage(values=out)
