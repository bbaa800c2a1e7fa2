"""Deterministic keyframe-to-sketch conversion and Canny edge extraction.

The sketch chain is grayscale -> invert -> 3x3 erosion -> color-dodge blend.
Every stage is a pure integer raster transform so identical inputs always
produce byte-identical sketches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .frames import Frame, FrameError, GrayImage, to_grayscale


@dataclass(frozen=True)
class SketchConfig:
    epsilon: float = 1.0
    erosion_passes: int = 1

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.erosion_passes < 1:
            raise ValueError("erosion_passes must be >= 1")


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Binary edge raster: ``bits`` is an (h, w) bool array."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        if self.bits.ndim != 2 or self.bits.dtype != np.bool_:
            raise FrameError(f"expected (h, w) bool bits, got {self.bits.shape} {self.bits.dtype}")
        self.bits.setflags(write=False)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True, eq=False)
class SketchStages:
    """Intermediate rasters of one sketch conversion, kept for debugging."""

    gray: GrayImage
    inverted: GrayImage
    eroded: GrayImage
    sketch: GrayImage


def invert(g: GrayImage) -> GrayImage:
    """Map every value v to 255 - v."""
    return GrayImage(values=(255 - g.values.astype(np.int16)).astype(np.uint8))


def _erode_once(values: np.ndarray) -> np.ndarray:
    padded = np.pad(values, 1, mode="edge")
    h, w = values.shape
    stacked = np.stack(
        [padded[dy : dy + h, dx : dx + w] for dy in range(3) for dx in range(3)]
    )
    return stacked.min(axis=0)


def erode3x3(g: GrayImage, passes: int = 1) -> GrayImage:
    """Min filter over each 3x3 neighborhood, replicate border padding."""
    if passes < 1:
        raise ValueError("passes must be >= 1")
    values = g.values
    for _ in range(passes):
        values = _erode_once(values)
    return GrayImage(values=values.astype(np.uint8))


def color_dodge(g: GrayImage, e: GrayImage, cfg: SketchConfig | None = None) -> GrayImage:
    """Blend S = min(255, G * 255 / (255 - E + epsilon)), rounded half-up."""
    cfg = cfg or SketchConfig()
    if g.values.shape != e.values.shape:
        raise FrameError("dimension mismatch between base and blend images")
    gv = g.values.astype(np.float64)
    ev = e.values.astype(np.float64)
    s = np.minimum(255.0, gv * 255.0 / (255.0 - ev + cfg.epsilon))
    out = np.clip(np.floor(s + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(values=out)


def sketchify_stages(f: Frame, cfg: SketchConfig | None = None) -> SketchStages:
    """Run the full sketch chain, returning every intermediate raster."""
    cfg = cfg or SketchConfig()
    gray = to_grayscale(f)
    inverted = invert(gray)
    eroded = erode3x3(inverted, passes=cfg.erosion_passes)
    sketch = color_dodge(gray, eroded, cfg)
    return SketchStages(gray=gray, inverted=inverted, eroded=eroded, sketch=sketch)


def sketchify(f: Frame, cfg: SketchConfig | None = None) -> GrayImage:
    """Convert a color frame into a black-and-white line sketch."""
    return sketchify_stages(f, cfg).sketch


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)


def _nonmax_suppress(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep pixels that are local maxima along the gradient direction.

    Direction is quantized to 0/45/90/135 degrees. Plateaus keep exactly one
    pixel: the comparison is >= toward the gradient direction and strict >
    away from it.
    """
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    sector = np.zeros(angle.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3

    padded = np.pad(mag, 1, mode="edge")
    h, w = mag.shape

    def shifted(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    # (forward, backward) neighbor offsets per sector
    offsets = {0: (0, 1), 1: (-1, 1), 2: (-1, 0), 3: (-1, -1)}
    keep = np.zeros(mag.shape, dtype=bool)
    for sec, (dy, dx) in offsets.items():
        fwd = shifted(dy, dx)
        bwd = shifted(-dy, -dx)
        mask = sector == sec
        keep |= mask & (mag >= fwd) & (mag > bwd)
    return keep


def canny_edges(
    g: GrayImage,
    low: float = 100.0,
    high: float = 200.0,
    blur_sigma: float = 1.4,
) -> EdgeMap:
    """Canny edge detection on gradient-magnitude thresholds.

    Gaussian blur, Sobel gradients, non-maximum suppression, then
    double-threshold hysteresis: pixels at or above ``high`` seed edges and
    pull in 8-connected pixels at or above ``low``. Thresholds are on the
    Sobel magnitude of the blurred 0-255 image.
    """
    if not (0 <= low <= high):
        raise ValueError(f"require 0 <= low <= high, got low={low} high={high}")
    img = g.values.astype(np.float64)
    if blur_sigma > 0:
        img = ndimage.gaussian_filter(img, sigma=blur_sigma, mode="nearest")
    gx = ndimage.convolve(img, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(img, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)

    thin = _nonmax_suppress(mag, gx, gy) & (mag > 0)
    candidate = thin & (mag >= low)
    strong = thin & (mag >= high)
    if not strong.any():
        return EdgeMap(bits=np.zeros(g.values.shape, dtype=bool))

    labels, n = ndimage.label(candidate, structure=np.ones((3, 3), dtype=int))
    keep_labels = np.unique(labels[strong])
    keep_labels = keep_labels[keep_labels > 0]
    bits = np.isin(labels, keep_labels)
    return EdgeMap(bits=bits)
