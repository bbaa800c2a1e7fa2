from __future__ import annotations

import numpy as np
import pytest

from sketchboard.frames import Frame, FrameSequence, GrayImage


def uniform_frame(value: int, width: int = 8, height: int = 6, index: int = 0) -> Frame:
    return Frame(
        pixels=np.full((height, width, 3), value, dtype=np.uint8), index=index
    )


def frame_from_rgb(r: int, g: int, b: int, width: int = 4, height: int = 4) -> Frame:
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[:, :, 0] = r
    pixels[:, :, 1] = g
    pixels[:, :, 2] = b
    return Frame(pixels=pixels)


def random_frame(rng: np.random.Generator, width: int, height: int, index: int = 0) -> Frame:
    return Frame(
        pixels=rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8),
        index=index,
    )


def random_gray(rng: np.random.Generator, width: int, height: int) -> GrayImage:
    return GrayImage(values=rng.integers(0, 256, size=(height, width), dtype=np.uint8))


def sequence_from_values(values: list[int], width: int = 6, height: int = 4) -> FrameSequence:
    frames = tuple(
        uniform_frame(v, width=width, height=height, index=i)
        for i, v in enumerate(values)
    )
    return FrameSequence(frames=frames, fps=24.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
