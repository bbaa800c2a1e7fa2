"""Capability backends for the reference provider.

The default "classical" stack uses real, deterministic, non-neural
algorithms: gradient-orientation histograms for image embedding, signed
hashed n-grams for text embedding, and Gaussian-weighted structural
dissimilarity for perceptual distance. The optional "neural" stack loads a
pretrained dual encoder and fails fast with a diagnostic when model assets
are not available locally.
"""

from __future__ import annotations

import colorsys
import hashlib
import json

import numpy as np
from scipy import ndimage

EMBED_DIM = 128
_GRID = 4       # spatial cells per axis
_BINS = 8       # orientation bins over [0, pi)
_PATCH = 64     # analysis resolution for image features


class BackendLoadError(RuntimeError):
    """A backend could not be initialized (e.g. missing model assets)."""


def _stable_hash(feature: str) -> int:
    return int.from_bytes(hashlib.sha256(feature.encode("utf-8")).digest()[:8], "big")


def _unit_or_basis(values: np.ndarray) -> list[float]:
    norm = float(np.linalg.norm(values))
    if norm < 1e-9:
        out = np.zeros(values.size)
        out[0] = 1.0
        return out.tolist()
    return (values / norm).tolist()


def _to_gray(pixels: np.ndarray) -> np.ndarray:
    rgb = pixels.astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _resample(gray: np.ndarray, size: int) -> np.ndarray:
    h, w = gray.shape
    rows = np.minimum((np.arange(size) * h / size).astype(int), h - 1)
    cols = np.minimum((np.arange(size) * w / size).astype(int), w - 1)
    return gray[np.ix_(rows, cols)]


class ClassicalBackend:
    """Deterministic non-neural implementations of all eight ops."""

    name = "classical"
    embedding_dim = EMBED_DIM

    def manifest_models(self) -> dict:
        return {
            "embed_image": "hog-4x4x8",
            "embed_text": "signed-hashed-ngrams-128",
            "perceptual_distance": "gaussian-ssim-dissimilarity",
            "generate_text": "template-stager",
            "describe_image": "luma-statistics",
            "color_sketch": "palette-colorizer",
            "derive_keyframe": "gamma-deriver",
            "generate_clip": "smoothstep-fade",
        }

    # --- embeddings -----------------------------------------------------

    def embed_image(self, pixels: np.ndarray) -> list[float]:
        """Gradient-orientation histogram over a 4x4 spatial grid."""
        gray = _resample(_to_gray(pixels), _PATCH)
        gy, gx = np.gradient(gray)
        mag = np.hypot(gx, gy)
        angle = np.mod(np.arctan2(gy, gx), np.pi)
        bins = np.minimum((angle / np.pi * _BINS).astype(int), _BINS - 1)

        cell = _PATCH // _GRID
        hist = np.zeros((_GRID, _GRID, _BINS))
        for cy in range(_GRID):
            for cx in range(_GRID):
                sub_mag = mag[cy * cell : (cy + 1) * cell, cx * cell : (cx + 1) * cell]
                sub_bin = bins[cy * cell : (cy + 1) * cell, cx * cell : (cx + 1) * cell]
                hist[cy, cx] = np.bincount(
                    sub_bin.reshape(-1), weights=sub_mag.reshape(-1), minlength=_BINS
                )
        return _unit_or_basis(hist.reshape(-1))

    def embed_text(self, text: str) -> list[float]:
        """Signed feature hashing of word unigrams, bigrams, and char trigrams."""
        words = text.lower().split()
        features = list(words)
        features += [f"{a} {b}" for a, b in zip(words, words[1:])]
        compact = "".join(words)
        features += [compact[i : i + 3] for i in range(len(compact) - 2)]
        values = np.zeros(EMBED_DIM)
        for feature in features:
            h = _stable_hash(feature)
            sign = 1.0 if (h >> 16) & 1 else -1.0
            values[h % EMBED_DIM] += sign
        return _unit_or_basis(values)

    # --- perceptual distance --------------------------------------------

    def perceptual_distance(self, a: np.ndarray, b: np.ndarray) -> float:
        """Structural dissimilarity: (1 - mean SSIM) / 2, in [0, 1]."""
        if a.shape != b.shape:
            raise ValueError("dimension mismatch")
        ga = _to_gray(a)
        gb = _to_gray(b)
        c1 = (0.01 * 255) ** 2
        c2 = (0.03 * 255) ** 2
        blur = lambda x: ndimage.gaussian_filter(x, sigma=1.5, mode="nearest")
        mu_a, mu_b = blur(ga), blur(gb)
        var_a = blur(ga * ga) - mu_a * mu_a
        var_b = blur(gb * gb) - mu_b * mu_b
        cov = blur(ga * gb) - mu_a * mu_b
        ssim = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
            (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        )
        return float((1.0 - ssim.mean()) / 2.0)

    # --- text generation --------------------------------------------------

    POSITIVE = (
        "consistent character identity, stable outfit and proportions, fixed "
        "camera framing, steady scene layout"
    )
    STYLE = (
        "clean stable line work, consistent palette, low flicker, coherent "
        "animation rendering"
    )

    def generate_text(
        self,
        instruction: str,
        text: str,
        n_stages: int | None = None,
        format: str | None = None,
    ) -> str:
        if format == "stage_assets" and n_stages:
            stages = []
            for i in range(1, n_stages + 1):
                stages.append(
                    {
                        "stage": i,
                        "conversion": f"{text}; stage {i} of {n_stages}: "
                        f"the action advances to state {i}",
                        "positive": self.POSITIVE,
                        "action": f"{text} (phase {i})",
                        "face": "expression shifts naturally with the motion",
                        "body": "weight and posture follow the action arc",
                        "style": self.STYLE,
                    }
                )
            return json.dumps({"stages": stages})
        return (
            f"{text}. The motion unfolds steadily from start to finish, "
            "keeping the same subject, framing, and scene."
        )

    def describe_image(self, pixels: np.ndarray, query: str) -> str:
        gray = _to_gray(pixels)
        tone = "bright" if gray.mean() > 170 else "dark" if gray.mean() < 85 else "medium"
        contrast = "high" if gray.std() > 60 else "low"
        channel = ("red", "green", "blue")[int(np.argmax(pixels.mean(axis=(0, 1))))]
        head = query.split()[0].lower().rstrip(":") if query.split() else "scene"
        return (
            f"{head}: a {tone} {pixels.shape[1]}x{pixels.shape[0]} scene with "
            f"{contrast} contrast, dominated by {channel} tones"
        )

    # --- generation -------------------------------------------------------

    def color_sketch(self, sketch: np.ndarray, appearance: str) -> np.ndarray:
        """Map sketch intensity through a prompt-derived constant-hue palette."""
        hue = (_stable_hash(appearance) % 360) / 360.0
        lut = np.array(
            [
                [round(c * 255) for c in colorsys.hsv_to_rgb(hue, 0.45, v / 255.0)]
                for v in range(256)
            ],
            dtype=np.uint8,
        )
        return lut[sketch]

    def derive_keyframe(self, reference: np.ndarray, conversion: str) -> np.ndarray:
        """Prompt-derived gamma curve in [0.75, 1.25]; identity is preserved."""
        gamma = 0.75 + (_stable_hash(conversion) % 101) / 100.0 * 0.5
        lut = np.clip(
            np.floor(255.0 * (np.arange(256) / 255.0) ** gamma + 0.5), 0, 255
        ).astype(np.uint8)
        return lut[reference]

    def generate_clip(
        self, first: np.ndarray, last: np.ndarray, n_frames: int
    ) -> list[np.ndarray]:
        """Smoothstep cross-fade; endpoint frames equal the inputs exactly."""
        if first.shape != last.shape:
            raise ValueError("first/last dimension mismatch")
        if n_frames < 2:
            raise ValueError("clip needs at least 2 frames")
        a = first.astype(np.float64)
        b = last.astype(np.float64)
        frames = []
        for j in range(n_frames):
            t = j / (n_frames - 1)
            s = 3 * t * t - 2 * t * t * t
            mixed = np.floor((1.0 - s) * a + s * b + 0.5)
            frames.append(np.clip(mixed, 0, 255).astype(np.uint8))
        return frames


class NeuralBackend(ClassicalBackend):
    """Dual-encoder embeddings on top of the classical generation ops.

    Loads a pretrained model at construction time and raises
    BackendLoadError when the assets are not available locally.
    """

    name = "neural"

    def __init__(self, model_name: str = "clip-ViT-B-32"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise BackendLoadError(f"sentence-transformers not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise BackendLoadError(
                f"failed to load model {model_name!r}: {exc}"
            ) from exc
        self.embedding_dim = int(
            self._model.get_sentence_embedding_dimension() or EMBED_DIM
        )

    def manifest_models(self) -> dict:
        models = super().manifest_models()
        models["embed_image"] = models["embed_text"] = "sentence-transformers"
        return models

    def embed_image(self, pixels: np.ndarray) -> list[float]:
        from PIL import Image

        vec = self._model.encode(Image.fromarray(pixels, mode="RGB"))
        return _unit_or_basis(np.asarray(vec, dtype=np.float64))

    def embed_text(self, text: str) -> list[float]:
        vec = self._model.encode(text)
        return _unit_or_basis(np.asarray(vec, dtype=np.float64))


def load_backend(name: str, model_name: str | None = None):
    if name == "classical":
        return ClassicalBackend()
    if name == "neural":
        return NeuralBackend(model_name or "clip-ViT-B-32")
    raise BackendLoadError(f"unknown backend: {name!r}")
