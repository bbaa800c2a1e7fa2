"""Wire-protocol conformance, driven through the toolkit's client stack
(the provider's public interface)."""

from __future__ import annotations

import json
import re
import subprocess
import sys

import numpy as np
import pytest

from sketchboard.frames import Frame
from sketchboard.protocol import (
    HttpConnection,
    RemoteOpError,
    SubprocessConnection,
    frame_to_b64,
)

SERVE_CMD = [sys.executable, "-m", "refprovider", "serve"]


def tiny_frame(value: int = 90) -> Frame:
    return Frame(pixels=np.full((6, 8, 3), value, dtype=np.uint8))


class TestStdioConformance:
    def test_handshake_manifest(self):
        with SubprocessConnection(SERVE_CMD) as conn:
            manifest = conn.wait_manifest()
            assert manifest is not None
            assert set(manifest["capabilities"]) == {
                "embed_image",
                "embed_text",
                "perceptual_distance",
                "generate_text",
                "describe_image",
                "color_sketch",
                "derive_keyframe",
                "generate_clip",
            }
            assert manifest["embedding_dim"] == 128

    def test_embed_ops(self):
        with SubprocessConnection(SERVE_CMD) as conn:
            image_vec = conn.call("embed_image", {"image": frame_to_b64(tiny_frame())})
            text_vec = conn.call("embed_text", {"text": "the fox trots"})
            assert len(image_vec["embedding"]) == 128
            assert len(text_vec["embedding"]) == 128
            assert np.linalg.norm(text_vec["embedding"]) == pytest.approx(1.0, abs=1e-6)

    def test_unknown_op_rejected(self):
        with SubprocessConnection(SERVE_CMD) as conn:
            with pytest.raises(RemoteOpError, match="unsupported op"):
                conn.call("dream", {})

    def test_generation_round_trip(self):
        with SubprocessConnection(SERVE_CMD) as conn:
            result = conn.call(
                "generate_clip",
                {
                    "first": frame_to_b64(tiny_frame(10)),
                    "last": frame_to_b64(tiny_frame(200)),
                    "frames": 5,
                },
            )
            assert len(result["frames"]) == 5


class TestHttpConformance:
    @pytest.fixture
    def http_url(self):
        proc = subprocess.Popen(
            SERVE_CMD + ["--transport", "http", "--port", "0"],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            line = proc.stderr.readline()
            match = re.search(r"listening on 127\.0\.0\.1:(\d+)", line)
            assert match, f"no listen line: {line!r}"
            yield f"http://127.0.0.1:{match.group(1)}/"
        finally:
            proc.terminate()
            proc.wait(timeout=5)

    def test_post_round_trip(self, http_url):
        conn = HttpConnection(http_url)
        result = conn.call("embed_text", {"text": "over http"})
        assert len(result["embedding"]) == 128

    def test_manifest_endpoint(self, http_url):
        import urllib.request

        with urllib.request.urlopen(http_url + "manifest", timeout=10) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        assert payload["manifest"]["embedding_dim"] == 128


class TestNeuralStartupContract:
    def test_missing_model_exits_nonzero_with_diagnostic(self):
        proc = subprocess.run(
            SERVE_CMD + ["--backend", "neural", "--model", "definitely/not-local"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 1
        assert "backend startup failed" in proc.stderr
