"""Wire-protocol server: newline-delimited JSON over stdio, or HTTP POST.

One request in service at a time per process; concurrency comes from
running several provider processes. The handshake advertises the manifest
before any response (stdio) or at GET /manifest (HTTP).
"""

from __future__ import annotations

import base64
import io
import json
import sys
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
from PIL import Image

PROTOCOL_OPS = (
    "embed_image",
    "embed_text",
    "perceptual_distance",
    "generate_text",
    "describe_image",
    "color_sketch",
    "derive_keyframe",
    "generate_clip",
)


def _decode_rgb(data: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(data))) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _decode_gray(data: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(data))) as img:
        if img.mode != "L":
            img = img.convert("L")
        return np.asarray(img, dtype=np.uint8)


def _encode_png(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class ProtocolServer:
    def __init__(self, backend):
        self.backend = backend

    def manifest(self) -> dict:
        return {
            "capabilities": list(PROTOCOL_OPS),
            "embedding_dim": self.backend.embedding_dim,
            "models": self.backend.manifest_models(),
        }

    def _dispatch(self, op: str, payload: dict) -> dict:
        backend = self.backend
        if op == "embed_image":
            return {"embedding": backend.embed_image(_decode_rgb(payload["image"]))}
        if op == "embed_text":
            return {"embedding": backend.embed_text(str(payload["text"]))}
        if op == "perceptual_distance":
            return {
                "distance": backend.perceptual_distance(
                    _decode_rgb(payload["image_a"]), _decode_rgb(payload["image_b"])
                )
            }
        if op == "generate_text":
            return {
                "text": backend.generate_text(
                    str(payload.get("instruction", "")),
                    str(payload.get("text", "")),
                    n_stages=payload.get("n_stages"),
                    format=payload.get("format"),
                )
            }
        if op == "describe_image":
            return {
                "text": backend.describe_image(
                    _decode_rgb(payload["image"]), str(payload.get("query", ""))
                )
            }
        if op == "color_sketch":
            return {
                "image": _encode_png(
                    backend.color_sketch(
                        _decode_gray(payload["sketch"]),
                        str(payload.get("appearance", "")),
                    )
                )
            }
        if op == "derive_keyframe":
            return {
                "image": _encode_png(
                    backend.derive_keyframe(
                        _decode_rgb(payload["reference"]),
                        str(payload.get("conversion", "")),
                    )
                )
            }
        if op == "generate_clip":
            frames = backend.generate_clip(
                _decode_rgb(payload["first"]),
                _decode_rgb(payload["last"]),
                int(payload["frames"]),
            )
            return {"frames": [_encode_png(f) for f in frames]}
        raise ValueError(f"unsupported op: {op!r}")

    def handle_line(self, line: str) -> str:
        try:
            obj = json.loads(line)
            req_id = int(obj["id"])
            op = str(obj["op"])
            payload = dict(obj.get("payload", {}))
        except Exception as exc:
            return json.dumps(
                {"id": -1, "ok": False, "error": f"malformed request: {exc}"}
            )
        try:
            result = self._dispatch(op, payload)
        except Exception as exc:
            return json.dumps({"id": req_id, "ok": False, "error": str(exc)})
        return json.dumps({"id": req_id, "ok": True, "result": result})

    def serve_stdio(self, stdin=None, stdout=None) -> None:
        stdin = stdin if stdin is not None else sys.stdin
        stdout = stdout if stdout is not None else sys.stdout
        stdout.write(json.dumps({"manifest": self.manifest()}) + "\n")
        stdout.flush()
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            stdout.write(self.handle_line(line) + "\n")
            stdout.flush()

    def serve_http(self, port: int) -> None:
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # quiet
                pass

            def _send(self, code: int, payload: dict) -> None:
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path.rstrip("/") in ("", "/manifest".rstrip("/"), "/manifest"):
                    self._send(200, {"manifest": server.manifest()})
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                line = self.rfile.read(length).decode("utf-8")
                self._send(200, json.loads(server.handle_line(line)))

        httpd = HTTPServer(("127.0.0.1", port), Handler)
        sys.stderr.write(f"refprovider listening on 127.0.0.1:{httpd.server_port}\n")
        sys.stderr.flush()
        httpd.serve_forever()
