"""Provider wire protocol: newline-delimited JSON over subprocess pipes,
or single-request HTTP POST.

One request line maps to one response line; responses may arrive out of
order and are correlated by ``id``. Image payloads travel as base64 PNG.
The full message schemas live in docs/protocol.md.
"""

from __future__ import annotations

import base64
import io
import json
import subprocess
import threading
import urllib.request
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from PIL import Image

from .frames import Frame, GrayImage

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


class ProviderError(RuntimeError):
    """Base class for provider failures (transport or remote error)."""


class TransportError(ProviderError):
    """The connection itself failed: closed pipe, bad JSON, unknown id."""


class ProviderTimeout(TransportError):
    """No response arrived within the deadline."""


class RemoteOpError(ProviderError):
    """The provider answered ok=false; carries the remote error text."""


@dataclass(frozen=True)
class ProviderRequest:
    id: int
    op: str
    payload: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("request id must be >= 0")


@dataclass(frozen=True)
class ProviderResponse:
    id: int
    ok: bool
    result: dict[str, Any] | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if (self.result is None) == (self.error is None):
            raise ValueError("exactly one of result/error must be present")
        if self.ok != (self.error is None):
            raise ValueError("ok flag inconsistent with result/error")


def encode_request(req: ProviderRequest) -> str:
    return json.dumps({"id": req.id, "op": req.op, "payload": req.payload})


def decode_request(line: str) -> ProviderRequest:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("request must be a JSON object")
    return ProviderRequest(
        id=int(obj["id"]), op=str(obj["op"]), payload=dict(obj.get("payload", {}))
    )


def encode_response(resp: ProviderResponse) -> str:
    obj: dict[str, Any] = {"id": resp.id, "ok": resp.ok}
    if resp.ok:
        obj["result"] = resp.result
    else:
        obj["error"] = resp.error
    return json.dumps(obj)


def decode_response(line: str) -> ProviderResponse:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("response must be a JSON object")
    ok = bool(obj.get("ok"))
    return ProviderResponse(
        id=int(obj["id"]),
        ok=ok,
        result=obj.get("result") if ok else None,
        error=None if ok else str(obj.get("error", "unknown error")),
    )


def frame_to_b64(f: Frame) -> str:
    buf = io.BytesIO()
    Image.fromarray(f.pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def gray_to_b64(g: GrayImage) -> str:
    buf = io.BytesIO()
    Image.fromarray(g.values, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def frame_from_b64(data: str, index: int = 0) -> Frame:
    with Image.open(io.BytesIO(base64.b64decode(data))) as img:
        return Frame(
            pixels=np.asarray(img.convert("RGB"), dtype=np.uint8), index=index
        )


def gray_from_b64(data: str) -> GrayImage:
    with Image.open(io.BytesIO(base64.b64decode(data))) as img:
        if img.mode != "L":
            img = img.convert("L")
        return GrayImage(values=np.asarray(img, dtype=np.uint8))


class SubprocessConnection:
    """Pipelined JSONL client over a provider subprocess's stdio.

    A reader thread parses every stdout line; responses park in a table
    keyed by id until the matching caller collects them, so out-of-order
    replies are fine and ``call`` may be issued from several threads at
    once (ids and stdin writes are serialized internally). A first line
    shaped ``{"manifest": ...}`` is kept as the provider handshake.
    """

    def __init__(self, command: list[str]):
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._write_lock = threading.Lock()
        self._responses: dict[int, ProviderResponse] = {}
        self._pending: set[int] = set()
        self._next_id = 0
        self._failure: str | None = None
        self.manifest: dict | None = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                self._fail(f"malformed JSON from provider: {line[:200]!r}")
                return
            if isinstance(obj, dict) and "manifest" in obj and "id" not in obj:
                with self._cond:
                    self.manifest = obj["manifest"]
                    self._cond.notify_all()
                continue
            try:
                resp = decode_response(line)
            except (ValueError, KeyError) as exc:
                self._fail(f"invalid response object: {exc}")
                return
            with self._cond:
                if resp.id not in self._pending:
                    self._failure = f"response id {resp.id} matches no request"
                    self._cond.notify_all()
                    return
                self._responses[resp.id] = resp
                self._cond.notify_all()
        self._fail("provider closed its stdout")

    def _fail(self, message: str) -> None:
        with self._cond:
            if self._failure is None:
                self._failure = message
            self._cond.notify_all()

    def call(self, op: str, payload: dict, timeout: float = 30.0) -> dict:
        """Send one request and wait for its response; returns the result.

        Raises RemoteOpError for ok=false answers and TransportError /
        ProviderTimeout for connection-level failures.
        """
        with self._cond:
            if self._failure is not None:
                raise TransportError(self._failure)
            req = ProviderRequest(id=self._next_id, op=op, payload=payload)
            self._next_id += 1
            self._pending.add(req.id)
        try:
            assert self._proc.stdin is not None
            with self._write_lock:
                self._proc.stdin.write(encode_request(req) + "\n")
                self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"provider stdin closed: {exc}") from exc
        with self._cond:
            ok = self._cond.wait_for(
                lambda: req.id in self._responses or self._failure is not None,
                timeout=timeout,
            )
            self._pending.discard(req.id)
            if req.id in self._responses:
                resp = self._responses.pop(req.id)
            elif self._failure is not None:
                raise TransportError(self._failure)
            elif not ok:
                raise ProviderTimeout(f"no response to request {req.id} within {timeout}s")
            else:  # pragma: no cover - wait_for returned true without data
                raise TransportError("connection woke without a response")
        if not resp.ok:
            raise RemoteOpError(resp.error or "provider error")
        return resp.result or {}

    def wait_manifest(self, timeout: float = 10.0) -> dict | None:
        with self._cond:
            self._cond.wait_for(
                lambda: self.manifest is not None or self._failure is not None,
                timeout=timeout,
            )
            return self.manifest

    def close(self) -> None:
        try:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "SubprocessConnection":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class HttpConnection:
    """One-request-per-POST client; the response must echo the request id."""

    def __init__(self, url: str):
        self.url = url
        self._next_id = 0
        self._lock = threading.Lock()

    def call(self, op: str, payload: dict, timeout: float = 30.0) -> dict:
        with self._lock:
            req = ProviderRequest(id=self._next_id, op=op, payload=payload)
            self._next_id += 1
        body = encode_request(req).encode("utf-8")
        http_req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(http_req, timeout=timeout) as raw:
                text = raw.read().decode("utf-8")
        except TimeoutError as exc:
            raise ProviderTimeout(str(exc)) from exc
        except OSError as exc:
            raise TransportError(f"HTTP transport failure: {exc}") from exc
        try:
            resp = decode_response(text)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise TransportError(f"malformed HTTP response: {exc}") from exc
        if resp.id != req.id:
            raise TransportError(
                f"response id {resp.id} does not match request id {req.id}"
            )
        if not resp.ok:
            raise RemoteOpError(resp.error or "provider error")
        return resp.result or {}

    def close(self) -> None:
        pass
