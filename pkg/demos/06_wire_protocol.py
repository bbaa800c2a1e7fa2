"""
Talking to a provider over the wire protocol
============================================

Providers run out of process and answer newline-delimited JSON requests.
Here we spawn the bundled mock server as a real subprocess, read its
manifest handshake, and issue a few calls through the client connection.
"""

import sys

import numpy as np

from sketchboard.frames import Frame
from sketchboard.protocol import RemoteOpError, SubprocessConnection, frame_to_b64

############################################################
# Spawn the provider and read its handshake

conn = SubprocessConnection([sys.executable, "-m", "sketchboard.mock_server"])
manifest = conn.wait_manifest()
print("capabilities:", ", ".join(manifest["capabilities"]))
print("embedding dim:", manifest["embedding_dim"])

############################################################
# Embed an image and a text; both come back unit-normalized

frame = Frame(pixels=np.tile(
    np.linspace(0, 255, 32, dtype=np.uint8)[None, :, None], (24, 1, 3)
))
image_vec = conn.call("embed_image", {"image": frame_to_b64(frame)})["embedding"]
text_vec = conn.call("embed_text", {"text": "the fox trots"})["embedding"]
print("image embedding norm:", round(float(np.linalg.norm(image_vec)), 6))
print("text embedding norm: ", round(float(np.linalg.norm(text_vec)), 6))

############################################################
# Errors come back structured, not as broken pipes

try:
    conn.call("paint_masterpiece", {})
except RemoteOpError as exc:
    print("remote error:", exc)

conn.close()

############################################################
# Any process speaking this protocol can replace the mock; the registry
# file providers.json selects transports per capability (docs/protocol.md)
