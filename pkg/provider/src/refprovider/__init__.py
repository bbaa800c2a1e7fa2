"""refprovider: reference out-of-process provider for the sketchboard
wire protocol, with classical and optional neural backends."""

from .backends import BackendLoadError, ClassicalBackend, NeuralBackend, load_backend
from .server import ProtocolServer

__version__ = "0.1.0"
