"""Model backends: wire protocol, transports, server glue and the
synthetic-scene oracle used for deterministic end-to-end verification.
"""

from .client import HttpTransport, LocalTransport, ProtocolClient, SubprocessTransport, open_backend
from .oracle import OracleBackend
from .server import DispatchHandler, serve_http, serve_stdio
from .synthetic import SyntheticScene, generate_scene

__all__ = [
    "DispatchHandler",
    "HttpTransport",
    "LocalTransport",
    "OracleBackend",
    "ProtocolClient",
    "SubprocessTransport",
    "SyntheticScene",
    "generate_scene",
    "open_backend",
    "serve_http",
    "serve_stdio",
]
