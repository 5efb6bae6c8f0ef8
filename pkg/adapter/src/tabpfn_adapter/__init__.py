"""Quantile-regression adapter process speaking a JSON-lines protocol.

Wraps a TabPFN regressor (or a deterministic stub for protocol testing)
behind newline-delimited JSON on stdio or a local TCP socket, fitting a
fresh in-context model for every request.
"""

from .models import AdapterConfig, StubModel, TabPfnModel, make_model_factory
from .server import PROTOCOL_VERSION, serve, serve_tcp

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "PROTOCOL_VERSION",
    "StubModel",
    "TabPfnModel",
    "make_model_factory",
    "serve",
    "serve_tcp",
]
