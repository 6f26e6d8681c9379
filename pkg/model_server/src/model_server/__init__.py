"""HTTP model server for the record-linkage gateway protocol."""

__version__ = "0.1.0"

from .app import create_app
from .config import ModelSpec, ServerConfig

__all__ = ["create_app", "ModelSpec", "ServerConfig"]
