"""Server configuration: which models to serve, from where, on what device.

Config file is JSON:
{
  "models": [
    {"id": "embed-small", "kind": "embed", "weights": "/path/or/builtin", ...}
  ]
}
The special weights value "builtin" loads a deterministic lexical backend
needing no model files (used for protocol conformance testing).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field


class ModelSpec(BaseModel):
    id: str
    kind: Literal["embed", "rerank", "select"]
    weights: str = "builtin"
    device: str = "cpu"
    batch_size: int = Field(default=32, ge=1)


class ServerConfig(BaseModel):
    models: list[ModelSpec]

    @classmethod
    def from_file(cls, path: str | Path) -> "ServerConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.model_validate(data)

    @classmethod
    def builtin_default(cls) -> "ServerConfig":
        return cls(models=[
            ModelSpec(id="builtin-embed", kind="embed"),
            ModelSpec(id="builtin-rerank", kind="rerank"),
            ModelSpec(id="builtin-select", kind="select"),
        ])
