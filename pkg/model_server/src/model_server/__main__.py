"""Run the model server: `python -m model_server [--config cfg.json] [--port N]`.

Without --config, serves the builtin deterministic models (no weights
needed), which is enough for protocol conformance testing.
"""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import ServerConfig


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="model-server")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    args = parser.parse_args(argv)
    config = (ServerConfig.from_file(args.config) if args.config
              else ServerConfig.builtin_default())
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
