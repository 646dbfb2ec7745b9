"""CLI launcher: `embed-service --config configs/models.yaml --port 8000`."""
from __future__ import annotations

import argparse
import logging

import uvicorn

from .app import create_app
from .config import DEFAULT_CONFIG, load_config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embed-service")
    parser.add_argument("--config", default=str(DEFAULT_CONFIG), help="YAML model configuration")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    app = create_app(load_config(args.config))
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
