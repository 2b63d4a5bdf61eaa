"""detector-adapter CLI: serve the wire contract or run batch inference."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

import uvicorn

from .batch import run_batch, write_detections
from .config import AdapterConfig, load_config
from .service import create_app


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="detector-adapter", description=__doc__)
    parser.add_argument("--config", default=None, help="adapter config JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("serve", help="run the /detect HTTP endpoint")

    p = sub.add_parser("batch", help="emit a detections file for an image directory")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    cfg = load_config(args.config) if args.config else AdapterConfig()

    if args.command == "serve":
        host, port = cfg.host_port
        uvicorn.run(create_app(cfg), host=host, port=port, log_level="info")
        return 0
    if args.command == "batch":
        detections = run_batch(cfg, args.images)
        write_detections(detections, args.out)
        total = sum(len(v) for v in detections.values())
        print(f"wrote {total} boxes across {len(detections)} images to {args.out}")
        return 0
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
