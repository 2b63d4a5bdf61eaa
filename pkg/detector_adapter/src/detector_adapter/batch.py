"""Offline batch mode: run the same inference path over an image
directory and emit a detections file (diagram id -> normalized boxes)."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .backend import load_backend, run_inference
from .config import AdapterConfig

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif")


def run_batch(cfg: AdapterConfig, image_dir: str | Path) -> dict[str, list[dict]]:
    backend = load_backend(cfg)
    out: dict[str, list[dict]] = {}
    paths = sorted(p for p in Path(image_dir).iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    for path in paths:
        try:
            with Image.open(path) as img:
                image = np.asarray(img.convert("RGB"))
        except OSError as exc:
            log.warning("unreadable image %s: %s", path.name, exc)
            out[path.stem] = []
            continue
        height, width = image.shape[:2]
        out[path.stem] = [
            {"bbox": [x / width, y / height, w / width, h / height], "conf": conf}
            for x, y, w, h, conf in run_inference(backend, image, cfg)
        ]
    return out


def write_detections(detections: dict[str, list[dict]], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(detections, indent=2) + "\n", encoding="utf-8")
