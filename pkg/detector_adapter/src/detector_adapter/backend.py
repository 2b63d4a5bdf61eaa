"""Detector backends.

The adapter is deliberately thin: a backend is any callable mapping an
RGB image array to pixel boxes ``(x, y, w, h, conf)``. The built-in
"enclosed-region" backend needs no trained weights: diagram blocks are
drawn as outlined shapes, so their interiors are light regions *not*
connected to the page border. Flood-separating light regions therefore
finds block interiors regardless of the wires between blocks. Real
detectors plug in through a "module:function" import path; the factory
receives the weights path and returns the callable. Training or
fine-tuning such weights is an operator procedure, not code owned here.

Output is single-class on purpose: no labels cross the wire. Naming is
a downstream concern.
"""

from __future__ import annotations

import importlib
from typing import Callable, Sequence

import cv2
import numpy as np

from .config import AdapterConfig

PixelBox = tuple[int, int, int, int, float]
Backend = Callable[[np.ndarray], Sequence[PixelBox]]

LIGHT_THRESHOLD = 200
BORDER_PAD_PX = 2


def enclosed_region_backend(weights: str | None = None,
                            min_area_px: int = 120) -> Backend:
    """Classical single-class block detector; ``weights`` is unused."""

    def detect(image: np.ndarray) -> list[PixelBox]:
        if image.ndim == 3:
            gray = cv2.cvtColor(image, cv2.COLOR_RGB2GRAY)
        else:
            gray = image
        height, width = gray.shape
        light = (gray > LIGHT_THRESHOLD).astype(np.uint8)
        n, _labels, stats, _centroids = cv2.connectedComponentsWithStats(
            light, connectivity=4)
        boxes: list[PixelBox] = []
        for i in range(1, n):
            x, y, w, h, area = (int(v) for v in stats[i])
            if x == 0 or y == 0 or x + w >= width or y + h >= height:
                continue  # touches the border: page background, not a block
            if area < min_area_px:
                continue  # letter holes, arrowheads, noise
            conf = min(area / float(w * h), 0.99)
            x0 = max(0, x - BORDER_PAD_PX)
            y0 = max(0, y - BORDER_PAD_PX)
            x1 = min(width, x + w + BORDER_PAD_PX)
            y1 = min(height, y + h + BORDER_PAD_PX)
            boxes.append((x0, y0, x1 - x0, y1 - y0, conf))
        return boxes

    return detect


def load_backend(cfg: AdapterConfig) -> Backend:
    if cfg.backend == "enclosed-region":
        return enclosed_region_backend(cfg.weights, cfg.min_area_px)
    if ":" in cfg.backend:
        module_name, func_name = cfg.backend.split(":", 1)
        factory = getattr(importlib.import_module(module_name), func_name)
        return factory(cfg.weights)
    raise ValueError(f"unknown backend {cfg.backend!r}; expected "
                     f"'enclosed-region' or 'module:function'")


def run_inference(backend: Backend, image: np.ndarray,
                  cfg: AdapterConfig) -> list[PixelBox]:
    """Shared inference path for serve and batch: floor, cap, sort."""
    height, width = image.shape[:2]
    boxes = []
    for x, y, w, h, conf in backend(image):
        if conf < cfg.confidence_floor:
            continue
        x = max(0, min(int(x), width - 1))
        y = max(0, min(int(y), height - 1))
        w = max(1, min(int(w), width - x))
        h = max(1, min(int(h), height - y))
        boxes.append((x, y, w, h, float(conf)))
    boxes.sort(key=lambda b: (-b[4], b[0], b[1]))
    return boxes[: cfg.max_detections]
