"""Adapter configuration, loaded from a small JSON file."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class AdapterConfig:
    weights: str | None = None
    confidence_floor: float = 0.25
    max_detections: int = 64
    listen: str = "127.0.0.1:8099"
    backend: str = "enclosed-region"
    min_area_px: int = 120

    def __post_init__(self):
        if not (0.0 <= self.confidence_floor <= 1.0):
            raise ValueError("confidence_floor must be in [0, 1]")
        if self.max_detections < 1:
            raise ValueError("max_detections must be >= 1")
        if self.min_area_px < 1:
            raise ValueError("min_area_px must be >= 1")

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)


def load_config(path: str | Path) -> AdapterConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {"weights", "confidence_floor", "max_detections", "listen",
             "backend", "min_area_px"}
    return AdapterConfig(**{k: v for k, v in raw.items() if k in known})
