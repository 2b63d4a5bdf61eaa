"""Thin single-class detector service behind the /detect wire contract."""

from .config import AdapterConfig, load_config
from .service import create_app
from .batch import run_batch, write_detections

__all__ = ["AdapterConfig", "load_config", "create_app", "run_batch",
           "write_detections"]
