"""Run configuration: one JSON file, archived next to every run's
outputs so results stay reproducible.

``${VAR}`` references in string values are expanded from the
environment at load time; intended for secrets only, so the config file
itself never holds keys. Relative paths resolve against the config
file's directory.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .client import EndpointConfig
from .rewards import RewardWeights

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


class ConfigError(ValueError):
    pass


def _interpolate(value: Any) -> Any:
    if isinstance(value, str):
        def sub(m: re.Match) -> str:
            name = m.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name!r} referenced in config is not set")
            return os.environ[name]
        return _ENV_RE.sub(sub, value)
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class EndpointSpec:
    """Either an HTTP endpoint or a scripted reply file."""

    kind: str  # "http" | "scripted"
    http: EndpointConfig | None = None
    script_path: Path | None = None
    default: str | None = None
    strict: bool = True


@dataclass(frozen=True)
class RunConfig:
    dataset: Path
    out_dir: Path
    detections: Path | None
    detector: EndpointSpec | None
    naming: EndpointSpec
    reasoning: EndpointSpec
    knowledge: Mapping[str, EndpointSpec]
    templates: Path | None = None
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    iou_threshold: float = 0.5
    require_name: bool = True
    parallelism: int = 1
    seed: int = 0
    crop_pad: float = 0.10
    cache_dir: Path | None = None
    raw: dict = field(default_factory=dict, compare=False)


def _endpoint_spec(raw: Any, base: Path, where: str) -> EndpointSpec:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(f"{where}: expected an endpoint object with a 'kind'")
    kind = raw["kind"]
    if kind == "scripted":
        if "script" not in raw:
            raise ConfigError(f"{where}: scripted endpoint needs a 'script' path")
        return EndpointSpec(kind="scripted", script_path=base / raw["script"],
                            default=raw.get("default"),
                            strict=bool(raw.get("strict", True)))
    if kind == "http":
        known = {"base_url", "model_id", "adapter_id", "api_key_env", "temperature",
                 "top_p", "timeout_s", "max_retries", "max_concurrency", "conf_floor"}
        fields = {k: v for k, v in raw.items() if k in known}
        try:
            return EndpointSpec(kind="http", http=EndpointConfig(**fields))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown endpoint kind {kind!r}")


def _reward_weights(raw: Any) -> RewardWeights:
    if raw is None:
        return RewardWeights()
    if not isinstance(raw, dict):
        raise ConfigError("reward_weights: expected an object")
    try:
        return RewardWeights(
            alpha=raw.get("alpha", 0.7),
            betas=tuple(raw.get("betas", (0.5, 0.2, 0.3))),
            lambda_fmt=raw.get("lambda_fmt"),
            lambda_acc=raw.get("lambda_acc"),
        )
    except ValueError as exc:
        raise ConfigError(f"reward_weights: {exc}") from exc


def load_run_config(path: str | Path, out_dir: str | Path | None = None,
                    parallelism: int | None = None,
                    cache_dir: str | Path | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    raw = _interpolate(raw)
    base = path.parent

    if "dataset" not in raw:
        raise ConfigError("config needs a 'dataset' path")
    detections = raw.get("detections")
    detector = raw.get("detector_endpoint")
    if (detections is None) == (detector is None):
        raise ConfigError("config must set exactly one of 'detections' and 'detector_endpoint'")

    endpoints = raw.get("endpoints", {})
    for role in ("naming", "reasoning"):
        if role not in endpoints:
            raise ConfigError(f"config needs endpoints.{role}")
    knowledge_raw = endpoints.get("knowledge")
    if not isinstance(knowledge_raw, dict) or not knowledge_raw:
        raise ConfigError("config needs endpoints.knowledge with at least one category")
    if not set(knowledge_raw) <= {"image", "text_only", "default"}:
        raise ConfigError("endpoints.knowledge categories must be "
                          "image / text_only / default")
    knowledge = {
        cat: _endpoint_spec(spec, base, f"endpoints.knowledge.{cat}")
        for cat, spec in knowledge_raw.items()
    }

    metrics = raw.get("metrics", {})
    resolved_out = Path(out_dir) if out_dir is not None else base / raw.get("out_dir", "out")
    resolved_cache = cache_dir if cache_dir is not None else raw.get("cache_dir")
    return RunConfig(
        dataset=base / raw["dataset"],
        out_dir=resolved_out,
        detections=(base / detections) if detections is not None else None,
        detector=_endpoint_spec(detector, base, "detector_endpoint") if detector else None,
        naming=_endpoint_spec(endpoints["naming"], base, "endpoints.naming"),
        reasoning=_endpoint_spec(endpoints["reasoning"], base, "endpoints.reasoning"),
        knowledge=knowledge,
        templates=(base / raw["templates"]) if raw.get("templates") else None,
        reward_weights=_reward_weights(raw.get("reward_weights")),
        iou_threshold=float(metrics.get("iou_threshold", 0.5)),
        require_name=bool(metrics.get("require_name", True)),
        parallelism=int(parallelism if parallelism is not None else raw.get("parallelism", 1)),
        seed=int(raw.get("seed", 0)),
        crop_pad=float(raw.get("crop_pad", 0.10)),
        cache_dir=Path(resolved_cache) if resolved_cache else None,
        raw=raw,
    )
