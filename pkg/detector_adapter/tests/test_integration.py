"""Wire-contract integration: the primary toolkit must consume this
service and its batch output through public interfaces only (HTTP and
the detections file format). Requires the sysdiag package installed."""

from __future__ import annotations

import logging
import threading
import time

import pytest
import uvicorn

sysdiag_client = pytest.importorskip(
    "sysdiag.client", reason="integration tests need the primary toolkit installed")
from sysdiag.cli import main as sysdiag_main  # noqa: E402

from detector_adapter.batch import run_batch, write_detections  # noqa: E402
from detector_adapter.config import AdapterConfig  # noqa: E402
from detector_adapter.service import create_app  # noqa: E402


@pytest.fixture(scope="module")
def live_server():
    config = uvicorn.Config(create_app(AdapterConfig()), host="127.0.0.1", port=0,
                            log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestPrimaryClientConsumesService:
    def test_detect_without_warnings(self, live_server, diagram_png, caplog):
        cfg = sysdiag_client.EndpointConfig(base_url=live_server, model_id="detector",
                                            timeout_s=10.0)
        detector = sysdiag_client.HttpDetector(cfg)
        with caplog.at_level(logging.WARNING, logger="sysdiag.client"):
            boxes = detector.detect(diagram_png)
        assert boxes, "expected at least one detection over the wire"
        for box, conf in boxes:
            assert box.violations() == []
            assert 0.0 <= conf <= 1.0
        confs = [conf for _, conf in boxes]
        assert confs == sorted(confs, reverse=True)
        assert not caplog.records, "client should consume the reply without warnings"

    def test_health_endpoint_live(self, live_server):
        import requests

        assert requests.get(f"{live_server}/healthz", timeout=5).status_code == 200


class TestBatchOutputValidatesInPrimaryCli:
    def test_cmd_validate_accepts_batch_detections(self, image_dir, tmp_path, capsys):
        detections = run_batch(AdapterConfig(), image_dir)
        out = tmp_path / "detections.json"
        write_detections(detections, out)
        assert sysdiag_main(["validate", str(out)]) == 0
        assert "ok" in capsys.readouterr().out


class TestPrimaryPipelineOverLiveDetector:
    def test_cmd_run_with_detector_endpoint(self, live_server, image_dir, tmp_path):
        import json
        import shutil

        from sysdiag.storage import read_predictions

        workdir = tmp_path / "ds"
        (workdir / "images").mkdir(parents=True)
        shutil.copy(image_dir / "d1.png", workdir / "images" / "d1.png")
        dataset = {
            "schema_version": "diagramnet/1",
            "diagrams": [{"id": "d1", "image_ref": "images/d1.png",
                          "width_px": 400, "height_px": 300,
                          "components": [], "edges": []}],
            "qa": [],
        }
        (workdir / "annotations.json").write_text(json.dumps(dataset), encoding="utf-8")
        for role, default in (("naming", "BLOCK"), ("reasoning", "[]")):
            (workdir / f"{role}.json").write_text(
                json.dumps({"script": {}, "default": default, "strict": False}),
                encoding="utf-8")
        config = {
            "dataset": "annotations.json",
            "detector_endpoint": {"kind": "http", "base_url": live_server,
                                  "model_id": "detector", "timeout_s": 10.0},
            "endpoints": {
                "naming": {"kind": "scripted", "script": "naming.json"},
                "reasoning": {"kind": "scripted", "script": "reasoning.json"},
                "knowledge": {"default": {"kind": "scripted", "script": "reasoning.json"}},
            },
            "out_dir": "out",
        }
        (workdir / "config.json").write_text(json.dumps(config), encoding="utf-8")

        assert sysdiag_main(["run", "--config", str(workdir / "config.json")]) == 0
        [result] = read_predictions(workdir / "out" / "predictions.jsonl")
        assert result.error is None
        assert result.components, "live detector should have proposed boxes"
        assert all(c.name == "BLOCK" for c in result.components)
        assert all(c.bbox.violations() == [] for c in result.components)
