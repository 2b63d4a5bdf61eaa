from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from conftest import BLOCKS
from detector_adapter.config import AdapterConfig
from detector_adapter.service import create_app


@pytest.fixture(scope="module")
def client() -> TestClient:
    return TestClient(create_app(AdapterConfig()))


class TestDetectEndpoint:
    def test_health_probe(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}

    def test_fixture_image_returns_overlapping_boxes(self, client, diagram_png):
        resp = client.post("/detect", content=diagram_png)
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["width"] == 400 and doc["height"] == 300
        assert doc["boxes"], "expected at least one detection"
        for box in doc["boxes"]:
            assert set(box) == {"x", "y", "w", "h", "conf"}
            assert 0 <= box["x"] and box["x"] + box["w"] <= doc["width"]
            assert 0 <= box["y"] and box["y"] + box["h"] <= doc["height"]
        first = BLOCKS[0]
        assert any(
            not (b["x"] + b["w"] <= first[0] or first[0] + first[2] <= b["x"]
                 or b["y"] + b["h"] <= first[1] or first[1] + first[3] <= b["y"])
            for b in doc["boxes"]
        )

    def test_garbage_bytes_get_400(self, client):
        resp = client.post("/detect", content=b"this is not an image")
        assert resp.status_code == 400
        assert "undecodable" in resp.json()["detail"]

    def test_empty_body_gets_400(self, client):
        assert client.post("/detect", content=b"").status_code == 400

    def test_internal_failure_gets_500(self, diagram_png):
        cfg = AdapterConfig(backend="tests_support_broken:broken_backend")
        app = create_app(cfg)
        broken = TestClient(app, raise_server_exceptions=False)
        resp = broken.post("/detect", content=diagram_png)
        assert resp.status_code == 500

    def test_boxes_capped_and_sorted(self, diagram_png):
        capped = TestClient(create_app(AdapterConfig(max_detections=2)))
        doc = capped.post("/detect", content=diagram_png).json()
        assert len(doc["boxes"]) <= 2
        confs = [b["conf"] for b in doc["boxes"]]
        assert confs == sorted(confs, reverse=True)
