from __future__ import annotations

import json

from fastapi.testclient import TestClient

from detector_adapter.batch import run_batch, write_detections
from detector_adapter.config import AdapterConfig
from detector_adapter.service import create_app


class TestBatch:
    def test_one_entry_per_image(self, image_dir):
        detections = run_batch(AdapterConfig(), image_dir)
        assert sorted(detections) == ["d1", "d2", "d3"]
        assert all(entries for entries in detections.values())

    def test_boxes_are_normalized_fractions(self, image_dir):
        detections = run_batch(AdapterConfig(), image_dir)
        for entries in detections.values():
            for entry in entries:
                x, y, w, h = entry["bbox"]
                assert 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0
                assert 0.0 < w and x + w <= 1.0 + 1e-9
                assert 0.0 < h and y + h <= 1.0 + 1e-9
                assert 0.0 <= entry["conf"] <= 1.0

    def test_empty_dir_produces_empty_file(self, tmp_path):
        detections = run_batch(AdapterConfig(), tmp_path)
        out = tmp_path / "det.json"
        write_detections(detections, out)
        assert json.loads(out.read_text()) == {}

    def test_corrupt_image_yields_empty_entry_and_warning(self, image_dir, tmp_path, caplog):
        broken_dir = tmp_path / "imgs"
        broken_dir.mkdir()
        for p in image_dir.iterdir():
            (broken_dir / p.name).write_bytes(p.read_bytes())
        (broken_dir / "bad.png").write_bytes(b"not a png at all")
        with caplog.at_level("WARNING"):
            detections = run_batch(AdapterConfig(), broken_dir)
        assert detections["bad"] == []
        assert sum(1 for v in detections.values() if v) == 3
        assert any("unreadable" in r.message for r in caplog.records)

    def test_serve_and_batch_produce_identical_boxes(self, image_dir):
        cfg = AdapterConfig()
        batch = run_batch(cfg, image_dir)
        client = TestClient(create_app(cfg))
        for path in sorted(image_dir.glob("*.png")):
            doc = client.post("/detect", content=path.read_bytes()).json()
            width, height = doc["width"], doc["height"]
            served = [
                ([b["x"] / width, b["y"] / height, b["w"] / width, b["h"] / height],
                 b["conf"])
                for b in doc["boxes"]
            ]
            assert served == [(e["bbox"], e["conf"]) for e in batch[path.stem]]
