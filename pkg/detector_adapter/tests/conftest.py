from __future__ import annotations

import io
from pathlib import Path

import pytest
from PIL import Image, ImageDraw


def draw_diagram(blocks: list[tuple[int, int, int, int]],
                 wires: list[tuple[int, int]] = (),
                 size: tuple[int, int] = (400, 300)) -> Image.Image:
    """Blocks as outlined light rectangles, wires as lines between block
    centers, matching how production diagrams render."""
    img = Image.new("RGB", size, "white")
    draw = ImageDraw.Draw(img)
    centers = [(x + w // 2, y + h // 2) for x, y, w, h in blocks]
    for a, b in wires:
        draw.line([centers[a], centers[b]], fill="black", width=2)
    for i, (x, y, w, h) in enumerate(blocks):
        draw.rectangle([x, y, x + w, y + h], fill="#e8e8e8", outline="black", width=2)
        draw.text((x + 5, y + 5), f"B{i}", fill="black")
    return img


def png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


BLOCKS = [(40, 40, 120, 70), (230, 40, 120, 70), (40, 170, 120, 70)]
WIRES = [(0, 1), (0, 2)]


@pytest.fixture(scope="session")
def diagram_image() -> Image.Image:
    return draw_diagram(BLOCKS, WIRES)


@pytest.fixture(scope="session")
def diagram_png(diagram_image) -> bytes:
    return png_bytes(diagram_image)


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("images")
    layouts = [
        ([(40, 40, 120, 70), (230, 40, 120, 70), (40, 170, 120, 70)], [(0, 1), (0, 2)]),
        ([(60, 60, 100, 80), (240, 150, 110, 90)], [(0, 1)]),
        ([(30, 30, 90, 60), (180, 30, 90, 60), (30, 180, 90, 60), (180, 180, 90, 60)],
         [(0, 3), (1, 2)]),
    ]
    for i, (blocks, wires) in enumerate(layouts, start=1):
        draw_diagram(blocks, wires).save(root / f"d{i}.png")
    return root
