"""Spatial primitives: IoU, row-major ordering, and straight-line
edge-crossing counts.

Row banding rule: two components share a band when their y-centers lie
within tau of the band anchor (its topmost member), where
tau = 0.5 * median bbox height over the diagram. Banding is a single
greedy pass over components sorted by y-center, which makes the order
invariant under uniform scaling and translation of all boxes.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Sequence

from .model import BBox, Component, Diagram

ROW_TOL_FACTOR = 0.5


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union; degenerate boxes (w or h <= 0) score 0
    against anything, including themselves.

    Areas are computed from the same corner differences as the
    intersection so identical boxes score exactly 1.0 in floating point.
    """
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        return 0.0
    ax2, ay2, bx2, by2 = a.x2, a.y2, b.x2, b.y2
    ix = min(ax2, bx2) - max(a.x, b.x)
    iy = min(ay2, by2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (ax2 - a.x) * (ay2 - a.y)
    area_b = (bx2 - b.x) * (by2 - b.y)
    union = area_a + area_b - inter
    return inter / union


@dataclass(frozen=True)
class RowBand:
    band_index: int
    member_indices: tuple[int, ...]  # sorted by x-center ascending


def row_bands(components: Sequence[Component]) -> list[RowBand]:
    """Group components into horizontal bands, top to bottom.

    Ties inside a band break on (x-center, y-center, input position) so
    identical centers preserve input order.
    """
    if not components:
        return []
    tau = ROW_TOL_FACTOR * statistics.median(c.bbox.h for c in components)

    keyed = sorted(
        range(len(components)),
        key=lambda i: (components[i].bbox.center[1], components[i].bbox.center[0], i),
    )
    bands: list[list[int]] = []
    anchor_y = None
    for i in keyed:
        y = components[i].bbox.center[1]
        if anchor_y is None or y - anchor_y > tau:
            bands.append([i])
            anchor_y = y
        else:
            bands[-1].append(i)

    out = []
    for b, members in enumerate(bands):
        members.sort(
            key=lambda i: (components[i].bbox.center[0], components[i].bbox.center[1], i)
        )
        out.append(RowBand(b + 1, tuple(components[i].index for i in members)))
    return out


def row_major_order(components: Sequence[Component]) -> list[int]:
    """Existing component indices, re-ranked left-to-right within bands
    and bands top-to-bottom. A bijection on the input indices."""
    if not components:
        raise ValueError("row_major_order requires at least one component")
    return [idx for band in row_bands(components) for idx in band.member_indices]


def reorder_row_major(components: Sequence[Component]) -> list[Component]:
    """Same components with fresh 1..n indices assigned in row-major order."""
    by_index = {c.index: c for c in components}
    return [
        Component(index=rank, name=by_index[old].name, bbox=by_index[old].bbox)
        for rank, old in enumerate(row_major_order(components), start=1)
    ]


def _orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper crossing, with collinear overlap counted as one crossing."""
    o1 = _orient(*p1, *p2, *p3)
    o2 = _orient(*p1, *p2, *p4)
    o3 = _orient(*p3, *p4, *p1)
    o4 = _orient(*p3, *p4, *p2)
    if o1 == o2 == o3 == o4 == 0.0:
        # Collinear: count when the 1-D projections overlap in more than a point.
        if abs(p2[0] - p1[0]) >= abs(p2[1] - p1[1]):
            lo1, hi1 = sorted((p1[0], p2[0]))
            lo2, hi2 = sorted((p3[0], p4[0]))
        else:
            lo1, hi1 = sorted((p1[1], p2[1]))
            lo2, hi2 = sorted((p3[1], p4[1]))
        return min(hi1, hi2) - max(lo1, lo2) > 0
    return o1 * o2 < 0 and o3 * o4 < 0


def count_crossings(d: Diagram) -> int:
    """Number of unordered edge pairs whose center-to-center segments
    cross. Pairs sharing a component endpoint are excluded."""
    centers = {c.index: c.bbox.center for c in d.components}
    segs = [
        (e.src, e.dst, centers[e.src], centers[e.dst])
        for e in d.edges
        if e.src in centers and e.dst in centers
    ]
    count = 0
    for i in range(len(segs)):
        a_src, a_dst, a1, a2 = segs[i]
        for j in range(i + 1, len(segs)):
            b_src, b_dst, b1, b2 = segs[j]
            if {a_src, a_dst} & {b_src, b_dst}:
                continue
            if _segments_cross(a1, a2, b1, b2):
                count += 1
    return count
