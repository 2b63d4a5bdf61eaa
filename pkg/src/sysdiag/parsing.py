"""Parsers that turn free-form model output into domain values.

Every parser returns a :class:`ParseOutcome` and never raises on
arbitrary input. ``strict=True`` means the text was accepted by the
task's strict grammar with no fallback heuristics; that flag is the
definition of the format reward, while the pipeline consumes the
(lenient) value either way.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Sequence

from .model import BBox, Component, normalize_name

ABSTAIN = "<abstain>"

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_-]*\s*\n?(.*?)\n?```\s*$", re.DOTALL)
_NUMBERED_LINE_RE = re.compile(r"^\s*\d+[.)]\s+(\S.*?)\s*$")
_LIST_MARKER_RE = re.compile(r"^\s*(?:[-*•]|\d+[.):]?)\s*")
_INDEX_NAME_RE = re.compile(r"^\s*(\d+)\s*[:.\-]\s*(.*?)\s*$")
_FLOAT_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?")


@dataclass(frozen=True)
class ParseOutcome:
    value: Any
    strict: bool
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.strict and self.warnings:
            raise ValueError("a strict outcome cannot carry warnings")


def _strip_fences(text: str) -> tuple[str, bool]:
    m = _FENCE_RE.match(text.strip())
    if m:
        return m.group(1), True
    return text, False


def _json_array(text: str) -> list | None:
    try:
        value = json.loads(text)
    except (json.JSONDecodeError, RecursionError, ValueError):
        return None
    return value if isinstance(value, list) else None


def parse_component_names(text: str, lenient: bool = True) -> ParseOutcome:
    """Ordered component-name list.

    Strict grammar: a JSON array of strings, or a newline-numbered list
    ("1. NAME"). Lenient fallback strips code fences and then takes each
    non-empty line (minus leading list markers) as one name.
    """
    stripped = text.strip()

    arr = _json_array(stripped)
    if arr is not None and all(isinstance(v, str) for v in arr):
        return ParseOutcome(list(arr), strict=True)

    lines = [ln for ln in stripped.splitlines() if ln.strip()]
    if lines:
        numbered = [_NUMBERED_LINE_RE.match(ln) for ln in lines]
        if all(numbered):
            return ParseOutcome([m.group(1) for m in numbered], strict=True)

    if not lenient:
        return ParseOutcome([], strict=False, warnings=("strict grammar rejected",))

    warnings: list[str] = []
    body, fenced = _strip_fences(stripped)
    if fenced:
        warnings.append("code fence stripped")
        inner = parse_component_names(body, lenient=False)
        if inner.strict:
            return ParseOutcome(inner.value, strict=False, warnings=tuple(warnings))

    arr = _json_array(body.strip())
    if arr is not None:
        warnings.append("non-string entries coerced")
        return ParseOutcome([str(v) for v in arr], strict=False, warnings=tuple(warnings))

    names = []
    for ln in body.splitlines():
        cleaned = _LIST_MARKER_RE.sub("", ln).strip()
        if cleaned:
            names.append(cleaned)
    if names:
        warnings.append("line heuristic applied")
    else:
        warnings.append("no names found")
    return ParseOutcome(names, strict=False, warnings=tuple(warnings))


def _resolve_token(token: Any, by_index: dict[int, Component],
                   by_name: dict[str, list[int]]) -> tuple[int | None, str | None]:
    """Resolve one reply token to a component index; (index, warning)."""
    if isinstance(token, bool):
        return None, f"unresolved: {token!r}"
    if isinstance(token, int):
        if token in by_index:
            return token, None
        return None, f"index out of range: {token}"
    if isinstance(token, float):
        if token.is_integer() and int(token) in by_index:
            return int(token), "integer given as float"
        return None, f"unresolved: {token!r}"
    if isinstance(token, str):
        s = token.strip()
        if re.fullmatch(r"\d+", s):
            return _resolve_token(int(s), by_index, by_name)
        m = _INDEX_NAME_RE.match(s)
        if m and m.group(2):
            idx = int(m.group(1))
            if idx in by_index:
                return idx, "index:name pair"
        hits = by_name.get(normalize_name(s), [])
        if len(hits) == 1:
            return hits[0], None
        if len(hits) > 1:
            return hits[0], f"ambiguous name: {s} (took index {hits[0]})"
        return None, f"unresolved: {s}"
    return None, f"unresolved: {token!r}"


def parse_targets(text: str, vocabulary: Sequence[Component],
                  source_index: int | None = None, lenient: bool = True) -> ParseOutcome:
    """Set of target component indices.

    Strict grammar: a JSON array of component indices or exact component
    names; names resolve through :func:`normalize_name`. An echoed
    source index is excluded silently (targets never include the
    source). The lenient path also strips fences, reads "index: name"
    lines, and drops unresolvable tokens with warnings.
    """
    if not vocabulary:
        raise ValueError("parse_targets requires a non-empty vocabulary")
    by_index = {c.index: c for c in vocabulary}
    by_name: dict[str, list[int]] = {}
    for c in sorted(vocabulary, key=lambda c: c.index):
        by_name.setdefault(normalize_name(c.name), []).append(c.index)

    def resolve_all(tokens: Sequence[Any]) -> tuple[set[int], list[str]]:
        found: set[int] = set()
        warns: list[str] = []
        for tok in tokens:
            idx, warn = _resolve_token(tok, by_index, by_name)
            if warn:
                warns.append(warn)
            if idx is not None and idx != source_index:
                found.add(idx)
        return found, warns

    stripped = text.strip()
    arr = _json_array(stripped)
    if arr is not None:
        targets, warns = resolve_all(arr)
        if not warns:
            return ParseOutcome(targets, strict=True)
        if not lenient:
            return ParseOutcome(targets, strict=False, warnings=tuple(warns))

    if not lenient:
        return ParseOutcome(set(), strict=False, warnings=("strict grammar rejected",))

    warnings = []
    body, fenced = _strip_fences(stripped)
    if fenced:
        warnings.append("code fence stripped")
        arr = _json_array(body.strip())
        if arr is not None:
            targets, warns = resolve_all(arr)
            return ParseOutcome(targets, strict=False, warnings=tuple(warnings + warns))
    if arr is not None:  # unfenced array that had warnings
        targets, warns = resolve_all(arr)
        return ParseOutcome(targets, strict=False, warnings=tuple(warnings + warns))

    tokens = [ln.strip() for ln in body.splitlines() if ln.strip()]
    if len(tokens) == 1 and "," in tokens[0] and not _INDEX_NAME_RE.match(tokens[0]):
        tokens = [t.strip() for t in tokens[0].split(",") if t.strip()]
    if not tokens:
        return ParseOutcome(set(), strict=False, warnings=tuple(warnings + ["no targets found"]))
    warnings.append("line heuristic applied")
    targets, warns = resolve_all(tokens)
    return ParseOutcome(targets, strict=False, warnings=tuple(warnings + warns))


def parse_qa_label(text: str, options: Sequence, lenient: bool = True) -> ParseOutcome:
    """Answer label for a multiple-choice item.

    Strict grammar: the text is a lone option label. Lenient path: the
    last standalone label token in the text wins (reasoning precedes the
    answer). No label found => the ABSTAIN sentinel, scored wrong.
    """
    if not options:
        raise ValueError("parse_qa_label requires a non-empty option list")
    labels = [o[0] if isinstance(o, (tuple, list)) else str(o) for o in options]

    stripped = text.strip()
    if stripped in labels:
        return ParseOutcome(stripped, strict=True)
    if not lenient:
        return ParseOutcome(ABSTAIN, strict=False, warnings=("strict grammar rejected",))

    warnings = []
    body, fenced = _strip_fences(stripped)
    if fenced:
        warnings.append("code fence stripped")
        if body.strip() in labels:
            return ParseOutcome(body.strip(), strict=False, warnings=tuple(warnings))

    best: tuple[int, str] | None = None
    for label in labels:
        pattern = re.compile(
            r"(?<![A-Za-z0-9])" + re.escape(label) + r"(?![A-Za-z0-9])"
        )
        for m in pattern.finditer(body):
            if best is None or m.end() > best[0]:
                best = (m.end(), label)
    if best is None:
        return ParseOutcome(ABSTAIN, strict=False,
                            warnings=tuple(warnings + ["no label found"]))
    return ParseOutcome(best[1], strict=False,
                        warnings=tuple(warnings + ["last-label heuristic applied"]))


def parse_bbox(text: str, lenient: bool = True) -> ParseOutcome:
    """Normalized bounding box from model output.

    Strict grammar: a JSON array of exactly four numbers forming a valid
    box in the unit square. Lenient path: first four floats found in the
    text, clamped into the unit square.
    """
    stripped = text.strip()
    arr = _json_array(stripped)
    if (
        arr is not None
        and len(arr) == 4
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in arr)
    ):
        box = BBox(*(float(v) for v in arr))
        if not box.violations():
            return ParseOutcome(box, strict=True)

    if not lenient:
        return ParseOutcome(None, strict=False, warnings=("strict grammar rejected",))

    warnings = []
    body, fenced = _strip_fences(stripped)
    if fenced:
        warnings.append("code fence stripped")
    nums = [float(m.group(0)) for m in _FLOAT_RE.finditer(body)][:4]
    if len(nums) < 4:
        return ParseOutcome(None, strict=False,
                            warnings=tuple(warnings + ["fewer than four numbers found"]))
    x, y, w, h = nums
    x = min(max(x, 0.0), 1.0)
    y = min(max(y, 0.0), 1.0)
    w = min(max(w, 0.0), 1.0 - x)
    h = min(max(h, 0.0), 1.0 - y)
    if w <= 0.0 or h <= 0.0:
        return ParseOutcome(None, strict=False,
                            warnings=tuple(warnings + ["degenerate box after clamping"]))
    return ParseOutcome(BBox(x, y, w, h), strict=False,
                        warnings=tuple(warnings + ["numeric heuristic applied"]))


def extract_single_name(text: str) -> tuple[str, tuple[str, ...]]:
    """Best-effort single component name from a naming reply: fences and
    surrounding quotes removed, first non-empty line kept."""
    body, fenced = _strip_fences(text.strip())
    warnings = ("code fence stripped",) if fenced else ()
    for ln in body.splitlines():
        cleaned = _LIST_MARKER_RE.sub("", ln).strip().strip('"').strip("'").strip()
        if cleaned:
            return cleaned, warnings
    return "", warnings + ("no name found",)
