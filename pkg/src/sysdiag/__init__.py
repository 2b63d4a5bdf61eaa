"""Toolkit for recognizing, scoring, and reward-auditing the topology
of system-level block diagrams."""

from .model import (
    BBox,
    Component,
    Diagram,
    Edge,
    QAItem,
    RecognitionResult,
    normalize_name,
    validate_diagram,
    validate_qa_item,
)
from .metrics import MatchResult, ScoreCard, match_components, score_card
from .rewards import RewardBreakdown, RewardWeights

__all__ = [
    "BBox",
    "Component",
    "Diagram",
    "Edge",
    "QAItem",
    "RecognitionResult",
    "MatchResult",
    "ScoreCard",
    "RewardBreakdown",
    "RewardWeights",
    "normalize_name",
    "validate_diagram",
    "validate_qa_item",
    "match_components",
    "score_card",
]
