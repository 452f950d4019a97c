"""Probability-scored claim decomposition trees grounded in multimodal evidence."""

from .model import (
    AdjustmentStep, Claim, EvidenceBank, EvidenceFactor, FrameSamplingParams,
    RunConfig, ScoreTrace, SourceRef, SourceSpan, TreeNode,
    leaves, roundtrip, validate_tree,
)

__all__ = [
    "AdjustmentStep", "Claim", "EvidenceBank", "EvidenceFactor",
    "FrameSamplingParams", "RunConfig", "ScoreTrace", "SourceRef", "SourceSpan",
    "TreeNode", "leaves", "roundtrip", "validate_tree",
]
