"""Top-k evidence selection for a claim, with optional temporal reordering."""

from __future__ import annotations

from typing import Sequence

from .backends import BackendRegistry
from .model import Claim, EvidenceBank, EvidenceFactor, with_relevance


def retrieve_top_k(claim: Claim, bank: EvidenceBank, k: int,
                   registry: BackendRegistry) -> list[EvidenceFactor]:
    """The ``min(k, |bank|)`` most relevant factors, most relevant first.

    Ties are broken by grounding position: (source id, span start, factor id)
    ascending, so repeated runs return identical lists. Each returned factor
    carries its relevance score.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not bank.factors:
        raise ValueError("cannot retrieve from an empty bank")
    scores = registry.relevance().scores(claim.text, [f.text for f in bank.factors])
    ranked = sorted(
        zip(bank.factors, scores),
        key=lambda pair: (-pair[1], pair[0].span.source_id, pair[0].span.start, pair[0].id))
    return [with_relevance(factor, score) for factor, score in ranked[:k]]


def order_temporal(factors: Sequence[EvidenceFactor]) -> list[EvidenceFactor]:
    """Stable sort by span start so the scorer sees evidence in time order."""
    return sorted(factors, key=lambda f: f.span.start)
