"""Conditional probability propagation over a decomposition tree.

A leaf's likelihood is elicited against its retrieved evidence plus any
sibling claims propagated down as conditional factors; an internal node's
probability is the product over its children, where each child is
conditioned on the claims of its later siblings (the chain rule
P(c1|c2..cn) * P(c2|c3..cn) * ... * P(cn)). Pruned subtrees contribute a
factor of 1.
"""

from __future__ import annotations

import math
import re
from typing import Sequence

from . import templates
from .backends import BackendRegistry, ChatRequest
from .errors import EngineError, ResponseFormatError
from .model import Claim, EvidenceBank, EvidenceFactor, RunConfig, SourceSpan, TEXT, TreeNode, leaves
from .retrieve import order_temporal, retrieve_top_k
from .scoring import score_claim

CONDITIONAL_SOURCE = "__conditional__"


def conditional_factor(claim: Claim, ordinal: int) -> EvidenceFactor:
    """Wrap a sibling claim as a synthetic evidence factor for conditioning."""
    return EvidenceFactor(
        id=f"cond:{ordinal}",
        text=f"It is true that: {claim.text}",
        span=SourceSpan(source_id=CONDITIONAL_SOURCE, modality=TEXT, start=0, end=0))


def infer(node: TreeNode, bank: EvidenceBank, cond_claims: Sequence[Claim],
          summary: str, config: RunConfig, registry: BackendRegistry,
          counterfactual_context: str | None = None) -> float:
    """Score ``node`` conditioned on ``cond_claims``, recording traces on the tree.

    Every visited node gets its ``score_trace`` (leaves) and
    ``propagated_prob`` filled in. Pruned nodes are skipped and contribute 1.
    """
    if node.pruned:
        return 1.0
    if node.is_leaf():
        factors = retrieve_top_k(node.claim, bank, config.evidence_max, registry)
        if config.temporal_enhancement:
            factors = order_temporal(factors)
        presented = list(factors) + [conditional_factor(c, i + 1)
                                     for i, c in enumerate(cond_claims)]
        try:
            trace = score_claim(node.claim, presented, summary, counterfactual_context,
                                config, registry)
        except EngineError as exc:
            raise type(exc)(f"node {node.id}: {exc}") from exc
        node.score_trace = trace
        node.propagated_prob = trace.final
        return trace.final

    product = 1.0
    children = node.children
    for i, child in enumerate(children):
        siblings = children[i + 1:] if not config.reverse_conditioning else children[:i]
        extra = [s.claim for s in siblings if not s.pruned]
        product *= infer(child, bank, list(cond_claims) + extra, summary, config,
                         registry, counterfactual_context)
    node.propagated_prob = product
    return product


def aggregate_mean(tree: TreeNode) -> float:
    """Arithmetic mean of the final scores over non-pruned leaves."""
    scored = leaves(tree)
    if not scored:
        raise ValueError("tree has no unpruned leaves")
    totals = []
    for leaf in scored:
        if leaf.score_trace is None:
            raise ValueError(f"leaf {leaf.id} has no score trace")
        totals.append(leaf.score_trace.final)
    # Clamp away float roundoff; the mean lies in [min, max] by definition.
    return min(max(math.fsum(totals) / len(totals), min(totals)), max(totals))


def aggregate_geomean(tree: TreeNode) -> float:
    """Per-leaf geometric mean; a size-normalized alternative to the raw product."""
    scored = leaves(tree)
    if not scored:
        raise ValueError("tree has no unpruned leaves")
    finals = []
    for leaf in scored:
        if leaf.score_trace is None:
            raise ValueError(f"leaf {leaf.id} has no score trace")
        finals.append(leaf.score_trace.final)
    if any(f == 0.0 for f in finals):
        return 0.0
    return math.exp(sum(math.log(f) for f in finals) / len(finals))


def judge_prompt(options: Sequence[tuple[str, Sequence[tuple[str, float]]]]) -> str:
    blocks = []
    for i, (hypothesis, leaf_scores) in enumerate(options, start=1):
        lines = [f"OPTION {i}: {hypothesis}", "SUB-CLAIMS:"]
        lines += [f"({j + 1}) {text} -- score {score:.2f}"
                  for j, (text, score) in enumerate(leaf_scores)]
        blocks.append("\n".join(lines))
    return templates.fill(templates.load(templates.JUDGE), options="\n\n".join(blocks))


def judge(options: Sequence[tuple[str, Sequence[tuple[str, float]]]],
          registry: BackendRegistry) -> tuple[int, str]:
    """Pick the likeliest option by model judgment over leaf claims and scores.

    Options are numbered from 1 in the prompt; the returned index is
    zero-based. The raw response is returned as the rationale.
    """
    if len(options) < 2:
        raise ValueError("judging requires at least two options")
    response = registry.chat_backend().complete(ChatRequest(prompt=judge_prompt(options)))
    match = re.search(r"\d+", response)
    if not match:
        raise ResponseFormatError(f"judge response has no option number: {response[:80]!r}")
    number = int(match.group())
    if not 1 <= number <= len(options):
        raise ResponseFormatError(f"judge chose option {number} of {len(options)}")
    return number - 1, response.strip()
