"""Anchor-and-adjust likelihood elicitation and score-trace parsing.

A claim is scored by anchoring on a generic scenario description and then
updating the score once per presented evidence factor, on an integer rubric
from 0 (virtually impossible) to 10 (practically certain). Rubric integers
are normalized to probabilities in [0, 1] at this boundary by dividing by 10.
"""

from __future__ import annotations

import re
from typing import Sequence

from . import templates
from .backends import BackendRegistry, ChatRequest
from .errors import EngineError, ResponseFormatError
from .model import AdjustmentStep, Claim, EvidenceFactor, RunConfig, ScoreTrace

RUBRIC_MAX = 10

TEMPORAL_NOTE = ("Note that the new information may carry HH:MM:SS timestamps and is "
                 "presented in temporal order; the timing of observations may matter.")

_ENTRY_RE = re.compile(
    r"\(\s*(\d+)\s*\)\s*EXPLANATION:\s*(.*?)\s*SCORE:\s*(-?\d+)", re.DOTALL)


def question_framing(question: str) -> str:
    """The fixed anchor context used when a task provides the question being answered."""
    return f"someone is asking the question, {question}"


def make_anchor_summary(observations: Sequence[str], registry: BackendRegistry,
                        provided_context: str | None = None) -> str:
    """A one-to-three sentence scenario description for the anchor slot.

    Task-provided context wins verbatim; otherwise the chat backend
    summarizes the observations.
    """
    if provided_context is not None and provided_context.strip():
        return provided_context.strip()
    if not observations:
        raise ValueError("cannot summarize an empty observation list")
    prompt = templates.fill(templates.load(templates.SUMMARY),
                            observations="\n".join(f"({i + 1}) {obs}"
                                                   for i, obs in enumerate(observations)))
    return registry.chat_backend().complete(ChatRequest(prompt=prompt)).strip()


def build_scoring_prompt(claim: Claim, summary: str, factors: Sequence[EvidenceFactor],
                         counterfactual_context: str | None = None,
                         temporal_note: bool = False) -> str:
    """Instantiate the scoring template for one claim and its presented evidence."""
    if not factors:
        raise ValueError("scoring requires at least one evidence factor")
    information = "\n".join(f"({i + 1}) {f.text}" for i, f in enumerate(factors))
    conditioning_parts = []
    if counterfactual_context:
        conditioning_parts.append(counterfactual_context)
    if temporal_note:
        conditioning_parts.append(TEMPORAL_NOTE)
    conditioning = "\n\n".join(conditioning_parts)
    if conditioning:
        conditioning += "\n\n"
    return templates.fill(
        templates.load(templates.SCORING_MAIN),
        exemplars=templates.load(templates.SCORING_EXEMPLARS).strip(),
        summary=summary,
        conditioning=conditioning,
        hypothesis=claim.text,
        information=information,
    )


def parse_score_trace(response: str, n_factors: int,
                      factor_ids: Sequence[str] | None = None) -> ScoreTrace:
    """Parse ``(0)..(n)`` explanation/score entries into a trace.

    Entry (0) is the anchor; entries (1)..(n_factors) align with the presented
    factors. Missing, duplicate or extra indices and scores outside 0..10 are
    format errors. When ``factor_ids`` is omitted, steps carry positional ids.
    """
    if factor_ids is not None and len(factor_ids) != n_factors:
        raise ValueError("factor_ids length must equal n_factors")
    entries: dict[int, tuple[str, int]] = {}
    for match in _ENTRY_RE.finditer(response):
        index = int(match.group(1))
        if index in entries:
            raise ResponseFormatError(f"duplicate score entry ({index})")
        score = int(match.group(3))
        if not 0 <= score <= RUBRIC_MAX:
            raise ResponseFormatError(f"entry ({index}) score {score} outside 0..{RUBRIC_MAX}")
        entries[index] = (match.group(2).strip(), score)
    for i in range(n_factors + 1):
        if i not in entries:
            raise ResponseFormatError(f"missing score entry ({i})")
    extras = sorted(set(entries) - set(range(n_factors + 1)))
    if extras:
        raise ResponseFormatError(f"unexpected score entry ({extras[0]})")
    anchor_explanation, anchor_raw = entries[0]
    steps = []
    for i in range(1, n_factors + 1):
        explanation, raw = entries[i]
        if not explanation:
            raise ResponseFormatError(f"entry ({i}) has an empty explanation")
        factor_id = factor_ids[i - 1] if factor_ids is not None else str(i)
        steps.append(AdjustmentStep(factor_id=factor_id, explanation=explanation,
                                    score=raw / RUBRIC_MAX))
    return ScoreTrace.build(anchor_explanation, anchor_raw / RUBRIC_MAX, steps)


def render_score_trace(trace: ScoreTrace) -> str:
    """The textual form of a trace, identical to what the scorer elicits."""
    lines = [f"(0) EXPLANATION: {trace.anchor_explanation}",
             f"SCORE: {round(trace.anchor_score * RUBRIC_MAX)}"]
    for i, step in enumerate(trace.steps, start=1):
        lines.append(f"({i}) EXPLANATION: {step.explanation}")
        lines.append(f"SCORE: {round(step.score * RUBRIC_MAX)}")
    return "\n".join(lines)


def score_claim(claim: Claim, factors: Sequence[EvidenceFactor], summary: str,
                counterfactual_context: str | None, config: RunConfig,
                registry: BackendRegistry) -> ScoreTrace:
    """Elicit a full anchor-and-adjust trace for one claim.

    Default is a single call presenting all evidence at once; with
    ``multi_call_scoring`` the factors are revealed one call at a time, the
    prior trace fed back for continuation, yielding the same trace shape.
    """
    if not factors:
        raise ValueError("score_claim requires at least one factor")
    backend = registry.chat_backend()
    ids = [f.id for f in factors]
    note = config.temporal_enhancement

    def elicit(presented: Sequence[EvidenceFactor], prior: str) -> str:
        prompt = build_scoring_prompt(claim, summary, presented,
                                      counterfactual_context, temporal_note=note)
        if prior:
            prompt = f"{prompt}\n{prior}"
        return backend.complete(ChatRequest(prompt=prompt))

    try:
        if not config.multi_call_scoring:
            response = elicit(factors, "")
            return parse_score_trace(response, len(factors), ids)
        transcript = ""
        trace = None
        for n in range(1, len(factors) + 1):
            response = elicit(factors[:n], transcript)
            combined = f"{transcript}\n{response}" if transcript else response
            trace = parse_score_trace(combined, n, ids[:n])
            transcript = render_score_trace(trace)
        assert trace is not None
        return trace
    except EngineError as exc:
        raise type(exc)(f"scoring claim {claim.text[:60]!r}: {exc}") from exc
