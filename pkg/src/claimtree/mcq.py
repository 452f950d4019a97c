"""Multiple-choice inference with counterfactual conditioning.

Each answer option becomes a standalone hypothesis and its own decomposition
tree; leaves shared across options (inherently entailed by every competing
hypothesis) are pruned so scoring concentrates on what distinguishes the
options; leaves are scored under the condition that exactly one hypothesis
is true; and a low-confidence episode can trigger further evidence
extraction rounds using the leaf sub-claims as context.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

from . import templates
from .backends import BackendRegistry, ChatRequest
from .decompose import build_tree, strip_quotes
from .errors import DocumentError, EngineError
from .evidence import FrameGrabber, build_bank
from .infer import aggregate_geomean, aggregate_mean, infer, judge
from .model import (
    Claim, EvidenceBank, RunConfig, SourceRef, TreeNode,
    bank_from_dict, bank_to_dict, leaves, require_field, tree_from_dict, tree_to_dict,
)
from .scoring import make_anchor_summary, question_framing

log = logging.getLogger(__name__)


@dataclass
class McqRun:
    """One multiple-choice episode: hypotheses, per-option trees, scores, choice.

    ``chosen`` is the zero-based index of the selected option (prompts and
    rendered documents number options from 1). ``rounds`` records the evidence
    bank of every extraction round, first round first.
    """

    question: str
    options: tuple[Claim, ...]
    trees: tuple[TreeNode, ...]
    option_scores: tuple[float, ...]
    chosen: int
    config: RunConfig
    rounds: tuple[EvidenceBank, ...] = ()
    anchor_context: str = ""
    counterfactual: str = ""
    judge_rationale: str | None = None

    def __post_init__(self) -> None:
        if len(self.options) < 2:
            raise ValueError("an MCQ run needs at least two options")
        if len(self.trees) != len(self.options) or len(self.option_scores) != len(self.options):
            raise ValueError("trees and option_scores must align 1:1 with options")
        if not 0 <= self.chosen < len(self.options):
            raise ValueError(f"chosen index {self.chosen} out of range")


def qa_to_hypothesis(question: str, answer: str, registry: BackendRegistry,
                     backend_name: str | None = None) -> Claim:
    """Merge a question/answer pair into one standalone declarative statement."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    if not answer.strip():
        raise ValueError("answer must be non-empty")
    prompt = templates.fill(templates.load(templates.HYPOTHESIS),
                            question=question.strip(), answer=answer.strip())
    response = registry.chat_backend(backend_name).complete(ChatRequest(prompt=prompt))
    return Claim(text=strip_quotes(response), atomic=False)


def counterfactual_context(hypotheses: Sequence[Claim]) -> str:
    enumerated = " ".join(f'({i + 1}) "{h.text}"' for i, h in enumerate(hypotheses))
    return (f"Exactly one of the following statements is true: {enumerated}. "
            f"Score the hypothesis relative to these alternatives.")


def prune_shared_leaves(trees: Sequence[TreeNode], tau: float,
                        registry: BackendRegistry) -> Sequence[TreeNode]:
    """Prune leaves entailed (score >= tau) by every competing hypothesis.

    Guarantees every option keeps at least one leaf: if all would be pruned,
    the least-entailed one survives. Trees are annotated in place.
    """
    backend = registry.entailment()
    for index, tree in enumerate(trees):
        other_hypotheses = [t.claim.text for j, t in enumerate(trees) if j != index]
        if not other_hypotheses:
            continue
        option_leaves = leaves(tree)
        floor_scores = []
        for leaf in option_leaves:
            scores = [backend.entailment(h, leaf.claim.text) for h in other_hypotheses]
            floor = min(scores)
            floor_scores.append(floor)
            if floor >= tau:
                leaf.pruned = True
        if option_leaves and all(leaf.pruned for leaf in option_leaves):
            survivor = min(range(len(option_leaves)), key=lambda i: floor_scores[i])
            option_leaves[survivor].pruned = False
    return trees


def _score_options(trees: Sequence[TreeNode], bank: EvidenceBank,
                   anchor: str, counterfactual: str, config: RunConfig,
                   registry: BackendRegistry) -> tuple[tuple[float, ...], int, str | None]:
    for tree in trees:
        infer(tree, bank, [], anchor, config, registry,
              counterfactual_context=counterfactual)
    if config.aggregation == "product":
        scores = tuple(tree.propagated_prob or 0.0 for tree in trees)
    elif config.aggregation == "geomean":
        scores = tuple(aggregate_geomean(tree) for tree in trees)
    else:  # mean for display under the judge as well
        scores = tuple(aggregate_mean(tree) for tree in trees)
    if config.aggregation == "judge":
        options = [(tree.claim.text,
                    [(leaf.claim.text, leaf.score_trace.final) for leaf in leaves(tree)])
                   for tree in trees]
        chosen, rationale = judge(options, registry)
        return scores, chosen, rationale
    chosen = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return scores, chosen, None


def answer_mcq(question: str, raw_options: Sequence[str],
               bank_or_sources: EvidenceBank | Sequence[SourceRef],
               config: RunConfig, registry: BackendRegistry,
               frame_grabber: FrameGrabber | None = None,
               warnings: list[str] | None = None) -> McqRun:
    """Run the full multiple-choice pipeline and select the best option.

    With sources (rather than a prebuilt bank) and ``evidence_level="leaf"``,
    a second extraction round is always performed using the concatenated leaf
    sub-claims as context before scoring.
    """
    if len(raw_options) < 2:
        raise ValueError("an MCQ episode needs at least two options")

    def stage(name: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EngineError as exc:
            raise type(exc)(f"{name}: {exc}") from exc

    hypotheses = [stage(f"hypothesis for option {i + 1}", qa_to_hypothesis,
                        question, option, registry, config.decomposition_backend)
                  for i, option in enumerate(raw_options)]
    trees = [stage(f"decomposition of option {i + 1}", build_tree,
                   h, config, registry, warnings)
             for i, h in enumerate(hypotheses)]
    stage("pruning", prune_shared_leaves, trees, config.tau, registry)

    if isinstance(bank_or_sources, EvidenceBank):
        bank = bank_or_sources
        sources: Sequence[SourceRef] = ()
    else:
        sources = bank_or_sources
        bank = stage("evidence extraction", build_bank, sources, question, config,
                     registry, frame_grabber, None, warnings)
    rounds = [bank]
    if config.evidence_level == "leaf" and sources:
        context = _leaf_context(trees)
        bank = stage("leaf-context extraction", build_bank, sources, context, config,
                     registry, frame_grabber, None, warnings)
        rounds.append(bank)

    anchor = (question_framing(question) if config.anchor == "question"
              else make_anchor_summary([f.text for f in bank.factors], registry))
    counterfactual = counterfactual_context(hypotheses)
    scores, chosen, rationale = stage(
        "scoring", _score_options, trees, bank, anchor, counterfactual,
        config, registry)
    return McqRun(
        question=question,
        options=tuple(hypotheses),
        trees=tuple(trees),
        option_scores=scores,
        chosen=chosen,
        config=config,
        rounds=tuple(rounds),
        anchor_context=anchor,
        counterfactual=counterfactual,
        judge_rationale=rationale,
    )


def _leaf_context(trees: Sequence[TreeNode]) -> str:
    claims = []
    for tree in trees:
        claims += [leaf.claim.text for leaf in leaves(tree)]
    return " ".join(claims)


def rescale_evidence(run: McqRun, sources: Sequence[SourceRef], theta: float,
                     config: RunConfig, registry: BackendRegistry,
                     max_rounds: int = 1,
                     frame_grabber: FrameGrabber | None = None,
                     warnings: list[str] | None = None) -> McqRun:
    """Re-extract and re-score while every option scores below ``theta``.

    Each extra round extracts with the concatenated leaf sub-claims as
    context (test-time conditioning) and replaces the option scores; the run
    is returned unchanged once some option clears the trigger or the round
    budget is spent.
    """
    for _ in range(max_rounds):
        if max(run.option_scores) >= theta:
            return run
        leaf_config = config if config.evidence_level == "leaf" else \
            replace(config, evidence_level="leaf")
        context = _leaf_context(run.trees)
        bank = build_bank(sources, context, leaf_config, registry, frame_grabber,
                          None, warnings)
        scores, chosen, rationale = _score_options(
            run.trees, bank, run.anchor_context, run.counterfactual,
            leaf_config, registry)
        run = replace(run, option_scores=scores, chosen=chosen,
                      judge_rationale=rationale, rounds=run.rounds + (bank,))
    return run


# --- run documents -----------------------------------------------------------

def run_to_dict(run: McqRun) -> dict[str, Any]:
    return {
        "kind": "mcq",
        "revision": 0,
        "question": run.question,
        "options": [{"text": c.text, "atomic": c.atomic} for c in run.options],
        "trees": [tree_to_dict(t) for t in run.trees],
        "option_scores": list(run.option_scores),
        "chosen": run.chosen,
        "config": run.config.to_dict(),
        "rounds": [bank_to_dict(b) for b in run.rounds],
        "anchor_context": run.anchor_context,
        "counterfactual": run.counterfactual,
        "judge_rationale": run.judge_rationale,
        "overrides": {},
    }


def run_from_dict(data: Mapping[str, Any]) -> McqRun:
    if data.get("kind") != "mcq":
        raise DocumentError("run.kind: expected 'mcq'")
    options_raw = require_field(data, "options", (list,), "run")
    options = []
    for i, raw in enumerate(options_raw):
        if not isinstance(raw, Mapping):
            raise DocumentError(f"run.options[{i}]: expected object")
        try:
            options.append(Claim(text=require_field(raw, "text", (str,), f"run.options[{i}]"),
                                 atomic=bool(raw.get("atomic", False))))
        except ValueError as exc:
            raise DocumentError(f"run.options[{i}]: {exc}") from exc
    trees_raw = require_field(data, "trees", (list,), "run")
    trees = tuple(tree_from_dict(raw, f"run.trees[{i}]") for i, raw in enumerate(trees_raw))
    scores_raw = require_field(data, "option_scores", (list,), "run")
    rounds_raw = data.get("rounds", [])
    rationale = data.get("judge_rationale")
    try:
        return McqRun(
            question=require_field(data, "question", (str,), "run"),
            options=tuple(options),
            trees=trees,
            option_scores=tuple(float(s) for s in scores_raw),
            chosen=int(require_field(data, "chosen", (int,), "run")),
            config=RunConfig.from_dict(require_field(data, "config", (Mapping,), "run")),
            rounds=tuple(bank_from_dict(raw, f"run.rounds[{i}]")
                         for i, raw in enumerate(rounds_raw)),
            anchor_context=str(data.get("anchor_context", "")),
            counterfactual=str(data.get("counterfactual", "")),
            judge_rationale=str(rationale) if rationale is not None else None,
        )
    except ValueError as exc:
        raise DocumentError(f"run: {exc}") from exc
