"""Shared fixture builders for the test suite.

Prompt text is constructed with the same template helpers the engine uses, so
mock scripts stay aligned with the engine; all *expected values* asserted in
tests (final scores, means, products, chosen indices) are hand-computed
constants, never derived from engine output.
"""

from __future__ import annotations

import json
from pathlib import Path

from claimtree import templates
from claimtree.backends import (
    BackendRegistry, MockChatBackend, MockEntailment, ScriptedRelevance, script_key,
)
from claimtree.decompose import decomposition_prompt
from claimtree.evidence import extraction_prompt
from claimtree.mcq import counterfactual_context
from claimtree.model import (
    AdjustmentStep, Claim, EvidenceBank, EvidenceFactor, ScoreTrace, SourceRef,
    SourceSpan, TreeNode, bank_to_jsonl,
)
from claimtree.scoring import build_scoring_prompt, question_framing

QUESTION = "What event is taking place?"
ANSWERS = ["a wedding", "a funeral"]
HYPOTHESES = ["A wedding is taking place.", "A funeral is taking place."]
SHARED_LEAF = "People are gathered for a ceremony."
WEDDING_LEAF = "The ceremony is a wedding."
FUNERAL_LEAF = "The ceremony is a funeral."
DOC_LINES = [
    "The hall was decorated with garlands of flowers.",
    "Rows of chairs had been set out facing an arch.",
    "Guests in formal clothes were finding their seats.",
    "A man in a dark suit stood at the front holding a book.",
    "Soft organ music was playing in the background.",
    "A woman in a long white dress waited by the door.",
    "Two rings rested on a small velvet cushion.",
    "Someone was handing out small bags of rice.",
]
ROUND1_OBS = ["Rows of white chairs face a floral arch.",
              "A woman in a white dress holds a bouquet."]
ROUND2_OBS = ["A bride and groom exchange rings at the altar.",
              "Guests throw rice at the couple."]


def scoring_response(*scores: int) -> str:
    """A well-formed rubric response: anchor score first, then one per factor."""
    lines = [f"(0) EXPLANATION: Initial read of the scenario.", f"SCORE: {scores[0]}"]
    for i, score in enumerate(scores[1:], start=1):
        lines.append(f"({i}) EXPLANATION: Update for item {i}.")
        lines.append(f"SCORE: {score}")
    return "\n".join(lines)


def decomposition_response(*texts: str) -> str:
    return "\n".join(f'({i + 1}) "{t}"' for i, t in enumerate(texts))


def extraction_response(*texts: str) -> str:
    return "\n".join(f"({i + 1}) {t}" for i, t in enumerate(texts))


def hypothesis_prompt(question: str, answer: str) -> str:
    return templates.fill(templates.load(templates.HYPOTHESIS),
                          question=question, answer=answer)


def leaf(node_id: str, text: str, final: float | None = None,
         pruned: bool = False, atomic: bool = True) -> TreeNode:
    node = TreeNode(id=node_id, claim=Claim(text=text, atomic=atomic), pruned=pruned)
    if final is not None:
        node.score_trace = ScoreTrace.build(
            "anchor", 0.5,
            [AdjustmentStep(factor_id="f", explanation="adjust", score=final)])
        node.propagated_prob = final
    return node


def branch(node_id: str, text: str, children: list[TreeNode]) -> TreeNode:
    return TreeNode(id=node_id, claim=Claim(text=text), children=children)


def tiny_bank(texts: list[str], source_id: str = "src", length: float = 1000.0,
              modality: str = "text") -> EvidenceBank:
    factors = tuple(
        EvidenceFactor(id=f"{source_id}:{i}:0", text=text,
                       span=SourceSpan(source_id=source_id, modality=modality,
                                       start=float(i), end=float(i)))
        for i, text in enumerate(texts))
    sources = (SourceRef(id=source_id, modality="text", uri="mem://bank", length=length),)
    return EvidenceBank(factors=factors, sources=sources)


def factor(text: str, source_id: str = "src", start: float = 0.0,
           suffix: str = "0") -> EvidenceFactor:
    return EvidenceFactor(id=f"{source_id}:{start:g}:{suffix}", text=text,
                          span=SourceSpan(source_id=source_id, modality="text",
                                          start=start, end=start))


def registry_from_script(script: dict) -> BackendRegistry:
    """The same wiring the CLI performs for a mock script document."""
    registry = BackendRegistry()
    registry.register("mock", MockChatBackend(script.get("chat", {})),
                      roles=("chat", "vision"))
    table = {(e["premise"], e["hypothesis"]): float(e["score"])
             for e in script.get("entailment", [])}
    registry.set_entailment(MockEntailment(table))
    if script.get("relevance"):
        registry.set_relevance(ScriptedRelevance(script["relevance"]))
    return registry


# --- conditioning-order oracle -------------------------------------------------

def walk_conditioning_order(node: TreeNode, cond: tuple[str, ...] = (),
                            reverse: bool = False):
    """Enumerate (leaf, conditioning claim texts) per the propagation recursion.

    Child i is conditioned on the claims of its later siblings (earlier when
    ``reverse``); pruned subtrees are skipped and pruned siblings never
    condition anything. This is the test-side reference for what the engine
    must present to the scorer.
    """
    if node.pruned:
        return
    if not node.children:
        yield node, cond
        return
    for i, child in enumerate(node.children):
        siblings = node.children[:i] if reverse else node.children[i + 1:]
        extra = tuple(s.claim.text for s in siblings if not s.pruned)
        yield from walk_conditioning_order(child, cond + extra, reverse)


def script_tree_scoring(tree: TreeNode, bank: EvidenceBank, summary: str,
                        rubric_for, em: int = 1, reverse: bool = False,
                        counterfactual: str | None = None):
    """Mock prompts for every leaf the propagation will score, plus the product.

    ``rubric_for(leaf, cond_texts)`` returns the 0..10 rubric integer that the
    scripted response ends with. The expected root probability is the product
    of those finals over the enumerated leaves, computed here independently.
    """
    from claimtree.backends import BackendRegistry
    from claimtree.retrieve import retrieve_top_k

    prompts: dict[str, str] = {}
    expected = 1.0
    plain = BackendRegistry.mock({})
    for node, cond in walk_conditioning_order(tree, (), reverse):
        retrieved = retrieve_top_k(node.claim, bank, em, plain)
        presented = list(retrieved) + [
            factor(f"It is true that: {text}", "__conditional__", 0.0, f"c{i}")
            for i, text in enumerate(cond)]
        rubric = rubric_for(node, cond)
        prompt = build_scoring_prompt(node.claim, summary, presented, counterfactual)
        prompts[prompt] = scoring_response(5, *([rubric] * len(presented)))
        expected *= rubric / 10
    return prompts, expected


# --- the bundled two-option episode fixture ----------------------------------

def episode_config(rescale: bool = False) -> dict:
    return {
        "vb": "mock", "db": "mock", "dm": 2, "em": 2,
        "te": False, "el": "base", "ag": "mean",
        "window": 8, "stride": 4, "tau": 0.9, "theta": 0.5,
        "rescale_rounds": 1 if rescale else 0,
        "anchor": "question",
        "backends": {
            "mock": {"kind": "mock", "script": "script.json",
                     "roles": ["chat", "vision", "relevance", "entailment"]},
        },
    }


def episode_leaf_prompt(leaf_text: str, observations: list[str] = ROUND1_OBS) -> str:
    """The exact scoring prompt the episode issues for one unpruned leaf."""
    anchor = question_framing(QUESTION)
    counterfactual = counterfactual_context([Claim(h) for h in HYPOTHESES])
    presented = [factor(observations[0], "src1", 0.0, "0"),
                 factor(observations[1], "src1", 0.0, "1")]
    return build_scoring_prompt(Claim(leaf_text), anchor, presented, counterfactual)


def episode_script(rescale: bool = False) -> dict:
    """The full mock script for the bundled episode.

    Hand-derived behavior: the shared "ceremony" leaf of each option is
    entailed at 0.95 by the competing hypothesis and is pruned (tau 0.9);
    each option keeps exactly one discriminative leaf. With aggregation
    "mean", option scores equal that leaf's final score.

      plain run:   wedding leaf -> 0.8, funeral leaf -> 0.1, chosen 0
      rescale run: round 1 gives 0.3 / 0.2 (all below theta 0.5), round 2
                   re-extracts with the leaf claims as context and gives
                   0.9 / 0.2, chosen 0
    """
    chat: dict[str, str] = {}

    def script(prompt: str, response: str) -> None:
        chat[script_key(prompt)] = response

    for answer, hypothesis in zip(ANSWERS, HYPOTHESES):
        script(hypothesis_prompt(QUESTION, answer), hypothesis)
    script(decomposition_prompt(HYPOTHESES[0]),
           decomposition_response(SHARED_LEAF, WEDDING_LEAF))
    script(decomposition_prompt(HYPOTHESES[1]),
           decomposition_response(SHARED_LEAF, FUNERAL_LEAF))
    for text in (SHARED_LEAF, WEDDING_LEAF, FUNERAL_LEAF):
        script(decomposition_prompt(text), "N/A")

    dialogue = "\n".join(DOC_LINES)
    script(extraction_prompt("text", dialogue, None, QUESTION, "base"),
           extraction_response(*ROUND1_OBS))

    relevance = {ROUND1_OBS[0]: 0.9, ROUND1_OBS[1]: 0.5}
    leaf_prompt = episode_leaf_prompt

    if not rescale:
        script(leaf_prompt(WEDDING_LEAF, ROUND1_OBS), scoring_response(3, 6, 8))
        script(leaf_prompt(FUNERAL_LEAF, ROUND1_OBS), scoring_response(3, 2, 1))
    else:
        script(leaf_prompt(WEDDING_LEAF, ROUND1_OBS), scoring_response(3, 3, 3))
        script(leaf_prompt(FUNERAL_LEAF, ROUND1_OBS), scoring_response(3, 2, 2))
        leaf_context = f"{WEDDING_LEAF} {FUNERAL_LEAF}"
        script(extraction_prompt("text", dialogue, None, leaf_context, "leaf"),
               extraction_response(*ROUND2_OBS))
        relevance.update({ROUND2_OBS[0]: 0.9, ROUND2_OBS[1]: 0.5})
        script(leaf_prompt(WEDDING_LEAF, ROUND2_OBS), scoring_response(3, 8, 9))
        script(leaf_prompt(FUNERAL_LEAF, ROUND2_OBS), scoring_response(3, 1, 2))

    entailment = [
        {"premise": HYPOTHESES[1], "hypothesis": SHARED_LEAF, "score": 0.95},
        {"premise": HYPOTHESES[0], "hypothesis": SHARED_LEAF, "score": 0.95},
    ]
    return {"chat": chat, "entailment": entailment, "relevance": relevance}


def write_episode_fixture(root: Path, rescale: bool = False) -> dict[str, Path]:
    """Write config, mock script, source document and MCQ input under ``root``."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "ceremony.txt").write_text("\n".join(DOC_LINES) + "\n", encoding="utf-8")
    episode = {
        "question": QUESTION,
        "options": ANSWERS,
        "sources": [{"id": "src1", "modality": "text", "uri": "ceremony.txt",
                     "length": len(DOC_LINES)}],
    }
    paths = {
        "config": root / "config.json",
        "script": root / "script.json",
        "episode": root / "mcq.json",
        "out": root / "run.json",
    }
    paths["config"].write_text(json.dumps(episode_config(rescale), indent=2),
                               encoding="utf-8")
    paths["script"].write_text(json.dumps(episode_script(rescale), indent=2),
                               encoding="utf-8")
    paths["episode"].write_text(json.dumps(episode, indent=2), encoding="utf-8")
    return paths


# --- small cmd_score fixtures -------------------------------------------------

SCORE_HYPOTHESIS = "The garment floated."
SCORE_CONTEXT = "People are examining a garment."
SCORE_OBS = ["The garment is lifted from a desk surface.",
             "A person comments that the garment is invisible."]


def write_score_fixture(root: Path, two_leaf: bool = False) -> dict[str, Path]:
    """Bank + config + script for ``claimtree score``.

    Single-leaf variant: responses (5, 6, 7) -> prints 0.7000.
    Two-leaf variant (decomposition on): leaf finals 0.9 and 0.8 under
    left-on-right conditioning -> root product 0.72 -> prints 0.7200.
    """
    root.mkdir(parents=True, exist_ok=True)
    bank = tiny_bank(SCORE_OBS, source_id="obs")
    (root / "bank.jsonl").write_text(bank_to_jsonl(bank), encoding="utf-8")
    relevance = {SCORE_OBS[0]: 0.9, SCORE_OBS[1]: 0.5}
    chat: dict[str, str] = {}

    def script(prompt: str, response: str) -> None:
        chat[script_key(prompt)] = response

    presented = [bank.factors[0], bank.factors[1]]
    if not two_leaf:
        config = {"em": 3, "ag": "product",
                  "backends": {"mock": {"kind": "mock", "script": "script.json",
                                        "roles": ["chat", "relevance", "entailment"]}}}
        script(build_scoring_prompt(Claim(SCORE_HYPOTHESIS), SCORE_CONTEXT, presented),
               scoring_response(5, 6, 7))
    else:
        config = {"db": "mock", "dm": 1, "em": 3, "ag": "product",
                  "backends": {"mock": {"kind": "mock", "script": "script.json",
                                        "roles": ["chat", "relevance", "entailment"]}}}
        left, right = "The garment rose from the desk.", "Nothing was holding the garment up."
        script(decomposition_prompt(SCORE_HYPOTHESIS), decomposition_response(left, right))
        conditioned = presented + [factor(f"It is true that: {right}", "__conditional__",
                                          0.0, "c")]
        script(build_scoring_prompt(Claim(left), SCORE_CONTEXT, conditioned),
               scoring_response(5, 8, 8, 9))
        script(build_scoring_prompt(Claim(right), SCORE_CONTEXT, presented),
               scoring_response(5, 7, 8))
    paths = {"config": root / "config.json", "script": root / "script.json",
             "bank": root / "bank.jsonl", "out": root / "tree.json"}
    paths["config"].write_text(json.dumps(config, indent=2), encoding="utf-8")
    paths["script"].write_text(json.dumps({"chat": chat, "relevance": relevance},
                                          indent=2), encoding="utf-8")
    return paths
