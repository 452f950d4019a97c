"""Probability propagation: leaf scoring, chain-rule product, aggregation, judging."""

from __future__ import annotations

import random

import pytest

from claimtree.backends import BackendRegistry
from claimtree.errors import ResponseFormatError
from claimtree.infer import (
    aggregate_geomean, aggregate_mean, infer, judge, judge_prompt,
)
from claimtree.model import Claim, RunConfig, TreeNode

from helpers import branch, leaf, script_tree_scoring, tiny_bank
from test_model import random_tree

CONFIG = RunConfig(evidence_max=1)
BANK = tiny_bank(["a background observation"])
SUMMARY = "a scripted scenario"


def run_infer(tree: TreeNode, rubric_for, config: RunConfig = CONFIG,
              reverse: bool = False) -> tuple[float, float]:
    prompts, expected = script_tree_scoring(tree, BANK, SUMMARY, rubric_for,
                                            em=config.evidence_max, reverse=reverse)
    registry = BackendRegistry.mock(prompts)
    got = infer(tree, BANK, [], SUMMARY, config, registry)
    return got, expected


class TestInfer:
    def test_single_leaf_passthrough(self):
        tree = leaf("0", "An atomic statement.")
        got, _ = run_infer(tree, lambda node, cond: 7)
        assert got == 0.7
        assert tree.score_trace is not None
        assert tree.propagated_prob == 0.7

    def test_two_leaf_product(self):
        tree = branch("0", "Both halves hold.", [
            leaf("0.0", "The first half holds."),
            leaf("0.1", "The second half holds."),
        ])
        scores = {"0.0": 9, "0.1": 8}
        got, expected = run_infer(tree, lambda node, cond: scores[node.id])
        assert got == pytest.approx(0.72, abs=1e-12)
        assert got == expected
        assert tree.propagated_prob == got

    def test_left_child_sees_right_sibling(self):
        tree = branch("0", "Both halves hold.", [
            leaf("0.0", "The first half holds."),
            leaf("0.1", "The second half holds."),
        ])
        seen = {}

        def rubric(node, cond):
            seen[node.id] = cond
            return 5

        run_infer(tree, rubric)
        assert seen["0.0"] == ("The second half holds.",)
        assert seen["0.1"] == ()

    def test_depth_two_chain(self):
        # Root entails (A, B); A entails (C, D). Scripted conditionals:
        # C|D,B = 0.5, D|B = 0.5, B = 0.8, so the root is 0.2.
        tree = branch("0", "H", [
            branch("0.0", "Claim A holds.", [leaf("0.0.0", "Claim C holds."),
                                             leaf("0.0.1", "Claim D holds.")]),
            leaf("0.1", "Claim B holds."),
        ])
        scores = {"0.0.0": 5, "0.0.1": 5, "0.1": 8}
        got, expected = run_infer(tree, lambda node, cond: scores[node.id])
        assert got == pytest.approx(0.2, abs=1e-12)
        assert got == expected
        assert tree.find("0.0").propagated_prob == pytest.approx(0.25, abs=1e-12)
        conds = dict(
            (node.id, cond) for node, cond in
            __import__("helpers").walk_conditioning_order(tree))
        assert conds["0.0.0"] == ("Claim B holds.", "Claim D holds.")
        assert conds["0.0.1"] == ("Claim B holds.",)

    def test_reverse_conditioning_flag(self):
        tree = branch("0", "Both halves hold.", [
            leaf("0.0", "The first half holds."),
            leaf("0.1", "The second half holds."),
        ])
        seen = {}

        def rubric(node, cond):
            seen[node.id] = cond
            return 5

        config = RunConfig(evidence_max=1, reverse_conditioning=True)
        run_infer(tree, rubric, config=config, reverse=True)
        assert seen["0.0"] == ()
        assert seen["0.1"] == ("The first half holds.",)

    def test_pruned_subtree_contributes_one(self):
        tree = branch("0", "Both halves hold.", [
            leaf("0.0", "The first half holds.", pruned=True),
            leaf("0.1", "The second half holds."),
        ])
        scores = {"0.1": 8}
        got, expected = run_infer(tree, lambda node, cond: scores[node.id])
        assert got == pytest.approx(0.8)
        assert got == expected
        assert tree.find("0.0").score_trace is None  # never scored

    def test_matches_oracle_on_random_trees(self):
        rng = random.Random(97)
        for _ in range(60):
            tree = random_tree(rng, max_depth=3, max_fanout=3, scored=False,
                               prune_prob=0.2)
            got, expected = run_infer(
                tree, lambda node, cond: rng_score(node, cond))
            assert got == pytest.approx(expected, abs=1e-12)
            assert 0.0 <= got <= 1.0


def rng_score(node, cond) -> int:
    # Deterministic pseudo-score tied to both the leaf and its conditioning,
    # so any deviation in conditioning order changes the expected prompt too.
    return (hash((node.claim.text, cond)) % 11 + 11) % 11


class TestAggregateMean:
    def test_three_leaves(self):
        tree = branch("0", "root", [leaf("0.0", "a", final=0.2),
                                    leaf("0.1", "b", final=0.9),
                                    leaf("0.2", "c", final=0.9)])
        assert aggregate_mean(tree) == pytest.approx(0.666667, abs=1e-6)

    def test_single_leaf(self):
        assert aggregate_mean(leaf("0", "a", final=0.4)) == 0.4

    def test_extremes(self):
        tree = branch("0", "root", [leaf("0.0", "a", final=0.0),
                                    leaf("0.1", "b", final=1.0)])
        assert aggregate_mean(tree) == 0.5

    def test_unscored_leaf_rejected(self):
        tree = branch("0", "root", [leaf("0.0", "a", final=0.2), leaf("0.1", "b")])
        with pytest.raises(ValueError, match="0.1"):
            aggregate_mean(tree)

    def test_bounded_by_leaf_range(self):
        rng = random.Random(5)
        for _ in range(50):
            finals = [rng.randint(0, 10) / 10 for _ in range(rng.randint(1, 6))]
            tree = branch("0", "root", [leaf(f"0.{i}", f"leaf {i}", final=f)
                                        for i, f in enumerate(finals)]) \
                if len(finals) > 1 else leaf("0", "leaf", final=finals[0])
            mean = aggregate_mean(tree)
            assert min(finals) <= mean <= max(finals)

    def test_geomean_zero_dominates(self):
        tree = branch("0", "root", [leaf("0.0", "a", final=0.0),
                                    leaf("0.1", "b", final=1.0)])
        assert aggregate_geomean(tree) == 0.0


OPTIONS = [
    ("A wedding is taking place.", [("The ceremony is a wedding.", 0.3)]),
    ("A funeral is taking place.", [("The ceremony is a funeral.", 0.8)]),
]


class TestJudge:
    def test_scripted_choice(self):
        registry = BackendRegistry.mock({judge_prompt(OPTIONS): "2"})
        chosen, rationale = judge(OPTIONS, registry)
        assert chosen == 1  # second option, zero-based
        assert rationale == "2"

    def test_single_option_rejected(self):
        with pytest.raises(ValueError):
            judge(OPTIONS[:1], BackendRegistry.mock({}))

    def test_out_of_range_response(self):
        five = OPTIONS + [(f"Option {i}.", [("x", 0.5)]) for i in range(3)]
        registry = BackendRegistry.mock({judge_prompt(five): "7"})
        with pytest.raises(ResponseFormatError, match="7"):
            judge(five, registry)

    def test_prompt_lists_scores(self):
        prompt = judge_prompt(OPTIONS)
        assert "OPTION 1: A wedding is taking place." in prompt
        assert "score 0.30" in prompt
        assert "score 0.80" in prompt


class TestArgmaxInvariance:
    def test_common_scaling_preserves_argmax(self):
        # With equal leaf counts per option, scaling every leaf score by a
        # common c <= 1/max multiplies every product by c^n.
        rng = random.Random(71)
        for _ in range(100):
            n_options, n_leaves = rng.randint(2, 5), rng.randint(1, 4)
            scores = [[rng.uniform(0.05, 1.0) for _ in range(n_leaves)]
                      for _ in range(n_options)]
            products = [prod(s) for s in scores]
            top = max(v for row in scores for v in row)
            c = rng.uniform(0.05, 1.0 / top)
            scaled = [prod(v * c for v in row) for row in scores]
            argmax = max(range(n_options), key=lambda i: (products[i], -i))
            argmax_scaled = max(range(n_options), key=lambda i: (scaled[i], -i))
            assert argmax == argmax_scaled


def prod(values) -> float:
    out = 1.0
    for v in values:
        out *= v
    return out
