"""Serve mode: inspect and correct stored runs over HTTP.

Run documents live as JSON files in a state directory. Humans (via the
browser UI) can override leaf scores and toggle pruning; ``repropagate``
recomputes every propagated probability and the option ranking from the
current leaf scores with no backend traffic, while ``rescore`` is a full
re-inference through the configured backends. Every mutation bumps the
document's ``revision`` and is persisted before the response returns.

Node references: tree-kind runs address nodes by node id (``0.1``);
MCQ runs qualify with the tree index (``1:0.1``).
"""

from __future__ import annotations

import json
import math
import threading
from collections import defaultdict
from pathlib import Path
from typing import Any, Callable

from fastapi import Body, FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles

from .backends import BackendRegistry
from .errors import DocumentError, EngineError
from .infer import infer, judge
from .model import (
    RunConfig, TreeNode, bank_from_dict, dumps_canonical, leaves,
    tree_from_dict, tree_to_dict,
)


class RunStore:
    """Durable store of run documents; one JSON file per run id."""

    def __init__(self, state_dir: str | Path) -> None:
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._guard = threading.Lock()

    def lock(self, run_id: str) -> threading.Lock:
        with self._guard:
            return self._locks[run_id]

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.state_dir.glob("*.json"))

    def load(self, run_id: str) -> dict[str, Any]:
        path = self.state_dir / f"{run_id}.json"
        if not path.is_file():
            raise KeyError(run_id)
        return json.loads(path.read_text(encoding="utf-8"))

    def save(self, run_id: str, doc: dict[str, Any]) -> None:
        path = self.state_dir / f"{run_id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(dumps_canonical(doc), encoding="utf-8")
        tmp.replace(path)


def _doc_trees(doc: dict[str, Any]) -> list[tuple[str, TreeNode]]:
    """(override-key prefix, tree) pairs for either document kind."""
    if doc.get("kind") == "mcq":
        return [(f"{i}:", tree_from_dict(raw, f"trees[{i}]"))
                for i, raw in enumerate(doc.get("trees", []))]
    return [("", tree_from_dict(doc["tree"], "tree"))]


def _store_trees(doc: dict[str, Any], trees: list[tuple[str, TreeNode]]) -> None:
    if doc.get("kind") == "mcq":
        doc["trees"] = [tree_to_dict(tree) for _, tree in trees]
    else:
        doc["tree"] = tree_to_dict(trees[0][1])


def _find_node(trees: list[tuple[str, TreeNode]], ref: str) -> TreeNode | None:
    for prefix, tree in trees:
        if prefix:
            if not ref.startswith(prefix):
                continue
            node_id = ref[len(prefix):]
        else:
            node_id = ref
        found = tree.find(node_id)
        if found is not None:
            return found
    return None


def _effective_score(node: TreeNode, key: str, overrides: dict[str, float]) -> float:
    if key in overrides:
        return float(overrides[key])
    if node.score_trace is not None:
        return node.score_trace.final
    raise ValueError(f"leaf {key or node.id} has neither a trace nor an override")


def _propagate(node: TreeNode, prefix: str, overrides: dict[str, float]) -> float | None:
    """Product over non-pruned leaves below ``node``; None when node is pruned."""
    if node.pruned:
        return None
    if node.is_leaf():
        value = _effective_score(node, f"{prefix}{node.id}", overrides)
        node.propagated_prob = value
        return value
    product = 1.0
    for child in node.children:
        value = _propagate(child, prefix, overrides)
        if value is not None:
            product *= value
    node.propagated_prob = product
    return product


def _tree_score(tree: TreeNode, prefix: str, overrides: dict[str, float],
                aggregation: str) -> float:
    unpruned = leaves(tree)
    if not unpruned:
        raise ValueError("tree has no unpruned leaves")
    finals = [_effective_score(leaf, f"{prefix}{leaf.id}", overrides) for leaf in unpruned]
    if aggregation == "product":
        root = tree.propagated_prob
        return root if root is not None else 1.0
    if aggregation == "geomean":
        if any(f == 0.0 for f in finals):
            return 0.0
        return math.exp(sum(math.log(f) for f in finals) / len(finals))
    return sum(finals) / len(finals)


def repropagate_document(doc: dict[str, Any]) -> None:
    """Recompute propagated probabilities and aggregates from current leaf scores.

    Pure arithmetic over the stored document: no backend is ever consulted.
    """
    overrides = {k: float(v) for k, v in doc.get("overrides", {}).items()}
    trees = _doc_trees(doc)
    for prefix, tree in trees:
        _propagate(tree, prefix, overrides)
    if doc.get("kind") == "mcq":
        config = RunConfig.from_dict(doc.get("config", {}))
        aggregation = "mean" if config.aggregation == "judge" else config.aggregation
        scores = [_tree_score(tree, prefix, overrides, aggregation)
                  for prefix, tree in trees]
        doc["option_scores"] = scores
        if config.aggregation != "judge":
            doc["chosen"] = max(range(len(scores)), key=lambda i: (scores[i], -i))
    else:
        root = trees[0][1].propagated_prob
        doc["root_prob"] = root if root is not None else 1.0
    _store_trees(doc, trees)


def rescore_document(doc: dict[str, Any], registry: BackendRegistry) -> None:
    """Full re-inference of every tree against the latest evidence round."""
    config = RunConfig.from_dict(doc.get("config", {}))
    trees = _doc_trees(doc)
    if doc.get("kind") == "mcq":
        rounds = doc.get("rounds", [])
        if not rounds:
            raise DocumentError("run has no evidence rounds to rescore against")
        bank = bank_from_dict(rounds[-1], "rounds[-1]")
    else:
        bank = bank_from_dict(doc["bank"], "bank")
    anchor = doc.get("anchor_context", "")
    counterfactual = doc.get("counterfactual") or None
    for _, tree in trees:
        infer(tree, bank, [], anchor, config, registry,
              counterfactual_context=counterfactual)
    if doc.get("kind") == "mcq" and config.aggregation == "judge":
        options = [(tree.claim.text,
                    [(leaf.claim.text, leaf.score_trace.final) for leaf in leaves(tree)])
                   for _, tree in trees]
        chosen, rationale = judge(options, registry)
        doc["chosen"] = chosen
        doc["judge_rationale"] = rationale
    _store_trees(doc, trees)
    # Propagated values and the ranking are then rebuilt so stored human
    # overrides keep outranking the fresh model traces.
    repropagate_document(doc)


def create_app(state_dir: str | Path, registry: BackendRegistry | None = None,
               static_dir: str | Path | None = None,
               registry_factory: Callable[[dict[str, Any]], BackendRegistry] | None = None,
               ) -> FastAPI:
    store = RunStore(state_dir)
    app = FastAPI(title="claimtree serve")

    def get_doc(run_id: str) -> dict[str, Any]:
        try:
            return store.load(run_id)
        except (KeyError, json.JSONDecodeError):
            raise HTTPException(status_code=404, detail=f"run {run_id!r} not found")

    def resolve_registry(doc: dict[str, Any]) -> BackendRegistry:
        if registry is not None:
            return registry
        if registry_factory is not None:
            return registry_factory(doc)
        raise HTTPException(status_code=400, detail="no backends configured for rescoring")

    @app.get("/runs")
    def list_runs() -> dict[str, Any]:
        entries = []
        for run_id in store.ids():
            try:
                doc = store.load(run_id)
            except (KeyError, json.JSONDecodeError):
                continue
            entries.append({"id": run_id, "kind": doc.get("kind"),
                            "revision": doc.get("revision", 0)})
        return {"runs": entries}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict[str, Any]:
        return get_doc(run_id)

    def mutate(run_id: str, fn: Callable[[dict[str, Any]], None]) -> dict[str, Any]:
        with store.lock(run_id):
            doc = get_doc(run_id)
            try:
                fn(doc)
            except (ValueError, DocumentError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            except EngineError as exc:
                raise HTTPException(status_code=502, detail=str(exc))
            doc["revision"] = int(doc.get("revision", 0)) + 1
            store.save(run_id, doc)
            return doc

    @app.post("/runs/{run_id}/leaves/{leaf_ref}/score")
    def set_score(run_id: str, leaf_ref: str,
                  payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        score = payload.get("score")
        if not isinstance(score, (int, float)) or isinstance(score, bool) \
                or not 0.0 <= float(score) <= 1.0:
            raise HTTPException(status_code=400, detail="score must be a number in [0, 1]")

        def apply(doc: dict[str, Any]) -> None:
            node = _find_node(_doc_trees(doc), leaf_ref)
            if node is None or not node.is_leaf():
                raise HTTPException(status_code=404, detail=f"leaf {leaf_ref!r} not found")
            doc.setdefault("overrides", {})[leaf_ref] = float(score)

        return mutate(run_id, apply)

    @app.post("/runs/{run_id}/nodes/{node_ref}/prune")
    def set_pruned(run_id: str, node_ref: str,
                   payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        pruned = payload.get("pruned")
        if not isinstance(pruned, bool):
            raise HTTPException(status_code=400, detail="pruned must be a boolean")

        def apply(doc: dict[str, Any]) -> None:
            trees = _doc_trees(doc)
            node = _find_node(trees, node_ref)
            if node is None:
                raise HTTPException(status_code=404, detail=f"node {node_ref!r} not found")
            node.pruned = pruned
            _store_trees(doc, trees)

        return mutate(run_id, apply)

    @app.post("/runs/{run_id}/repropagate")
    def repropagate(run_id: str) -> dict[str, Any]:
        return mutate(run_id, repropagate_document)

    @app.post("/runs/{run_id}/rescore")
    def rescore(run_id: str) -> dict[str, Any]:
        def apply(doc: dict[str, Any]) -> None:
            rescore_document(doc, resolve_registry(doc))

        return mutate(run_id, apply)

    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
