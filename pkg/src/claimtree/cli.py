"""Command-line entry point: build banks, score hypotheses, run MCQ episodes, serve.

The config file mirrors the run-configuration surface (``vb, db, fs, dm, em,
te, el, ag`` plus engine knobs) and adds a ``backends`` section describing how
each named backend is constructed::

    {
      "db": "mock", "dm": 2, "em": 3, "ag": "mean",
      "backends": {
        "mock":   {"kind": "mock", "script": "script.json",
                   "roles": ["chat", "vision", "relevance", "entailment"]},
        "remote": {"kind": "http", "url": "https://...", "auth_env": "CLAIMTREE_TOKEN",
                   "roles": ["chat"]}
      }
    }

Mock script files map prompt hashes to response text under ``"chat"`` and may
carry scripted ``"entailment"`` pairs and ``"relevance"`` scores.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

from .backends import (
    BackendRegistry, MockChatBackend, MockEntailment, RemoteChatBackend,
    RemoteScoring, ScriptedRelevance,
)
from .decompose import build_tree
from .errors import EngineError
from .evidence import CommandFrameGrabber, FrameGrabber, build_bank
from .infer import infer
from .mcq import answer_mcq, rescale_evidence, run_from_dict, run_to_dict
from .model import (
    Claim, RunConfig, SourceRef, bank_from_jsonl, bank_to_dict, bank_to_jsonl,
    dumps_canonical, tree_to_dict,
)
from .scoring import make_anchor_summary


class CliError(Exception):
    """Fatal CLI failure; the message goes to stderr and the exit code is 1."""


def _load_json(path: str | Path, what: str) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"{what} {path} must be a JSON object")
    return data


def load_config(path: str | Path) -> tuple[RunConfig, dict[str, Any]]:
    doc = _load_json(path, "config")
    try:
        return RunConfig.from_dict(doc), doc
    except EngineError as exc:
        raise CliError(f"config {path}: {exc}") from exc


def _mock_script(path: str | Path) -> dict[str, Any]:
    data = _load_json(path, "backend script")
    if "chat" not in data and all(isinstance(v, str) for v in data.values()):
        data = {"chat": data}
    return data


def build_registry(config_doc: Mapping[str, Any], base_dir: Path,
                   script_override: str | None = None) -> BackendRegistry:
    """Construct the backend registry described by the config's backends section."""
    registry = BackendRegistry()
    specs = config_doc.get("backends", {})
    if not isinstance(specs, Mapping):
        raise CliError("config backends section must be an object")
    for name, spec in specs.items():
        if not isinstance(spec, Mapping):
            raise CliError(f"backend {name!r}: definition must be an object")
        kind = spec.get("kind")
        roles = [r for r in spec.get("roles", ["chat"])]
        chat_roles = tuple(r for r in roles if r in ("chat", "vision"))
        if kind == "mock":
            script = {}
            if script_override:
                script = _mock_script(Path(script_override))
            elif spec.get("script"):
                resolved = Path(spec["script"])
                if not resolved.is_absolute():
                    resolved = base_dir / resolved
                script = _mock_script(resolved)
            registry.register(name, MockChatBackend(script.get("chat", {})), chat_roles)
            if "entailment" in roles:
                table = {(e["premise"], e["hypothesis"]): float(e["score"])
                         for e in script.get("entailment", [])}
                registry.set_entailment(MockEntailment(table))
            if "relevance" in roles and isinstance(script.get("relevance"), Mapping):
                registry.set_relevance(ScriptedRelevance(script["relevance"]))
        elif kind == "http":
            backend = RemoteChatBackend(spec["url"], spec.get("auth_env"))
            registry.register(name, backend, chat_roles)
        elif kind == "http-scoring":
            scorer = RemoteScoring(spec["url"], spec.get("auth_env"))
            if "relevance" in roles:
                registry.set_relevance(scorer)
            if "entailment" in roles:
                registry.set_entailment(scorer)
        else:
            raise CliError(f"backend {name!r}: unknown kind {kind!r}")
    return registry


def _frame_grabber(config_doc: Mapping[str, Any], base_dir: Path) -> FrameGrabber | None:
    command = config_doc.get("frame_grabber")
    if not command:
        return None
    return CommandFrameGrabber(str(command), base_dir)


def load_manifest(path: str | Path) -> tuple[list[SourceRef], str | None]:
    doc = _load_json(path, "manifest")
    raw_sources = doc.get("sources")
    if not isinstance(raw_sources, list) or not raw_sources:
        raise CliError(f"manifest {path}: no sources")
    base = Path(path).parent
    sources = []
    for i, raw in enumerate(raw_sources):
        try:
            uri = str(raw["uri"])
            resolved = uri if "://" in uri or Path(uri).is_absolute() else str(base / uri)
            sources.append(SourceRef(id=str(raw["id"]), modality=str(raw["modality"]),
                                     uri=resolved, length=float(raw["length"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"manifest {path} sources[{i}]: {exc}") from exc
    query = doc.get("query")
    return sources, str(query) if query is not None else None


def cmd_bank(args: argparse.Namespace) -> int:
    config, config_doc = load_config(args.config)
    registry = build_registry(config_doc, Path(args.config).parent, args.backend_script)
    sources, manifest_query = load_manifest(args.manifest)
    query = args.query or manifest_query or ""
    if not query:
        raise CliError("no extraction query: pass --query or put 'query' in the manifest")
    warnings: list[str] = []
    bank = build_bank(sources, query, config, registry,
                      _frame_grabber(config_doc, Path(args.config).parent),
                      warnings=warnings)
    Path(args.out).write_text(bank_to_jsonl(bank), encoding="utf-8")
    per_source = {s.id: 0 for s in sources}
    for factor in bank.factors:
        per_source[factor.span.source_id] += 1
    print(f"wrote {len(bank.factors)} factors from {len(sources)} sources to {args.out}")
    for source_id, count in per_source.items():
        print(f"  {source_id}: {count}")
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    config, config_doc = load_config(args.config)
    registry = build_registry(config_doc, Path(args.config).parent, args.backend_script)
    try:
        bank = bank_from_jsonl(Path(args.bank).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read bank {args.bank}: {exc}") from exc
    tree = build_tree(Claim(text=args.hypothesis), config, registry)
    anchor = make_anchor_summary([f.text for f in bank.factors], registry,
                                 provided_context=args.context)
    probability = infer(tree, bank, [], anchor, config, registry)
    doc = {
        "kind": "tree",
        "revision": 0,
        "config": config.to_dict(),
        "tree": tree_to_dict(tree),
        "root_prob": probability,
        "bank": bank_to_dict(bank),
        "anchor_context": anchor,
        "counterfactual": None,
        "overrides": {},
    }
    if args.out:
        Path(args.out).write_text(dumps_canonical(doc), encoding="utf-8")
    else:
        print(dumps_canonical(doc), end="")
    print(f"{probability:.4f}")
    return 0


def cmd_mcq(args: argparse.Namespace) -> int:
    config, config_doc = load_config(args.config)
    base_dir = Path(args.config).parent
    registry = build_registry(config_doc, base_dir, args.backend_script)
    episode = _load_json(args.input, "mcq input")
    question = episode.get("question")
    options = episode.get("options")
    if not isinstance(question, str) or not question.strip():
        raise CliError(f"mcq input {args.input}: missing question")
    if not isinstance(options, list) or len(options) < 2:
        raise CliError(f"mcq input {args.input}: need at least two options")
    input_dir = Path(args.input).parent
    if "bank" in episode:
        bank_path = Path(episode["bank"])
        if not bank_path.is_absolute():
            bank_path = input_dir / bank_path
        try:
            bank_or_sources: Any = bank_from_jsonl(bank_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read bank {bank_path}: {exc}") from exc
        sources: list[SourceRef] = []
    else:
        raw_sources = episode.get("sources")
        if not isinstance(raw_sources, list) or not raw_sources:
            raise CliError(f"mcq input {args.input}: needs 'sources' or 'bank'")
        sources = []
        for i, raw in enumerate(raw_sources):
            try:
                uri = str(raw["uri"])
                resolved = uri if "://" in uri or Path(uri).is_absolute() \
                    else str(input_dir / uri)
                sources.append(SourceRef(id=str(raw["id"]), modality=str(raw["modality"]),
                                         uri=resolved, length=float(raw["length"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise CliError(f"mcq input sources[{i}]: {exc}") from exc
        bank_or_sources = sources
    grabber = _frame_grabber(config_doc, base_dir)
    warnings: list[str] = []
    run = answer_mcq(question, [str(o) for o in options], bank_or_sources, config,
                     registry, grabber, warnings)
    if config.rescale_rounds > 0 and sources:
        run = rescale_evidence(run, sources, config.theta, config, registry,
                               max_rounds=config.rescale_rounds,
                               frame_grabber=grabber, warnings=warnings)
    doc = run_to_dict(run)
    if args.out:
        Path(args.out).write_text(dumps_canonical(doc), encoding="utf-8")
    else:
        print(dumps_canonical(doc), end="")
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(run.chosen)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    registry = None
    if args.config:
        _, config_doc = load_config(args.config)
        if config_doc.get("backends"):
            registry = build_registry(config_doc, Path(args.config).parent,
                                      args.backend_script)
    app = create_app(args.state_dir, registry=registry, static_dir=args.static)
    host, _, port = args.address.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="claimtree")
    sub = parser.add_subparsers(dest="command", required=True)

    bank = sub.add_parser("bank", help="extract an evidence bank from a source manifest")
    bank.add_argument("--manifest", required=True)
    bank.add_argument("--config", required=True)
    bank.add_argument("--out", required=True)
    bank.add_argument("--query", help="extraction question/claim context")
    bank.add_argument("--backend-script", help="override mock script file")
    bank.set_defaults(fn=cmd_bank)

    score = sub.add_parser("score", help="decompose and score a single hypothesis")
    score.add_argument("hypothesis")
    score.add_argument("--bank", required=True)
    score.add_argument("--config", required=True)
    score.add_argument("--out")
    score.add_argument("--context", help="anchor context used verbatim")
    score.add_argument("--backend-script")
    score.set_defaults(fn=cmd_score)

    mcq = sub.add_parser("mcq", help="answer a multiple-choice episode")
    mcq.add_argument("--input", required=True)
    mcq.add_argument("--config", required=True)
    mcq.add_argument("--out")
    mcq.add_argument("--backend-script")
    mcq.set_defaults(fn=cmd_mcq)

    serve = sub.add_parser("serve", help="serve stored runs for inspection and correction")
    serve.add_argument("--address", default="127.0.0.1:8351")
    serve.add_argument("--state-dir", required=True)
    serve.add_argument("--config")
    serve.add_argument("--static", help="directory of UI assets to serve at /ui")
    serve.add_argument("--backend-script")
    serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
