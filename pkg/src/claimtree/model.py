"""Shared domain types, tree validation, and the canonical serialized forms.

Every other module (and the browser UI) consumes the types defined here.
Serialized field names are a stable contract: trees are one JSON document
per file, evidence banks are one JSON record per line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Mapping, Sequence

from .errors import DocumentError

TEXT = "text"
IMAGE = "image"
VIDEO = "video"
VIDEO_FRAME = "video-frame"
TRANSCRIPT = "transcript"

#: Span modalities; video sources ground their observations in single frames.
MODALITIES = (TEXT, IMAGE, VIDEO_FRAME, TRANSCRIPT)
SOURCE_MODALITIES = (TEXT, IMAGE, VIDEO, TRANSCRIPT)
#: Modalities whose span positions are measured in seconds.
TEMPORAL_MODALITIES = (VIDEO_FRAME, TRANSCRIPT)

AGGREGATIONS = ("product", "mean", "geomean", "judge")
EVIDENCE_LEVELS = ("base", "leaf")
ANCHOR_MODES = ("question", "summary")


def _check_prob(value: float, what: str) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not 0.0 <= value <= 1.0:
        raise ValueError(f"{what} must be a probability in [0, 1], got {value!r}")


@dataclass(frozen=True)
class Claim:
    """A natural-language statement; atomic claims are never decomposed further."""

    text: str
    atomic: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("claim text must be a non-empty string")
        object.__setattr__(self, "text", self.text.strip())


@dataclass(frozen=True)
class AdjustmentStep:
    """One incremental probability update tied to a presented evidence factor.

    ``factor_id`` is either an evidence factor id or a synthetic conditional
    claim id (``cond:N``) when sibling claims are injected as evidence.
    """

    factor_id: str
    explanation: str
    score: float

    def __post_init__(self) -> None:
        if not self.factor_id:
            raise ValueError("adjustment step needs a factor id")
        if not self.explanation or not self.explanation.strip():
            raise ValueError("adjustment step explanation must be non-empty")
        _check_prob(self.score, "adjustment score")


@dataclass(frozen=True)
class ScoreTrace:
    """An anchor score plus the ordered per-factor adjustments that produced the final score."""

    anchor_explanation: str
    anchor_score: float
    steps: tuple[AdjustmentStep, ...]
    final: float

    def __post_init__(self) -> None:
        _check_prob(self.anchor_score, "anchor score")
        _check_prob(self.final, "final score")
        object.__setattr__(self, "steps", tuple(self.steps))
        expected = self.steps[-1].score if self.steps else self.anchor_score
        if self.final != expected:
            raise ValueError(f"final score {self.final} must equal the last step score {expected}")

    @classmethod
    def build(cls, anchor_explanation: str, anchor_score: float,
              steps: Sequence[AdjustmentStep]) -> "ScoreTrace":
        final = steps[-1].score if steps else anchor_score
        return cls(anchor_explanation, anchor_score, tuple(steps), final)


@dataclass
class TreeNode:
    """One node of a decomposition tree.

    Structural fields (``id``, ``claim``, ``children``) are fixed after
    construction; ``score_trace``, ``propagated_prob`` and ``pruned`` are
    annotations written by inference and by human correction. Ids are
    deterministic path strings: root ``"0"``, children ``"0.0"``, ``"0.1"``...
    """

    id: str
    claim: Claim
    children: list["TreeNode"] = field(default_factory=list)
    score_trace: ScoreTrace | None = None
    propagated_prob: float | None = None
    pruned: bool = False

    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["TreeNode"]:
        """All nodes in document (pre-)order."""
        yield self
        for child in self.children:
            yield from child.walk()

    def find(self, node_id: str) -> "TreeNode | None":
        for node in self.walk():
            if node.id == node_id:
                return node
        return None


@dataclass(frozen=True)
class SourceSpan:
    """Where in a grounding source an observation came from.

    ``start``/``end`` are line indices for text sources and seconds for
    temporal ones; ``timestamp_label`` is only set on temporal spans when
    temporal enhancement is enabled.
    """

    source_id: str
    modality: str
    start: float
    end: float
    timestamp_label: str | None = None

    def __post_init__(self) -> None:
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        if not self.source_id:
            raise ValueError("span needs a source id")
        if not 0 <= self.start <= self.end:
            raise ValueError(f"span must satisfy 0 <= start <= end, got [{self.start}, {self.end}]")


@dataclass(frozen=True)
class EvidenceFactor:
    """One natural-language observation grounded in a source span."""

    id: str
    text: str
    span: SourceSpan
    relevance: float | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("evidence factor needs an id")
        if not self.text or not self.text.strip():
            raise ValueError("evidence factor text must be non-empty")


@dataclass(frozen=True)
class SourceRef:
    """Descriptor of a grounding source: text document, transcript, image or video."""

    id: str
    modality: str
    uri: str
    length: float

    def __post_init__(self) -> None:
        if self.modality not in SOURCE_MODALITIES:
            raise ValueError(f"unknown source modality {self.modality!r}")
        if self.length < 0:
            raise ValueError("source length must be non-negative")


@dataclass(frozen=True)
class EvidenceBank:
    """All observations extracted from the grounding sources."""

    factors: tuple[EvidenceFactor, ...]
    sources: tuple[SourceRef, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "sources", tuple(self.sources))
        by_id = {s.id: s for s in self.sources}
        if len(by_id) != len(self.sources):
            raise ValueError("duplicate source ids in bank")
        seen: set[str] = set()
        for factor in self.factors:
            if factor.id in seen:
                raise ValueError(f"duplicate factor id {factor.id!r}")
            seen.add(factor.id)
            source = by_id.get(factor.span.source_id)
            if source is None:
                raise ValueError(f"factor {factor.id!r} references unknown source {factor.span.source_id!r}")
            if factor.span.end > source.length:
                raise ValueError(
                    f"factor {factor.id!r} span ends at {factor.span.end}, "
                    f"beyond source length {source.length}")

    def __len__(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class FrameSamplingParams:
    """Piecewise-linear video frame budget: k1..k3 frame counts at duration breakpoints m1..m3."""

    k1: int = 1
    k2: int = 6
    k3: int = 10
    m1: float = 3.0
    m2: float = 20.0
    m3: float = 40.0

    def __post_init__(self) -> None:
        if not (1 <= self.k1 <= self.k2 <= self.k3):
            raise ValueError("frame counts must satisfy 1 <= k1 <= k2 <= k3")
        if not (0 <= self.m1 < self.m2 < self.m3):
            raise ValueError("duration breakpoints must satisfy 0 <= m1 < m2 < m3")


@dataclass(frozen=True)
class RunConfig:
    """The full configuration surface of one run.

    Field defaults follow the engine defaults; serialized documents use the
    short keys ``vb, db, fs, dm, em, te, el, ag`` plus the engine knobs
    (``tau``, ``theta``, ``window``, ``stride``...).
    """

    vision_backend: str | None = None
    decomposition_backend: str | None = None
    frame_sampling: FrameSamplingParams = FrameSamplingParams()
    decomposition_max: int = 3
    evidence_max: int = 3
    temporal_enhancement: bool = False
    evidence_level: str = "base"
    aggregation: str = "product"
    window: int = 8
    stride: int = 4
    tau: float = 0.9
    theta: float = 0.5
    rescale_rounds: int = 0
    anchor: str = "question"
    reverse_conditioning: bool = False
    multi_call_scoring: bool = False

    def __post_init__(self) -> None:
        if self.decomposition_max < 1:
            raise ValueError("decomposition_max must be >= 1")
        if self.evidence_max < 1:
            raise ValueError("evidence_max must be >= 1")
        if self.evidence_level not in EVIDENCE_LEVELS:
            raise ValueError(f"evidence_level must be one of {EVIDENCE_LEVELS}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if self.anchor not in ANCHOR_MODES:
            raise ValueError(f"anchor must be one of {ANCHOR_MODES}")
        if self.window < 1 or not 1 <= self.stride <= self.window:
            raise ValueError("window/stride must satisfy 1 <= stride <= window")
        _check_prob(self.tau, "tau")
        _check_prob(self.theta, "theta")
        if self.rescale_rounds < 0:
            raise ValueError("rescale_rounds must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        fs = self.frame_sampling
        return {
            "vb": self.vision_backend,
            "db": self.decomposition_backend,
            "fs": {"k1": fs.k1, "k2": fs.k2, "k3": fs.k3, "m1": fs.m1, "m2": fs.m2, "m3": fs.m3},
            "dm": self.decomposition_max,
            "em": self.evidence_max,
            "te": self.temporal_enhancement,
            "el": self.evidence_level,
            "ag": self.aggregation,
            "window": self.window,
            "stride": self.stride,
            "tau": self.tau,
            "theta": self.theta,
            "rescale_rounds": self.rescale_rounds,
            "anchor": self.anchor,
            "reverse_conditioning": self.reverse_conditioning,
            "multi_call_scoring": self.multi_call_scoring,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        def name(key: str) -> str | None:
            value = data.get(key)
            return value if isinstance(value, str) and value else None

        fs_raw = data.get("fs")
        if isinstance(fs_raw, Mapping):
            try:
                fs = FrameSamplingParams(
                    k1=int(fs_raw["k1"]), k2=int(fs_raw["k2"]), k3=int(fs_raw["k3"]),
                    m1=float(fs_raw["m1"]), m2=float(fs_raw["m2"]), m3=float(fs_raw["m3"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise DocumentError(f"fs: invalid frame sampling parameters ({exc})") from exc
        else:
            fs = FrameSamplingParams()
        try:
            return cls(
                vision_backend=name("vb"),
                decomposition_backend=name("db"),
                frame_sampling=fs,
                decomposition_max=int(data.get("dm") or 3),
                evidence_max=int(data.get("em") or 3),
                temporal_enhancement=bool(data.get("te", False)),
                evidence_level=str(data.get("el") or "base"),
                aggregation=str(data.get("ag") or "product"),
                window=int(data.get("window", 8)),
                stride=int(data.get("stride", 4)),
                tau=float(data.get("tau", 0.9)),
                theta=float(data.get("theta", 0.5)),
                rescale_rounds=int(data.get("rescale_rounds", 0)),
                anchor=str(data.get("anchor") or "question"),
                reverse_conditioning=bool(data.get("reverse_conditioning", False)),
                multi_call_scoring=bool(data.get("multi_call_scoring", False)),
            )
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"config: {exc}") from exc


def leaves(tree: TreeNode) -> list[TreeNode]:
    """Non-pruned leaf nodes in left-to-right document order."""
    return [node for node in tree.walk() if node.is_leaf() and not node.pruned]


def validate_tree(tree: TreeNode, config: RunConfig) -> list[str]:
    """Check every tree invariant; violations are returned as data, not raised."""
    violations: list[str] = []
    seen_ids: set[str] = set()

    def visit(node: TreeNode, depth: int) -> None:
        if node.id in seen_ids:
            violations.append(f"{node.id}: duplicate node id")
        seen_ids.add(node.id)
        if depth > config.decomposition_max:
            violations.append(f"{node.id}: depth {depth} exceeds decomposition max "
                              f"{config.decomposition_max}")
        if not node.claim.text.strip() or node.claim.text != node.claim.text.strip():
            violations.append(f"{node.id}: claim text must be trimmed and non-empty")
        if node.claim.atomic and node.children:
            violations.append(f"{node.id}: atomic claim has children")
        if node.propagated_prob is not None and not 0.0 <= node.propagated_prob <= 1.0:
            violations.append(f"{node.id}: propagated probability {node.propagated_prob} "
                              f"outside [0, 1]")
        trace = node.score_trace
        if trace is not None:
            for score, what in [(trace.anchor_score, "anchor"), (trace.final, "final"),
                                *((s.score, f"step {s.factor_id}") for s in trace.steps)]:
                if not 0.0 <= score <= 1.0:
                    violations.append(f"{node.id}: {what} score {score} outside [0, 1]")
            expected = trace.steps[-1].score if trace.steps else trace.anchor_score
            if trace.final != expected:
                violations.append(f"{node.id}: final score {trace.final} does not equal "
                                  f"last step score {expected}")
        for child in node.children:
            visit(child, depth + 1)

    visit(tree, 0)
    return violations


# --- canonical serialization -------------------------------------------------

def require_field(data: Mapping[str, Any], key: str, kinds: tuple[type, ...], path: str) -> Any:
    if key not in data:
        raise DocumentError(f"{path}.{key}: missing field")
    value = data[key]
    if not isinstance(value, kinds) or isinstance(value, bool) and bool not in kinds:
        names = "/".join(k.__name__ for k in kinds)
        raise DocumentError(f"{path}.{key}: expected {names}, got {type(value).__name__}")
    return value


def step_to_dict(step: AdjustmentStep) -> dict[str, Any]:
    return {"factor_id": step.factor_id, "explanation": step.explanation, "score": step.score}


def trace_to_dict(trace: ScoreTrace) -> dict[str, Any]:
    return {
        "anchor_explanation": trace.anchor_explanation,
        "anchor_score": trace.anchor_score,
        "steps": [step_to_dict(s) for s in trace.steps],
        "final": trace.final,
    }


def trace_from_dict(data: Mapping[str, Any], path: str = "score_trace") -> ScoreTrace:
    steps_raw = require_field(data, "steps", (list,), path)
    steps = []
    for i, raw in enumerate(steps_raw):
        step_path = f"{path}.steps[{i}]"
        if not isinstance(raw, Mapping):
            raise DocumentError(f"{step_path}: expected object")
        try:
            steps.append(AdjustmentStep(
                factor_id=require_field(raw, "factor_id", (str,), step_path),
                explanation=require_field(raw, "explanation", (str,), step_path),
                score=float(require_field(raw, "score", (int, float), step_path)),
            ))
        except ValueError as exc:
            raise DocumentError(f"{step_path}: {exc}") from exc
    try:
        return ScoreTrace(
            anchor_explanation=require_field(data, "anchor_explanation", (str,), path),
            anchor_score=float(require_field(data, "anchor_score", (int, float), path)),
            steps=tuple(steps),
            final=float(require_field(data, "final", (int, float), path)),
        )
    except ValueError as exc:
        raise DocumentError(f"{path}: {exc}") from exc


def tree_to_dict(node: TreeNode) -> dict[str, Any]:
    return {
        "id": node.id,
        "claim": {"text": node.claim.text, "atomic": node.claim.atomic},
        "children": [tree_to_dict(c) for c in node.children],
        "score_trace": trace_to_dict(node.score_trace) if node.score_trace else None,
        "propagated_prob": node.propagated_prob,
        "pruned": node.pruned,
    }


def tree_from_dict(data: Mapping[str, Any], path: str = "tree") -> TreeNode:
    if not isinstance(data, Mapping):
        raise DocumentError(f"{path}: expected object")
    claim_raw = require_field(data, "claim", (Mapping,), path)
    try:
        claim = Claim(
            text=require_field(claim_raw, "text", (str,), f"{path}.claim"),
            atomic=require_field(claim_raw, "atomic", (bool,), f"{path}.claim"),
        )
    except ValueError as exc:
        raise DocumentError(f"{path}.claim: {exc}") from exc
    children_raw = require_field(data, "children", (list,), path)
    node = TreeNode(id=require_field(data, "id", (str,), path), claim=claim)
    trace_raw = data.get("score_trace")
    if trace_raw is not None:
        if not isinstance(trace_raw, Mapping):
            raise DocumentError(f"{path}.score_trace: expected object or null")
        node.score_trace = trace_from_dict(trace_raw, f"{path}.score_trace")
    prob = data.get("propagated_prob")
    if prob is not None:
        if not isinstance(prob, (int, float)) or isinstance(prob, bool) or not 0 <= prob <= 1:
            raise DocumentError(f"{path}.propagated_prob: expected probability in [0, 1]")
        node.propagated_prob = float(prob)
    node.pruned = bool(data.get("pruned", False))
    node.children = [tree_from_dict(c, f"{path}.children[{i}]") for i, c in enumerate(children_raw)]
    return node


def dumps_canonical(data: Any) -> str:
    """Deterministic JSON rendering used for every document the engine writes."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def tree_to_json(node: TreeNode) -> str:
    return dumps_canonical(tree_to_dict(node))


def tree_from_json(text: str) -> TreeNode:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"tree: not valid JSON ({exc})") from exc
    if not isinstance(data, Mapping):
        raise DocumentError("tree: document root must be an object")
    return tree_from_dict(data)


def roundtrip(tree: TreeNode) -> TreeNode:
    """Serialize then deserialize; the result is structurally identical to the input."""
    return tree_from_json(tree_to_json(tree))


def factor_to_dict(factor: EvidenceFactor) -> dict[str, Any]:
    return {
        "id": factor.id,
        "text": factor.text,
        "source_id": factor.span.source_id,
        "modality": factor.span.modality,
        "start": factor.span.start,
        "end": factor.span.end,
        "timestamp_label": factor.span.timestamp_label,
    }


def factor_from_dict(data: Mapping[str, Any], path: str = "factor") -> EvidenceFactor:
    label = data.get("timestamp_label")
    if label is not None and not isinstance(label, str):
        raise DocumentError(f"{path}.timestamp_label: expected string or null")
    try:
        span = SourceSpan(
            source_id=require_field(data, "source_id", (str,), path),
            modality=require_field(data, "modality", (str,), path),
            start=float(require_field(data, "start", (int, float), path)),
            end=float(require_field(data, "end", (int, float), path)),
            timestamp_label=label,
        )
        return EvidenceFactor(
            id=require_field(data, "id", (str,), path),
            text=require_field(data, "text", (str,), path),
            span=span,
        )
    except ValueError as exc:
        raise DocumentError(f"{path}: {exc}") from exc


def bank_to_dict(bank: EvidenceBank) -> dict[str, Any]:
    return {
        "sources": [
            {"id": s.id, "modality": s.modality, "uri": s.uri, "length": s.length}
            for s in bank.sources
        ],
        "factors": [factor_to_dict(f) for f in bank.factors],
    }


def bank_from_dict(data: Mapping[str, Any], path: str = "bank") -> EvidenceBank:
    sources_raw = require_field(data, "sources", (list,), path)
    sources = []
    for i, raw in enumerate(sources_raw):
        src_path = f"{path}.sources[{i}]"
        if not isinstance(raw, Mapping):
            raise DocumentError(f"{src_path}: expected object")
        try:
            sources.append(SourceRef(
                id=require_field(raw, "id", (str,), src_path),
                modality=require_field(raw, "modality", (str,), src_path),
                uri=require_field(raw, "uri", (str,), src_path),
                length=float(require_field(raw, "length", (int, float), src_path)),
            ))
        except ValueError as exc:
            raise DocumentError(f"{src_path}: {exc}") from exc
    factors_raw = require_field(data, "factors", (list,), path)
    factors = [factor_from_dict(raw, f"{path}.factors[{i}]") for i, raw in enumerate(factors_raw)]
    try:
        return EvidenceBank(factors=tuple(factors), sources=tuple(sources))
    except ValueError as exc:
        raise DocumentError(f"{path}: {exc}") from exc


def bank_to_jsonl(bank: EvidenceBank) -> str:
    """Bank file format: a sources header line, then one factor record per line."""
    lines = [json.dumps({"sources": bank_to_dict(bank)["sources"]},
                        sort_keys=True, ensure_ascii=False)]
    lines += [json.dumps(factor_to_dict(f), sort_keys=True, ensure_ascii=False)
              for f in bank.factors]
    return "\n".join(lines) + "\n"


def bank_from_jsonl(text: str) -> EvidenceBank:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DocumentError("bank: empty document")
    records = []
    for i, line in enumerate(lines):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DocumentError(f"bank line {i + 1}: not valid JSON ({exc})") from exc
    header = records[0]
    if not isinstance(header, Mapping) or "sources" not in header:
        raise DocumentError("bank line 1: expected a sources header record")
    return bank_from_dict({"sources": header["sources"], "factors": records[1:]})


def with_relevance(factor: EvidenceFactor, score: float) -> EvidenceFactor:
    return replace(factor, relevance=score)
