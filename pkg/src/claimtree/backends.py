"""Pluggable model-capability backends and the registry that wires them to roles.

Roles: ``chat`` (completion), ``vision`` (captioning over image refs),
``relevance`` (query/candidate scoring) and ``entailment``. All network I/O
in the engine lives in this module; every other module only sees these
interfaces, and the whole test suite runs on the deterministic mocks.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import requests

from .errors import BackendError, MockScriptMiss, TransportError

CHAT = "chat"
VISION = "vision"
RELEVANCE = "relevance"
ENTAILMENT = "entailment"
ROLES = (CHAT, VISION, RELEVANCE, ENTAILMENT)


@dataclass(frozen=True)
class ChatRequest:
    """A single-turn completion request, optionally with image attachments."""

    prompt: str
    image_refs: tuple[str, ...] = ()
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        object.__setattr__(self, "image_refs", tuple(self.image_refs))


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class RelevanceBackend(Protocol):
    def scores(self, query: str, candidates: Sequence[str]) -> list[float]: ...


class EntailmentBackend(Protocol):
    def entailment(self, premise: str, hypothesis: str) -> float: ...


def script_key(prompt: str, image_refs: Sequence[str] = ()) -> str:
    """Stable script-file key: hash of the prompt plus any attached image refs."""
    payload = "\x00".join([prompt, *image_refs])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class MockChatBackend:
    """Scripted chat/vision backend: a pure function from request to response.

    The script maps ``script_key(prompt, image_refs)`` to response text; an
    unscripted request raises :class:`MockScriptMiss`, which means the test
    fixture has a gap. Instances are immutable and safe to share.
    """

    def __init__(self, script: Mapping[str, str] | None = None) -> None:
        self._script = dict(script or {})
        self.calls = 0

    @classmethod
    def from_prompts(cls, prompts: Mapping[str, str]) -> "MockChatBackend":
        return cls({script_key(p): r for p, r in prompts.items()})

    @classmethod
    def from_file(cls, path: str | Path) -> "MockChatBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data.get("chat", data) if isinstance(data, dict) else {})

    def add(self, prompt: str, response: str, image_refs: Sequence[str] = ()) -> None:
        self._script[script_key(prompt, image_refs)] = response

    def complete(self, request: ChatRequest) -> str:
        self.calls += 1
        key = script_key(request.prompt, request.image_refs)
        if key not in self._script:
            head = request.prompt[:80].replace("\n", " ")
            raise MockScriptMiss(f"no scripted response for prompt {key[:12]}... ({head!r})")
        return self._script[key]


class RemoteChatBackend:
    """Minimal HTTP chat-completion client.

    Wire contract: POST ``{"prompt", "images", "temperature", "max_tokens"}``
    to the configured URL, response body ``{"text": ...}``. A bearer token is
    read from the environment variable named by ``auth_env``.
    """

    def __init__(self, url: str, auth_env: str | None = None, timeout: float = 120.0) -> None:
        self.url = url
        self.auth_env = auth_env
        self.timeout = timeout

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "prompt": request.prompt,
            "images": list(request.image_refs),
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        try:
            resp = requests.post(self.url, json=payload, headers=self._headers(),
                                 timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            raise TransportError(f"chat backend at {self.url}: {exc}") from exc
        if not isinstance(data, dict) or not isinstance(data.get("text"), str):
            raise BackendError(f"chat backend at {self.url}: response missing 'text'")
        return data["text"]


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> frozenset[str]:
    return frozenset(_TOKEN_RE.findall(text.lower()))


class LexicalRelevance:
    """Token-overlap Jaccard similarity; the deterministic fallback scorer."""

    def scores(self, query: str, candidates: Sequence[str]) -> list[float]:
        if not candidates:
            raise ValueError("candidate list must be non-empty")
        q = _tokens(query)
        out = []
        for cand in candidates:
            c = _tokens(cand)
            union = q | c
            out.append(len(q & c) / len(union) if union else 0.0)
        return out


class ScriptedRelevance:
    """Relevance mock: scores looked up per candidate text, defaulting to 0."""

    def __init__(self, table: Mapping[str, float]) -> None:
        self._table = dict(table)

    def scores(self, query: str, candidates: Sequence[str]) -> list[float]:
        if not candidates:
            raise ValueError("candidate list must be non-empty")
        return [float(self._table.get(c, 0.0)) for c in candidates]


class RemoteScoring:
    """Relevance/entailment served over HTTP: POST {query, candidates} -> {scores}."""

    def __init__(self, url: str, auth_env: str | None = None, timeout: float = 60.0) -> None:
        self.url = url
        self.auth_env = auth_env
        self.timeout = timeout

    def scores(self, query: str, candidates: Sequence[str]) -> list[float]:
        if not candidates:
            raise ValueError("candidate list must be non-empty")
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        try:
            resp = requests.post(self.url, json={"query": query, "candidates": list(candidates)},
                                 headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            raise TransportError(f"scoring backend at {self.url}: {exc}") from exc
        scores = data.get("scores") if isinstance(data, dict) else None
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise BackendError(f"scoring backend at {self.url}: malformed 'scores'")
        return [float(s) for s in scores]

    def entailment(self, premise: str, hypothesis: str) -> float:
        if not premise or not hypothesis:
            raise ValueError("premise and hypothesis must be non-empty")
        return self.scores(premise, [hypothesis])[0]


class MockEntailment:
    """Entailment mock: scripted (premise, hypothesis) pairs.

    Unscripted pairs fall back to the reflexive rule: 1.0 when premise and
    hypothesis are equal, otherwise 0.0.
    """

    def __init__(self, table: Mapping[tuple[str, str], float] | None = None) -> None:
        self._table = dict(table or {})

    def entailment(self, premise: str, hypothesis: str) -> float:
        if not premise or not hypothesis:
            raise ValueError("premise and hypothesis must be non-empty")
        if (premise, hypothesis) in self._table:
            return float(self._table[(premise, hypothesis)])
        return 1.0 if premise == hypothesis else 0.0


class BackendRegistry:
    """Named backends plus role bindings.

    A run config refers to backends by name (``vb``/``db``); the remaining
    roles are bound directly. ``relevance`` falls back to the lexical scorer
    when nothing is bound.
    """

    def __init__(self) -> None:
        self._named: dict[str, ChatBackend] = {}
        self._roles: dict[str, str] = {}
        self._relevance: RelevanceBackend | None = None
        self._entailment: EntailmentBackend | None = None
        self._lock = threading.Lock()

    def register(self, name: str, backend: ChatBackend, roles: Iterable[str] = ()) -> None:
        with self._lock:
            self._named[name] = backend
            for role in roles:
                if role not in (CHAT, VISION):
                    raise BackendError(f"named chat backends cannot serve role {role!r}")
                self._roles[role] = name

    def set_relevance(self, backend: RelevanceBackend) -> None:
        self._relevance = backend

    def set_entailment(self, backend: EntailmentBackend) -> None:
        self._entailment = backend

    def resolve(self, name: str) -> ChatBackend:
        try:
            return self._named[name]
        except KeyError:
            raise BackendError(f"no backend named {name!r} is registered") from None

    def chat_backend(self, name: str | None = None) -> ChatBackend:
        """The named backend if given, else whatever is bound to the chat role."""
        if name is not None:
            return self.resolve(name)
        bound = self._roles.get(CHAT)
        if bound is None:
            raise BackendError("no chat backend bound")
        return self._named[bound]

    def vision_backend(self, name: str | None = None) -> ChatBackend:
        if name is not None:
            return self.resolve(name)
        bound = self._roles.get(VISION)
        if bound is None:
            raise BackendError("no vision backend bound")
        return self._named[bound]

    def relevance(self) -> RelevanceBackend:
        return self._relevance if self._relevance is not None else LexicalRelevance()

    def entailment(self) -> EntailmentBackend:
        if self._entailment is None:
            raise BackendError("no entailment backend bound")
        return self._entailment

    @classmethod
    def mock(cls, prompts: Mapping[str, str] | None = None,
             entailment_table: Mapping[tuple[str, str], float] | None = None,
             relevance_table: Mapping[str, float] | None = None,
             name: str = "mock") -> "BackendRegistry":
        """A registry resolving every role deterministically, for tests."""
        registry = cls()
        registry.register(name, MockChatBackend.from_prompts(prompts or {}), roles=(CHAT, VISION))
        registry.set_entailment(MockEntailment(entailment_table))
        if relevance_table is not None:
            registry.set_relevance(ScriptedRelevance(relevance_table))
        return registry

    def check_config_names(self, *names: str | None) -> list[str]:
        """Violation strings for any configured backend name that does not resolve."""
        problems = []
        for name in names:
            if name is not None and name not in self._named:
                problems.append(f"backend name {name!r} does not resolve")
        return problems
