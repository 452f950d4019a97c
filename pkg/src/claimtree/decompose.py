"""Recursive claim decomposition into a tree of jointly entailing sub-claims."""

from __future__ import annotations

import logging
import re

from . import templates
from .backends import BackendRegistry, ChatRequest
from .errors import BackendError, ResponseFormatError
from .model import Claim, RunConfig, TreeNode

log = logging.getLogger(__name__)

_ITEM_RE = re.compile(r"\(\s*(\d+)\s*\)")
_QUOTES = "\"'“”‘’"


def strip_quotes(text: str) -> str:
    text = text.strip()
    while len(text) >= 2 and text[0] in _QUOTES and text[-1] in _QUOTES:
        text = text[1:-1].strip()
    return text


def enumerated_items(response: str) -> list[str]:
    """Texts of ``(1) ... (2) ...`` items, in document order, quotes stripped."""
    matches = list(_ITEM_RE.finditer(response))
    items = []
    for i, match in enumerate(matches):
        stop = matches[i + 1].start() if i + 1 < len(matches) else len(response)
        text = strip_quotes(response[match.end():stop])
        if text:
            items.append(text)
    return items


def is_not_applicable(response: str) -> bool:
    text = strip_quotes(response).rstrip(".")
    return text.upper() == "N/A"


def decomposition_prompt(statement: str) -> str:
    return templates.fill(templates.load(templates.DECOMPOSITION), statement=statement)


def parse_decomposition(response: str) -> list[Claim] | None:
    """Parse a decomposition response; ``None`` means the statement is atomic.

    Anything that is neither "N/A" nor at least two enumerated sentences is
    prompt drift and raises :class:`ResponseFormatError`.
    """
    if is_not_applicable(response):
        return None
    items = enumerated_items(response)
    if len(items) < 2:
        raise ResponseFormatError(
            f"decomposition produced {len(items)} item(s) and no N/A marker")
    return [Claim(text=item, atomic=False) for item in items]


def build_tree(root: Claim, config: RunConfig, registry: BackendRegistry,
               warnings: list[str] | None = None) -> TreeNode:
    """Decompose ``root`` until atomic or the depth limit, assembling the tree.

    With no decomposition backend configured the hypothesis is used as-is as
    a single-node tree. A branch whose response cannot be parsed becomes a
    leaf with a recorded warning instead of failing the run; backend errors
    propagate, tagged with the node path.
    """
    if config.decomposition_backend is None:
        return TreeNode(id="0", claim=root)
    backend = registry.chat_backend(config.decomposition_backend)

    def grow(claim: Claim, node_id: str, depth: int) -> TreeNode:
        node = TreeNode(id=node_id, claim=claim)
        if claim.atomic or depth >= config.decomposition_max:
            return node
        try:
            response = backend.complete(ChatRequest(prompt=decomposition_prompt(claim.text)))
        except BackendError as exc:
            raise type(exc)(f"decomposition at node {node_id}: {exc}") from exc
        try:
            sub_claims = parse_decomposition(response)
        except ResponseFormatError as exc:
            message = f"node {node_id}: treating as leaf, {exc}"
            log.warning("%s", message)
            if warnings is not None:
                warnings.append(message)
            return node
        if sub_claims is None:
            node.claim = Claim(text=claim.text, atomic=True)
            return node
        node.children = [grow(sub, f"{node_id}.{i}", depth + 1)
                         for i, sub in enumerate(sub_claims)]
        return node

    return grow(root, "0", 0)
