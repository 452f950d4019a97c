"""Evidence bank construction: frame sampling, text windowing, observation extraction.

Grounding sources (text documents, timestamped transcripts, images, videos)
are mapped to natural-language observations, each tied to a span of its
source. Videos are never decoded here; frame references are produced by a
pluggable grabber and handed to the vision backend.
"""

from __future__ import annotations

import logging
import math
import shlex
import subprocess
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Protocol, Sequence

from . import templates
from .backends import BackendRegistry, ChatRequest
from .decompose import enumerated_items, is_not_applicable
from .errors import BackendError, DocumentError, ResponseFormatError
from .model import (
    IMAGE, TEMPORAL_MODALITIES, TEXT, TRANSCRIPT, VIDEO, VIDEO_FRAME,
    EvidenceBank, EvidenceFactor, FrameSamplingParams, RunConfig, SourceRef, SourceSpan,
)

log = logging.getLogger(__name__)

MAX_FACTORS_PER_SPAN = 3


def frame_count(x: float, params: FrameSamplingParams = FrameSamplingParams()) -> int:
    """Number of frames to sample from a video of ``x`` seconds.

    Piecewise linear in ``x`` between the breakpoints, rounded up; constant
    ``k1`` below ``m1`` and ``k3`` above ``m3``. Evaluated in exact rational
    arithmetic so breakpoint values never fall to float rounding.
    """
    if x < 0:
        raise ValueError("duration must be non-negative")
    p = params
    if x <= p.m1:
        return p.k1
    if x <= p.m2:
        slope = Fraction(p.k2 - p.k1) / (Fraction(p.m2) - Fraction(p.m1))
        return math.ceil(p.k1 + (Fraction(x) - Fraction(p.m1)) * slope)
    if x <= p.m3:
        slope = Fraction(p.k3 - p.k2) / (Fraction(p.m3) - Fraction(p.m2))
        return math.ceil(p.k2 + (Fraction(x) - Fraction(p.m2)) * slope)
    return p.k3


def frame_timestamps(x: float, params: FrameSamplingParams = FrameSamplingParams()) -> list[float]:
    """Center-of-bucket timestamps for the sampled frames, strictly increasing in [0, x]."""
    n = frame_count(x, params)
    return [(i + 0.5) * x / n for i in range(n)]


def window_text(lines: Sequence[str], window: int, stride: int, *,
                source_id: str = "doc", modality: str = TEXT) -> list[SourceSpan]:
    """Partially overlapping line windows covering the whole document.

    Spans start at multiples of ``stride`` and cover ``min(window, remaining)``
    lines; consecutive spans overlap by ``window - stride`` lines and the
    final span always ends at the last line.
    """
    if not 1 <= stride <= window:
        raise ValueError("stride must satisfy 1 <= stride <= window")
    n = len(lines)
    if n == 0:
        raise ValueError("empty document")
    spans = []
    start = 0
    while True:
        end = min(start + window, n)
        spans.append(SourceSpan(source_id=source_id, modality=modality, start=start, end=end))
        if end >= n:
            return spans
        start += stride


def timestamp_label(seconds: float) -> str:
    total = int(seconds)
    return f"{total // 3600:02d}:{total % 3600 // 60:02d}:{total % 60:02d}"


class FrameGrabber(Protocol):
    def grab(self, uri: str, t: float) -> str: ...


class RefFrameGrabber:
    """Default grabber: encodes the timestamp into the reference, no decoding."""

    def grab(self, uri: str, t: float) -> str:
        return f"{uri}#t={t:.3f}"


class CommandFrameGrabber:
    """Runs a user-supplied command to materialize one frame to a file.

    The command template may use ``{uri}``, ``{t}`` and ``{out}`` placeholders;
    ``{out}`` defaults to a deterministic path under ``out_dir``.
    """

    def __init__(self, command: str, out_dir: str | Path = ".") -> None:
        self.command = command
        self.out_dir = Path(out_dir)

    def grab(self, uri: str, t: float) -> str:
        out = self.out_dir / f"{Path(uri).stem}_{t:.3f}.jpg"
        argv = [part.format(uri=uri, t=f"{t:.3f}", out=str(out))
                for part in shlex.split(self.command)]
        result = subprocess.run(argv, capture_output=True, text=True)
        if result.returncode != 0:
            raise DocumentError(f"frame grabber failed on {uri} at t={t:.3f}: "
                                f"{result.stderr.strip()}")
        return str(out)


def extraction_prompt(modality: str, content: str | None, context: str | None,
                       question_or_claims: str, level: str) -> str:
    if modality in (TEXT, TRANSCRIPT):
        prompt = templates.fill(templates.load(templates.TRANSCRIPT_EXTRACTION),
                                question=question_or_claims, dialogue=content or "")
    else:
        name = (templates.IMAGE_EXTRACTION_TESTTIME if level == "leaf"
                else templates.IMAGE_EXTRACTION_OFFLINE)
        prompt = templates.fill(templates.load(name), question=question_or_claims)
    if context:
        # Extraction context (e.g. a caption or a scenario summary) is not a
        # template slot; it is prepended as its own labeled line.
        prompt = f'CONTEXT: "{context}"\n\n{prompt}'
    return prompt


def extract_observations(span: SourceSpan, content: str | None, image_refs: Sequence[str],
                         context: str | None, question_or_claims: str,
                         config: RunConfig, registry: BackendRegistry,
                         id_prefix: str | None = None) -> list[EvidenceFactor]:
    """Elicit up to three observations for one span; "N/A" yields none.

    Enumerated items beyond the third are dropped. The factor ids encode the
    grounding position, which keeps them unique within a bank.
    """
    prompt = extraction_prompt(span.modality, content, context, question_or_claims,
                                config.evidence_level)
    if span.modality in (IMAGE, VIDEO_FRAME):
        backend = registry.vision_backend(config.vision_backend)
    else:
        backend = registry.chat_backend(config.decomposition_backend)
    response = backend.complete(ChatRequest(prompt=prompt, image_refs=tuple(image_refs)))
    if is_not_applicable(response):
        return []
    items = enumerated_items(response)
    if not items:
        raise ResponseFormatError("extraction response had no enumerated items and no N/A")
    prefix = id_prefix or f"{span.source_id}:{span.start:g}"
    return [EvidenceFactor(id=f"{prefix}:{i}", text=text, span=span)
            for i, text in enumerate(items[:MAX_FACTORS_PER_SPAN])]


def _read_lines(source: SourceRef) -> list[str]:
    try:
        raw = Path(source.uri).read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"source {source.id}: cannot read {source.uri} ({exc})") from exc
    lines = [line for line in raw.splitlines() if line.strip()]
    if not lines:
        raise DocumentError(f"source {source.id}: empty document")
    return lines


def _parse_transcript(source: SourceRef) -> list[tuple[float, str]]:
    entries = []
    for i, line in enumerate(_read_lines(source)):
        try:
            stamp, text = line.split("\t", 1)
            entries.append((float(stamp), text.strip()))
        except ValueError as exc:
            raise DocumentError(
                f"source {source.id} line {i + 1}: expected 'seconds<TAB>text'") from exc
    return entries


def _label_factors(factors: list[EvidenceFactor], span: SourceSpan,
                   config: RunConfig) -> list[EvidenceFactor]:
    if not config.temporal_enhancement or span.modality not in TEMPORAL_MODALITIES:
        return factors
    label = timestamp_label(span.start)
    labeled_span = replace(span, timestamp_label=label)
    return [replace(f, span=labeled_span, text=f"{label} {f.text}") for f in factors]


def build_bank(sources: Sequence[SourceRef], context: str, config: RunConfig,
               registry: BackendRegistry, frame_grabber: FrameGrabber | None = None,
               extraction_context: str | None = None,
               warnings: list[str] | None = None) -> EvidenceBank:
    """Extract an evidence bank from all grounding sources.

    ``context`` fills the question/claim slot of the extraction prompts. Spans
    whose extraction fails are skipped with a warning; an unreadable source
    aborts the build. The resulting factors are merged deterministically,
    ordered by (source id, span start).
    """
    grabber = frame_grabber or RefFrameGrabber()

    def note(message: str) -> None:
        log.warning("%s", message)
        if warnings is not None:
            warnings.append(message)

    collected: list[EvidenceFactor] = []
    for source in sources:
        spans_with_payload: list[tuple[SourceSpan, str | None, tuple[str, ...], str | None]] = []
        if source.modality == TEXT:
            lines = _read_lines(source)
            for span in window_text(lines, config.window, config.stride,
                                    source_id=source.id, modality=TEXT):
                body = "\n".join(lines[int(span.start):int(span.end)])
                spans_with_payload.append((span, body, (), None))
        elif source.modality == TRANSCRIPT:
            entries = _parse_transcript(source)
            for lined in window_text(entries, config.window, config.stride,
                                     source_id=source.id, modality=TRANSCRIPT):
                chunk = entries[int(lined.start):int(lined.end)]
                body = "\n".join(text for _, text in chunk)
                seconds = SourceSpan(source_id=source.id, modality=TRANSCRIPT,
                                     start=chunk[0][0], end=chunk[-1][0])
                spans_with_payload.append((seconds, body, (),
                                           f"{source.id}:{lined.start:g}"))
        elif source.modality == IMAGE:
            span = SourceSpan(source_id=source.id, modality=IMAGE, start=0, end=source.length)
            spans_with_payload.append((span, None, (source.uri,), None))
        else:
            assert source.modality == VIDEO
            for t in frame_timestamps(source.length, config.frame_sampling):
                span = SourceSpan(source_id=source.id, modality=VIDEO_FRAME, start=t, end=t)
                spans_with_payload.append((span, None, (grabber.grab(source.uri, t),), None))

        for span, body, refs, id_prefix in spans_with_payload:
            try:
                factors = extract_observations(span, body, refs, extraction_context,
                                               context, config, registry, id_prefix=id_prefix)
            except (BackendError, ResponseFormatError) as exc:
                note(f"source {source.id} span [{span.start:g}, {span.end:g}]: "
                     f"skipped ({exc})")
                continue
            collected.extend(_label_factors(factors, span, config))

    collected.sort(key=lambda f: (f.span.source_id, f.span.start, f.id))
    return EvidenceBank(factors=tuple(collected), sources=tuple(sources))
