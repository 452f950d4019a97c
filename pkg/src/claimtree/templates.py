"""Prompt template files and slot substitution.

Templates are plain text files with ``{slot}`` markers. Substitution is a
literal string replacement, not ``str.format``, so template bodies may
contain braces freely.
"""

from __future__ import annotations

from functools import lru_cache
from importlib.resources import files

DECOMPOSITION = "decomposition.txt"
TRANSCRIPT_EXTRACTION = "transcript_extraction.txt"
IMAGE_EXTRACTION_OFFLINE = "image_extraction_offline.txt"
IMAGE_EXTRACTION_TESTTIME = "image_extraction_testtime.txt"
SCORING_MAIN = "scoring_main.txt"
SCORING_EXEMPLARS = "scoring_exemplars.txt"
SUMMARY = "summary.txt"
HYPOTHESIS = "hypothesis.txt"
JUDGE = "judge.txt"


@lru_cache(maxsize=None)
def load(name: str) -> str:
    return files("claimtree.prompts").joinpath(name).read_text(encoding="utf-8")


def fill(template: str, **slots: str) -> str:
    for key, value in slots.items():
        template = template.replace("{" + key + "}", value)
    return template
