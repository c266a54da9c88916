"""Turn free-form assistant answers into a clean list of object names.

Accepts numbered/bulleted lists, comma- or newline-separated text. Leading
articles and counts are stripped, names are lowercased, trimmed, and
deduplicated preserving first occurrence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_BULLET = re.compile(r"^\s*(?:[-*•]+|\(?\d+[.):]?)\s*")
_ARTICLES = {"a", "an", "the"}
_COUNTS = {
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "several", "some", "many",
}


@dataclass(frozen=True)
class AssistantResponse:
    raw_text: str
    parsed_labels: tuple[str, ...]


def _clean_fragment(fragment: str) -> str:
    fragment = _BULLET.sub("", fragment)
    fragment = fragment.strip().strip(".;:").strip().lower()
    words = fragment.split()
    while words and (words[0] in _ARTICLES or words[0] in _COUNTS or words[0].isdigit()):
        words = words[1:]
    return " ".join(words)


def parse_object_list(raw_text: str) -> AssistantResponse:
    labels: list[str] = []
    seen: set[str] = set()
    for line in raw_text.splitlines():
        for fragment in re.split(r"[,;]", line):
            name = _clean_fragment(fragment)
            if name and name not in seen:
                seen.add(name)
                labels.append(name)
    return AssistantResponse(raw_text=raw_text, parsed_labels=tuple(labels))
