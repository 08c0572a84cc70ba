"""Shared pieces of the adapter: labels, word rules, interchange records.

The adapter talks to the pipeline toolkit purely through files, so the
canonical tag ordering and the word conventions are restated here from
the published interchange contract: O first, then the eight labels in
alphabetical order with B before I; words split on whitespace with every
punctuation character its own token and -, /, + gluing alphanumeric runs.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

LABELS: tuple[str, ...] = (
    "EVOL",
    "FACTR",
    "ANTPERSON",
    "MUTAC",
    "MET",
    "PAT",
    "SINT",
    "TTO",
)

CANONICAL_TAGS: tuple[str, ...] = ("O",) + tuple(
    f"{prefix}-{label}" for label in sorted(LABELS) for prefix in ("B", "I")
)

TAG_INDEX = {tag: index for index, tag in enumerate(CANONICAL_TAGS)}

CONNECTORS = "-/+"


class AdapterError(Exception):
    pass


@dataclass(frozen=True)
class AdapterConfig:
    model: str
    max_len: int = 512
    stride: int = 128
    batch_size: int = 8
    coords: str = "raw"

    def __post_init__(self) -> None:
        if self.stride >= self.max_len:
            raise AdapterError(
                f"stride ({self.stride}) must be smaller than max sequence "
                f"length ({self.max_len})"
            )
        if self.coords not in ("raw", "clean"):
            raise AdapterError("coords must be 'raw' or 'clean'")
        if self.max_len < 8:
            raise AdapterError("max sequence length must be at least 8")


@dataclass(frozen=True)
class CorpusDocument:
    id: str
    text: str
    spans: tuple[tuple[int, int, str], ...]  # (start, end, label)


def read_corpus(path: str) -> list[CorpusDocument]:
    """Read the line-delimited span-annotation corpus format."""
    documents: list[CorpusDocument] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
            try:
                spans = tuple(
                    (int(s), int(e), str(l)) for s, e, l in record["label"]
                )
                documents.append(
                    CorpusDocument(str(record["id"]), record["text"], spans)
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise AdapterError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return documents


def word_tokens(text: str) -> list[tuple[int, int]]:
    """(start, end) offsets of the pipeline's word tokens."""
    tokens: list[tuple[int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isalnum():
            j = i + 1
            while j < n:
                c = text[j]
                if c.isalnum():
                    j += 1
                elif c in CONNECTORS and j + 1 < n and text[j + 1].isalnum():
                    j += 1
                else:
                    break
            tokens.append((i, j))
            i = j
        else:
            tokens.append((i, i + 1))
            i += 1
    return tokens


def gold_word_tags(
    tokens: Sequence[tuple[int, int]],
    spans: Iterable[tuple[int, int, str]],
) -> list[str]:
    """IOB2 tag per word: a word belongs to the first span it overlaps."""
    tags = ["O"] * len(tokens)
    claimed = [False] * len(tokens)
    for start, end, label in sorted(spans):
        first = True
        for index, (token_start, token_end) in enumerate(tokens):
            if claimed[index] or token_end <= start or token_start >= end:
                continue
            tags[index] = f"{'B' if first else 'I'}-{label}"
            claimed[index] = True
            first = False
    return tags


def interchange_record(doc_id: str, coords: str, tokens: list[dict]) -> str:
    return json.dumps(
        {
            "doc_id": doc_id,
            "coords": coords,
            "tag_order": list(CANONICAL_TAGS),
            "tokens": tokens,
        },
        ensure_ascii=False,
    )


def write_atomic(path: str, lines: Iterator[str] | Iterable[str]) -> None:
    """Write the interchange file through a temp file plus rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    descriptor, temp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(descriptor, "w", encoding="utf-8") as handle:
            for line in lines:
                handle.write(line + "\n")
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise
