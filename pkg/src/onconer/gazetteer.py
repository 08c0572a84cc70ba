"""Hierarchical term dictionary compiled into a multi-pattern matcher.

The dictionary is a CSV of (surface, label, category path) rows. Surfaces
are normalized (case fold, accent fold, whitespace collapse) and compiled
into an Aho-Corasick automaton. Tagging normalizes the input text with the
same policy while recording an offset map, finds all matches anchored on
word boundaries, resolves overlaps leftmost-longest and reports spans back
in the coordinates of the text that was passed in (or, through a
preprocessing offset map, in original-report coordinates).
"""

from __future__ import annotations

import csv
import logging
import unicodedata
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .corpus import MATCH_PRIORITY, Label, Span
from .errors import DictionaryError
from .preprocess import Edit, OffsetMap, apply_edits

logger = logging.getLogger(__name__)

NORMALIZATION_POLICY = "casefold-accentfold-collapse-v1"

_PRIORITY_INDEX = {label: index for index, label in enumerate(MATCH_PRIORITY)}

DICTIONARY_HEADER = ("surface", "label", "category_path")


def _fold_char(ch: str) -> str:
    """Case-fold one character and strip its combining marks."""
    decomposed = unicodedata.normalize("NFD", ch.casefold())
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def normalize_term(text: str) -> str:
    """Case fold, strip accents and collapse whitespace; idempotent."""
    folded = "".join(" " if ch.isspace() else _fold_char(ch) for ch in text)
    return " ".join(folded.split())


def _normalize_with_map(text: str) -> tuple[str, OffsetMap]:
    """Apply the matching normalization while keeping offsets projectable."""
    edits: list[Edit] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            run = text[i:j]
            if run != " ":
                if " " in run:
                    keep = i + run.index(" ")
                    if keep > i:
                        edits.append((i, keep, ""))
                    if keep + 1 < j:
                        edits.append((keep + 1, j, ""))
                else:
                    edits.append((i, j, " "))
            i = j
            continue
        folded = _fold_char(ch)
        if folded != ch:
            edits.append((i, i + 1, folded))
        i += 1
    return apply_edits(text, edits)


@dataclass(frozen=True)
class DictionaryEntry:
    surface: str
    label: Label
    category_path: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.surface:
            raise DictionaryError("entry surface is empty after normalization")
        if self.category_path and self.category_path[0] != self.label.value:
            raise DictionaryError(
                f"category path {'/'.join(self.category_path)!r} does not start "
                f"with label {self.label.value}"
            )


@dataclass(frozen=True)
class Dictionary:
    entries: tuple[DictionaryEntry, ...]
    normalization_policy: str = NORMALIZATION_POLICY


def load_dictionary(source: IO[str] | str | Iterable[str]) -> Dictionary:
    """Read the CSV dictionary format, normalizing and deduplicating rows.

    Rows that collapse to the same (surface, label) after normalization
    are merged with a warning. Unknown labels and empty surfaces raise
    DictionaryError.
    """
    if isinstance(source, str):
        source = source.splitlines()
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DictionaryError("dictionary file is empty") from None
    if tuple(h.strip() for h in header) != DICTIONARY_HEADER:
        raise DictionaryError(
            f"expected header {','.join(DICTIONARY_HEADER)!r}, got {','.join(header)!r}"
        )
    entries: list[DictionaryEntry] = []
    seen: dict[tuple[str, Label], int] = {}
    for rowno, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise DictionaryError(f"row {rowno}: expected 3 columns, got {len(row)}")
        raw_surface, raw_label, raw_path = (cell.strip() for cell in row)
        try:
            label = Label(raw_label)
        except ValueError:
            raise DictionaryError(f"row {rowno}: unknown label {raw_label!r}") from None
        surface = normalize_term(raw_surface)
        if not surface:
            raise DictionaryError(f"row {rowno}: surface {raw_surface!r} is empty after normalization")
        path = tuple(part for part in raw_path.split("/") if part) or (label.value,)
        key = (surface, label)
        if key in seen:
            logger.warning(
                "dictionary row %d duplicates row %d (%r, %s); merged",
                rowno, seen[key], surface, label.value,
            )
            continue
        seen[key] = rowno
        entries.append(DictionaryEntry(surface, label, path))
    return Dictionary(tuple(entries))


class CompiledMatcher:
    """Aho-Corasick automaton over the normalized dictionary surfaces.

    The raw match set is identical to scanning the text once per entry;
    the automaton only changes the cost, not the result.
    """

    def __init__(self, dictionary: Dictionary):
        self.dictionary = dictionary
        # Patterns keep dictionary order; one surface may carry several
        # labels. Surfaces are folded here as well, so matching does not
        # depend on how the dictionary spelled them.
        self._patterns: list[tuple[str, Label]] = []
        seen: set[tuple[str, Label]] = set()
        for entry in dictionary.entries:
            key = (normalize_term(entry.surface), entry.label)
            if key not in seen:
                seen.add(key)
                self._patterns.append(key)
        self._goto: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._output: list[list[int]] = [[]]
        for pattern_id, (surface, _) in enumerate(self._patterns):
            self._insert(surface, pattern_id)
        self._link_failures()

    def _insert(self, pattern: str, pattern_id: int) -> None:
        state = 0
        for ch in pattern:
            nxt = self._goto[state].get(ch)
            if nxt is None:
                nxt = len(self._goto)
                self._goto.append({})
                self._fail.append(0)
                self._output.append([])
                self._goto[state][ch] = nxt
            state = nxt
        self._output[state].append(pattern_id)

    def _link_failures(self) -> None:
        queue: list[int] = []
        for child in self._goto[0].values():
            self._fail[child] = 0
            queue.append(child)
        head = 0
        while head < len(queue):
            state = queue[head]
            head += 1
            for ch, child in self._goto[state].items():
                fallback = self._fail[state]
                while fallback and ch not in self._goto[fallback]:
                    fallback = self._fail[fallback]
                self._fail[child] = self._goto[fallback].get(ch, 0)
                if self._fail[child] == child:
                    self._fail[child] = 0
                self._output[child] = self._output[child] + self._output[self._fail[child]]
                queue.append(child)

    def iter_matches(self, text: str) -> Iterator[tuple[int, int, Label]]:
        """All occurrences of all patterns, in end-position order."""
        state = 0
        for position, ch in enumerate(text):
            while state and ch not in self._goto[state]:
                state = self._fail[state]
            state = self._goto[state].get(ch, 0)
            for pattern_id in self._output[state]:
                surface, label = self._patterns[pattern_id]
                yield (position + 1 - len(surface), position + 1, label)


def is_word_boundary_match(text: str, start: int, end: int) -> bool:
    if start > 0 and text[start - 1].isalnum():
        return False
    if end < len(text) and text[end].isalnum():
        return False
    return True


def resolve_matches(candidates: Iterable[tuple[int, int, Label]]) -> list[tuple[int, int, Label]]:
    """Leftmost-longest selection; exact (start, end) ties go to the
    highest-priority label."""
    ordered = sorted(
        candidates,
        key=lambda m: (m[0], -(m[1] - m[0]), _PRIORITY_INDEX[m[2]]),
    )
    selected: list[tuple[int, int, Label]] = []
    cursor = 0
    for start, end, label in ordered:
        if start >= cursor:
            selected.append((start, end, label))
            cursor = end
    return selected


def compile_dictionary(dictionary: Dictionary) -> CompiledMatcher:
    return CompiledMatcher(dictionary)


def tag_text(
    matcher: CompiledMatcher,
    text: str,
    offset_map: OffsetMap | None = None,
) -> list[Span]:
    """Tag a text with dictionary matches.

    Matching runs on the normalized text, anchored on word boundaries.
    Results come back in the coordinates of ``text``; when ``offset_map``
    maps an original report to ``text`` (a preprocessed version of it),
    results are projected all the way back to the original coordinates.
    """
    normalized, norm_map = _normalize_with_map(text)
    candidates = [
        match
        for match in matcher.iter_matches(normalized)
        if is_word_boundary_match(normalized, match[0], match[1])
    ]
    spans: list[Span] = []
    for start, end, label in resolve_matches(candidates):
        projected = norm_map.project_back(start, end)
        if projected is None:
            continue
        if offset_map is not None:
            projected = offset_map.project_back(*projected)
            if projected is None:
                continue
        spans.append(Span(projected[0], projected[1], label))
    return sorted(spans, key=lambda s: (s.start, s.end))
