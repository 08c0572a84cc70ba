"""Tokenization and conversion between character spans and IOB2 tags."""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .corpus import Label, Span, sort_spans
from .errors import DataError, FormatError

#: Characters that join alphanumeric runs into one token (pT1N0M0, HER-2, s/p).
CONNECTORS = "-/+"

#: Canonical IOB2 tag ordering: O first, labels alphabetical, B before I.
#: The prediction interchange depends on this ordering and repeats it in
#: every record header.
CANONICAL_TAGS: tuple[str, ...] = ("O",) + tuple(
    f"{prefix}-{label.value}"
    for label in sorted(Label, key=lambda l: l.value)
    for prefix in ("B", "I")
)

_TAG_INDEX = {tag: index for index, tag in enumerate(CANONICAL_TAGS)}

OUTSIDE = "O"


def tag_index(tag: str) -> int:
    try:
        return _TAG_INDEX[tag]
    except KeyError:
        raise DataError(f"unknown tag {tag!r}") from None


def tag_at(index: int) -> str:
    return CANONICAL_TAGS[index]


def make_tag(prefix: str, label: Label) -> str:
    return f"{prefix}-{label.value}"


def parse_tag(tag: str) -> tuple[str, Label] | None:
    """Split B-X/I-X into (prefix, label); None for O and anything unknown."""
    if len(tag) > 2 and tag[1] == "-" and tag[0] in ("B", "I"):
        try:
            return tag[0], Label(tag[2:])
        except ValueError:
            return None
    return None


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if not self.text or self.end - self.start != len(self.text):
            raise DataError(f"inconsistent token {self.text!r} at ({self.start}, {self.end})")


@dataclass(frozen=True)
class TaggedSequence:
    doc_id: str
    tokens: tuple[Token, ...]
    tags: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.tags):
            raise DataError(
                f"document {self.doc_id!r}: {len(self.tokens)} tokens "
                f"but {len(self.tags)} tags"
            )

    def is_canonical(self) -> bool:
        """True when every I-X follows a B-X or I-X of the same label."""
        previous: Label | None = None
        for tag in self.tags:
            parsed = parse_tag(tag)
            if parsed is None:
                previous = None
                continue
            prefix, label = parsed
            if prefix == "I" and label != previous:
                return False
            previous = label
        return True


def _word_char(ch: str) -> bool:
    return ch.isalnum()


def tokenize(text: str) -> list[Token]:
    """Split on Unicode whitespace; every punctuation character is its own
    token; -, / and + glue alphanumeric runs together."""
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if _word_char(ch):
            j = i + 1
            while j < n:
                c = text[j]
                if _word_char(c):
                    j += 1
                elif c in CONNECTORS and j + 1 < n and _word_char(text[j + 1]):
                    j += 1
                else:
                    break
            tokens.append(Token(text[i:j], i, j))
            i = j
        else:
            tokens.append(Token(ch, i, i + 1))
            i += 1
    return tokens


def spans_to_tags(
    tokens: Sequence[Token],
    spans: Iterable[Span],
    doc_id: str = "",
) -> tuple[TaggedSequence, int]:
    """Tag tokens with IOB2 from character spans.

    A token belongs to a span when they overlap by at least one character;
    partially covered tokens are included rather than truncated. Returns
    the sequence and the number of partially covered tokens.
    """
    ordered = sort_spans(spans)
    for prev, cur in zip(ordered, ordered[1:]):
        if prev.overlaps(cur):
            raise DataError(
                f"document {doc_id!r}: overlapping spans "
                f"{prev.key} and {cur.key}"
            )
    tags = [OUTSIDE] * len(tokens)
    claimed = [False] * len(tokens)
    partial = 0
    for span in ordered:
        inside = [
            index
            for index, token in enumerate(tokens)
            if token.start < span.end and span.start < token.end and not claimed[index]
        ]
        for position, index in enumerate(inside):
            prefix = "B" if position == 0 else "I"
            tags[index] = make_tag(prefix, span.label)
            claimed[index] = True
            token = tokens[index]
            if token.start < span.start or token.end > span.end:
                partial += 1
    return TaggedSequence(doc_id, tuple(tokens), tuple(tags)), partial


def decode_runs(tags: Sequence[str]) -> list[tuple[Label, int, int]]:
    """Maximal B-X (I-X)* runs as (label, first index, last index + 1).

    Tolerant: an I-X without a valid predecessor starts a new run, and
    anything unrecognized counts as outside. Never raises.
    """
    runs: list[tuple[Label, int, int]] = []
    current: Label | None = None
    start = 0
    for index, tag in enumerate(tags):
        parsed = parse_tag(tag)
        if parsed is None:
            if current is not None:
                runs.append((current, start, index))
                current = None
            continue
        prefix, label = parsed
        if prefix == "B" or current != label:
            if current is not None:
                runs.append((current, start, index))
            current = label
            start = index
    if current is not None:
        runs.append((current, start, len(tags)))
    return runs


def tags_to_spans(sequence: TaggedSequence) -> list[Span]:
    return [
        Span(sequence.tokens[first].start, sequence.tokens[last - 1].end, label)
        for label, first, last in decode_runs(sequence.tags)
    ]


def export_conll(sequences: Iterable[TaggedSequence]) -> str:
    """Two tab-separated columns, one blank line between documents."""
    blocks = []
    for sequence in sequences:
        blocks.append(
            "\n".join(f"{token.text}\t{tag}" for token, tag in zip(sequence.tokens, sequence.tags))
        )
    body = "\n\n".join(blocks)
    return body + "\n" if body else ""


def import_conll(source: IO[str] | str | Iterable[str]) -> list[TaggedSequence]:
    """Parse the two-column format back into sequences.

    Character offsets are not stored in this format; tokens are laid out
    with single spaces so texts and tags round-trip.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = [line.rstrip("\n") for line in source]

    sequences: list[TaggedSequence] = []
    tokens: list[Token] = []
    tags: list[str] = []
    cursor = 0

    def flush() -> None:
        nonlocal tokens, tags, cursor
        if tokens:
            sequences.append(TaggedSequence(str(len(sequences)), tuple(tokens), tuple(tags)))
        tokens, tags, cursor = [], [], 0

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            flush()
            continue
        columns = line.split("\t")
        if len(columns) != 2:
            raise FormatError(f"line {lineno}: expected 2 tab-separated columns, got {len(columns)}")
        text, tag = columns
        if tag not in _TAG_INDEX:
            raise FormatError(f"line {lineno}: unknown tag {tag!r}")
        tokens.append(Token(text, cursor, cursor + len(text)))
        tags.append(tag)
        cursor += len(text) + 1
    flush()
    return sequences
