"""Corpus model for span-annotated clinical reports.

Covers the line-delimited span-annotation export format (one JSON record
per report with ``id``, ``text`` and a ``label`` list of
``[start, end, name]`` triples), structural validation, per-label span
statistics and deterministic stratified splitting.

Character offsets throughout the toolkit count Unicode code points, never
bytes.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable, Iterator, Mapping

from .errors import DataError, FormatError


class Label(str, Enum):
    """Clinical entity categories used across the toolkit."""

    EVOL = "EVOL"
    FACTR = "FACTR"
    ANTPERSON = "ANTPERSON"
    MUTAC = "MUTAC"
    MET = "MET"
    PAT = "PAT"
    SINT = "SINT"
    TTO = "TTO"

    @property
    def lung_specific(self) -> bool:
        """ANTPERSON and MUTAC only occur in lung cancer reports."""
        return self in (Label.ANTPERSON, Label.MUTAC)


#: Column order used by per-label metric and distribution tables.
TABLE_LABEL_ORDER: tuple[Label, ...] = (
    Label.EVOL,
    Label.FACTR,
    Label.MUTAC,
    Label.ANTPERSON,
    Label.MET,
    Label.PAT,
    Label.SINT,
    Label.TTO,
)

#: Order used when enumerating labels in comparison charts.
FIGURE_LABEL_ORDER: tuple[Label, ...] = tuple(Label)

#: Priority for breaking exact ties between competing dictionary matches
#: (highest first).
MATCH_PRIORITY: tuple[Label, ...] = (
    Label.MET,
    Label.PAT,
    Label.TTO,
    Label.SINT,
    Label.FACTR,
    Label.MUTAC,
    Label.ANTPERSON,
    Label.EVOL,
)

CATEGORIES: tuple[str, ...] = (
    "breast_pathology",
    "lung_pathology",
    "lung_symptomatology",
)
DEFAULT_CATEGORY = CATEGORIES[0]

SPLIT_NAMES: tuple[str, ...] = ("train", "validation", "test")


@dataclass(frozen=True)
class Span:
    """A labeled character span, end-exclusive, on its owning text."""

    start: int
    end: int
    label: Label

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise DataError(f"invalid span bounds ({self.start}, {self.end})")

    @property
    def key(self) -> tuple[int, int]:
        return (self.start, self.end)

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Document:
    """One clinical report."""

    id: str
    text: str
    category: str = DEFAULT_CATEGORY


@dataclass(frozen=True)
class AnnotatedDocument:
    """A report together with its gold entity spans, sorted by position."""

    document: Document
    spans: tuple[Span, ...]

    @property
    def id(self) -> str:
        return self.document.id

    @property
    def text(self) -> str:
        return self.document.text


@dataclass(frozen=True)
class Corpus:
    documents: tuple[AnnotatedDocument, ...]

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[AnnotatedDocument]:
        return iter(self.documents)

    def ids(self) -> list[str]:
        return [doc.id for doc in self.documents]

    def by_id(self) -> dict[str, AnnotatedDocument]:
        return {doc.id: doc for doc in self.documents}


@dataclass(frozen=True)
class Violation:
    """One invariant breach found by :func:`validate`."""

    doc_id: str | None
    kind: str
    message: str


def sort_spans(spans: Iterable[Span]) -> tuple[Span, ...]:
    return tuple(sorted(spans, key=lambda s: (s.start, s.end)))


def _iter_lines(source: IO[str] | IO[bytes] | str | bytes | Iterable[str]) -> Iterator[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        yield from source.splitlines()
        return
    for line in source:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        yield line.rstrip("\n")


def _resolve_overlaps_keep_longer(spans: tuple[Span, ...]) -> tuple[Span, ...]:
    """Drop the shorter of every overlapping pair (first wins on equal length)."""
    kept: list[Span] = []
    for span in spans:
        if kept and kept[-1].overlaps(span):
            prev = kept[-1]
            if (span.end - span.start) > (prev.end - prev.start):
                kept[-1] = span
            continue
        kept.append(span)
    return tuple(kept)


def parse_doccano(
    source: IO[str] | IO[bytes] | str | bytes | Iterable[str],
    *,
    drop_overlaps: bool = False,
    ignore_unknown_labels: bool = False,
) -> Corpus:
    """Parse a line-delimited span-annotation export into a Corpus.

    Each line is a JSON object with keys ``id``, ``text`` and ``label``
    (a list of ``[start, end, name]`` triples). ``id`` is coerced to a
    string. An optional ``category`` key is honored and defaults to
    breast_pathology.

    Raises FormatError on malformed lines and DataError on out-of-bounds
    spans, overlapping spans (unless ``drop_overlaps`` keeps the longer
    one) and unknown label names (unless ``ignore_unknown_labels`` skips
    them).
    """
    documents: list[AnnotatedDocument] = []
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: not valid JSON ({exc})") from exc
        if not isinstance(record, dict):
            raise FormatError(f"line {lineno}: expected a JSON object")
        for key in ("id", "text", "label"):
            if key not in record:
                raise FormatError(f"line {lineno}: missing key {key!r}")
        doc_id = str(record["id"])
        text = record["text"]
        if not isinstance(text, str):
            raise FormatError(f"line {lineno}: 'text' must be a string")
        triples = record["label"]
        if not isinstance(triples, list):
            raise FormatError(f"line {lineno}: 'label' must be a list")

        spans: list[Span] = []
        for triple in triples:
            if not (isinstance(triple, (list, tuple)) and len(triple) == 3):
                raise FormatError(
                    f"line {lineno}: document {doc_id!r}: "
                    f"span entry {triple!r} is not a [start, end, label] triple"
                )
            start, end, name = triple
            if not (isinstance(start, int) and isinstance(end, int)):
                raise FormatError(
                    f"line {lineno}: document {doc_id!r}: "
                    f"non-integer offsets in {triple!r}"
                )
            try:
                label = Label(name)
            except ValueError:
                if ignore_unknown_labels:
                    continue
                raise DataError(
                    f"document {doc_id!r}: unknown label name {name!r} in {triple!r}"
                ) from None
            if not (0 <= start < end <= len(text)):
                raise DataError(
                    f"document {doc_id!r}: span {[start, end, name]!r} "
                    f"out of bounds for text of length {len(text)}"
                )
            spans.append(Span(start, end, label))

        ordered = sort_spans(spans)
        for prev, cur in zip(ordered, ordered[1:]):
            if prev.overlaps(cur):
                if drop_overlaps:
                    ordered = _resolve_overlaps_keep_longer(ordered)
                    break
                raise DataError(
                    f"document {doc_id!r}: overlapping gold spans "
                    f"{(prev.start, prev.end, prev.label.value)} and "
                    f"{(cur.start, cur.end, cur.label.value)}"
                )

        category = record.get("category", DEFAULT_CATEGORY)
        if not isinstance(category, str):
            raise FormatError(f"line {lineno}: 'category' must be a string")
        documents.append(
            AnnotatedDocument(Document(doc_id, text, category), ordered)
        )
    return Corpus(tuple(documents))


def serialize_corpus(corpus: Corpus) -> str:
    """Canonical serialization: the same export format with spans sorted."""
    lines = []
    for doc in corpus:
        record = {
            "id": doc.id,
            "text": doc.text,
            "label": [[s.start, s.end, s.label.value] for s in doc.spans],
            "category": doc.document.category,
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def read_corpus(path, **kwargs) -> Corpus:
    with open(path, encoding="utf-8") as handle:
        return parse_doccano(handle, **kwargs)


def write_corpus(path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_corpus(corpus))


def validate(corpus: Corpus) -> list[Violation]:
    """Check every type invariant; violations are data, not failures."""
    violations: list[Violation] = []
    seen: set[str] = set()
    for doc in corpus:
        if doc.id in seen:
            violations.append(
                Violation(doc.id, "duplicate-id", f"document id {doc.id!r} occurs more than once")
            )
        seen.add(doc.id)
        if not doc.text:
            violations.append(Violation(doc.id, "empty-text", "document text is empty"))
        if doc.document.category not in CATEGORIES:
            violations.append(
                Violation(
                    doc.id,
                    "unknown-category",
                    f"category {doc.document.category!r} is not one of {CATEGORIES}",
                )
            )
        for span in doc.spans:
            if span.end > len(doc.text):
                violations.append(
                    Violation(
                        doc.id,
                        "span-bounds",
                        f"span {(span.start, span.end, span.label.value)} exceeds "
                        f"text length {len(doc.text)}",
                    )
                )
        for prev, cur in zip(doc.spans, doc.spans[1:]):
            if (cur.start, cur.end) < (prev.start, prev.end):
                violations.append(
                    Violation(doc.id, "span-order", "spans are not sorted by (start, end)")
                )
            if prev.overlaps(cur):
                violations.append(
                    Violation(
                        doc.id,
                        "span-overlap",
                        f"spans {(prev.start, prev.end, prev.label.value)} and "
                        f"{(cur.start, cur.end, cur.label.value)} overlap",
                    )
                )
    return violations


@dataclass(frozen=True)
class LabelDistribution:
    """Gold span counts per label, per split and for the whole corpus."""

    splits: dict[str, dict[Label, int]]
    complete: dict[Label, int]

    def row(self, name: str) -> dict[Label, int]:
        if name == "complete":
            return self.complete
        return self.splits[name]


def check_complete_row(
    splits: Mapping[str, Mapping[Label, int]],
    complete: Mapping[Label, int],
) -> list[Label]:
    """Labels whose split counts do not sum to the complete row."""
    bad = []
    for label in Label:
        total = sum(row.get(label, 0) for row in splits.values())
        if total != complete.get(label, 0):
            bad.append(label)
    return bad


def _count_labels(docs: Iterable[AnnotatedDocument]) -> dict[Label, int]:
    counter: Counter[Label] = Counter()
    for doc in docs:
        for span in doc.spans:
            counter[span.label] += 1
    return {label: counter.get(label, 0) for label in Label}


def label_distribution(
    corpus: Corpus,
    assignment: Mapping[str, Iterable[str]] | None = None,
) -> LabelDistribution:
    """Count gold spans per label, optionally broken down by split.

    ``assignment`` maps split names to document ids and must cover every
    document exactly once.
    """
    complete = _count_labels(corpus)
    if assignment is None:
        return LabelDistribution({}, complete)

    docs = corpus.by_id()
    claimed: dict[str, str] = {}
    splits: dict[str, dict[Label, int]] = {}
    for split_name, ids in assignment.items():
        members = []
        for doc_id in ids:
            if doc_id not in docs:
                raise DataError(f"split {split_name!r} lists unknown document {doc_id!r}")
            if doc_id in claimed:
                raise DataError(
                    f"document {doc_id!r} assigned to both "
                    f"{claimed[doc_id]!r} and {split_name!r}"
                )
            claimed[doc_id] = split_name
            members.append(docs[doc_id])
        splits[split_name] = _count_labels(members)
    missing = [doc_id for doc_id in docs if doc_id not in claimed]
    if missing:
        raise DataError(f"documents assigned to no split: {missing}")
    return LabelDistribution(splits, complete)


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # Read floats as the decimal literal the caller wrote, so 0.3
        # means 3/10 and fractions sum exactly.
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise DataError(f"cannot interpret {value!r} as a fraction")


@dataclass(frozen=True)
class SplitSpec:
    """Split fractions, shuffle seed and stratification switch."""

    train_fraction: Fraction
    validation_fraction: Fraction
    test_fraction: Fraction
    seed: int = 42
    stratify_by_category: bool = True

    def __post_init__(self) -> None:
        for name in ("train_fraction", "validation_fraction", "test_fraction"):
            object.__setattr__(self, name, _to_fraction(getattr(self, name)))
        fractions = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f < 0 for f in fractions):
            raise DataError("split fractions must be nonnegative")
        if sum(fractions) != 1:
            raise DataError(f"split fractions sum to {sum(fractions)}, expected 1")

    @property
    def fractions(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.train_fraction, self.validation_fraction, self.test_fraction)


@dataclass(frozen=True)
class SplitCorpora:
    train: Corpus
    validation: Corpus
    test: Corpus

    def as_dict(self) -> dict[str, Corpus]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def split_sizes(n: int, fractions: tuple[Fraction, Fraction, Fraction]) -> tuple[int, int, int]:
    """Floor each fraction of n, then hand the remainder out train, val, test."""
    sizes = [int(f * n) for f in fractions]
    remainder = n - sum(sizes)
    index = 0
    while remainder > 0:
        sizes[index % 3] += 1
        remainder -= 1
        index += 1
    return tuple(sizes)  # type: ignore[return-value]


def split(corpus: Corpus, spec: SplitSpec) -> SplitCorpora:
    """Partition a corpus into train, validation and test subsets.

    Within each category the documents are shuffled with a seed derived
    from ``spec.seed`` and the category name, so the assignment depends
    only on the document ids, the category and the seed. Output corpora
    are sorted by document id.
    """
    if len(corpus) == 0:
        raise DataError("cannot split an empty corpus")

    groups: dict[str, list[AnnotatedDocument]] = {}
    for doc in corpus:
        key = doc.document.category if spec.stratify_by_category else ""
        groups.setdefault(key, []).append(doc)

    buckets: tuple[list[AnnotatedDocument], ...] = ([], [], [])
    for category in sorted(groups):
        docs = sorted(groups[category], key=lambda d: d.id)
        rng = random.Random(f"{spec.seed}:{category}")
        rng.shuffle(docs)
        n_train, n_val, n_test = split_sizes(len(docs), spec.fractions)
        buckets[0].extend(docs[:n_train])
        buckets[1].extend(docs[n_train : n_train + n_val])
        buckets[2].extend(docs[n_train + n_val :])

    ordered = tuple(
        Corpus(tuple(sorted(bucket, key=lambda d: d.id))) for bucket in buckets
    )
    return SplitCorpora(*ordered)
