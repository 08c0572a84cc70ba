"""Prediction interchange parsing and subword-to-entity aggregation.

The interchange is line-delimited JSON. Each record carries the document
id, a ``coords`` flag saying which text the offsets refer to (``raw`` or
``clean``), the canonical tag ordering and per-subtoken probability
vectors grouped into words by ``word_id``::

    {"doc_id": "...", "coords": "raw", "tag_order": [...17 tags...],
     "tokens": [{"start": 0, "end": 3, "word_id": 0, "probs": [...17...]}]}

Aggregation mirrors the "average" strategy of common token-classification
pipelines: the probability vectors of a word's subtokens are averaged,
the argmax picks the word tag (ties go to the lower canonical index) and
entities are decoded from the word tags with the usual B/I run rules.
Other strategies (first, max, simple) are intentionally not implemented;
only the averaging semantics are part of this toolkit's contract.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping, Sequence

from .corpus import Label
from .errors import AlignmentError, DataError, InterchangeError
from .preprocess import OffsetMap
from .tagcodec import CANONICAL_TAGS, TaggedSequence, decode_runs, tag_index

logger = logging.getLogger(__name__)

TAG_COUNT = len(CANONICAL_TAGS)

#: Probability vectors must sum to 1 within this tolerance; anything
#: closer than the renormalization floor is considered numerically clean
#: and fixed up silently, anything between the two is renormalized with a
#: warning, anything beyond is rejected.
SUM_TOLERANCE = 1e-3
SUM_CLEAN = 1e-6

PROB_FLOOR = 1e-12

COORD_KINDS = ("raw", "clean")


@dataclass(frozen=True)
class TokenPrediction:
    """One subtoken: offsets on the text the model saw, word group, probs."""

    start: int
    end: int
    word_id: int
    probs: tuple[float, ...]


@dataclass(frozen=True)
class PredictionSet:
    doc_id: str
    coords: str
    tokens: tuple[TokenPrediction, ...]


@dataclass(frozen=True)
class WordPrediction:
    start: int
    end: int
    tag: str
    score: float


@dataclass(frozen=True)
class PredictedEntity:
    start: int
    end: int
    label: Label
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"entity score {self.score} outside [0, 1]")


def _iter_lines(source: IO[str] | str | Iterable[str]) -> Iterator[str]:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        yield from source.splitlines()
        return
    for line in source:
        yield line.rstrip("\n")


def parse_predictions(source: IO[str] | str | Iterable[str]) -> list[PredictionSet]:
    """Parse and validate interchange records.

    Hard errors: wrong tag ordering, wrong vector length, negative
    probabilities, sums off by more than ``SUM_TOLERANCE``, unsorted or
    overlapping subtokens, decreasing word ids.
    """
    sets: list[PredictionSet] = []
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InterchangeError(f"line {lineno}: not valid JSON ({exc})") from exc
        for key in ("doc_id", "coords", "tag_order", "tokens"):
            if key not in record:
                raise InterchangeError(f"line {lineno}: missing key {key!r}")
        doc_id = str(record["doc_id"])
        coords = record["coords"]
        if coords not in COORD_KINDS:
            raise InterchangeError(f"line {lineno}: coords must be one of {COORD_KINDS}")
        if tuple(record["tag_order"]) != CANONICAL_TAGS:
            raise InterchangeError(
                f"line {lineno}: tag_order does not match the canonical ordering"
            )
        tokens: list[TokenPrediction] = []
        previous_end = -1
        previous_word = None
        for position, entry in enumerate(record["tokens"]):
            where = f"line {lineno}: document {doc_id!r}: token {position}"
            start, end, word_id = entry["start"], entry["end"], entry["word_id"]
            probs = entry["probs"]
            if not (isinstance(start, int) and isinstance(end, int) and 0 <= start < end):
                raise InterchangeError(f"{where}: bad offsets ({start}, {end})")
            if start < previous_end:
                raise InterchangeError(f"{where}: subtokens unsorted or overlapping")
            previous_end = end
            if previous_word is not None and word_id < previous_word:
                raise InterchangeError(f"{where}: word_id decreases")
            previous_word = word_id
            if len(probs) != TAG_COUNT:
                raise InterchangeError(
                    f"{where}: probability vector has length {len(probs)}, expected {TAG_COUNT}"
                )
            if any(p < 0 for p in probs):
                raise InterchangeError(f"{where}: negative probability")
            total = sum(probs)
            if abs(total - 1.0) > SUM_TOLERANCE:
                raise InterchangeError(
                    f"{where}: probabilities sum to {total}, outside tolerance"
                )
            if total != 1.0:
                if abs(total - 1.0) > SUM_CLEAN:
                    logger.warning(
                        "document %r token %d: renormalizing probabilities (sum %.6f)",
                        doc_id, position, total,
                    )
                probs = [p / total for p in probs]
            tokens.append(TokenPrediction(start, end, word_id, tuple(probs)))
        sets.append(PredictionSet(doc_id, coords, tuple(tokens)))
    return sets


def write_predictions(sets: Iterable[PredictionSet]) -> str:
    lines = []
    for pset in sets:
        record = {
            "doc_id": pset.doc_id,
            "coords": pset.coords,
            "tag_order": list(CANONICAL_TAGS),
            "tokens": [
                {"start": t.start, "end": t.end, "word_id": t.word_id, "probs": list(t.probs)}
                for t in pset.tokens
            ],
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def _word_groups(pset: PredictionSet) -> Iterator[list[TokenPrediction]]:
    group: list[TokenPrediction] = []
    for token in pset.tokens:
        if group and token.word_id != group[0].word_id:
            yield group
            group = []
        group.append(token)
    if group:
        yield group


def averaged_vector(group: Sequence[TokenPrediction]) -> list[float]:
    count = len(group)
    return [sum(token.probs[i] for token in group) / count for i in range(TAG_COUNT)]


def aggregate_average(pset: PredictionSet) -> list[WordPrediction]:
    """Average each word's subtoken vectors and pick the argmax tag.

    Ties resolve to the lower canonical index, so O wins over any entity
    tag at equal probability.
    """
    words: list[WordPrediction] = []
    for group in _word_groups(pset):
        mean = averaged_vector(group)
        best = 0
        for index in range(1, TAG_COUNT):
            if mean[index] > mean[best]:
                best = index
        words.append(
            WordPrediction(
                start=min(token.start for token in group),
                end=max(token.end for token in group),
                tag=CANONICAL_TAGS[best],
                score=mean[best],
            )
        )
    return words


def assemble_entities(
    words: Sequence[WordPrediction],
    offset_map: OffsetMap | None = None,
    coords: str = "raw",
) -> list[PredictedEntity]:
    """Decode word tags into entities; clean-coordinate spans are projected
    back to the original text through the offset map.

    The entity score is the mean of its word scores. Taking the minimum
    instead would give a more conservative confidence; mean is used here
    because it matches how the averaging strategy treats subtokens.
    """
    if coords == "clean" and offset_map is None:
        raise DataError("coords=clean requires the preprocessing offset map")
    entities: list[PredictedEntity] = []
    for label, first, last in decode_runs([word.tag for word in words]):
        start = words[first].start
        end = words[last - 1].end
        score = sum(word.score for word in words[first:last]) / (last - first)
        if coords == "clean":
            projected = offset_map.project_back(start, end)
            if projected is None:
                logger.warning("entity at clean (%d, %d) vanished in projection", start, end)
                continue
            start, end = projected
        entities.append(PredictedEntity(start, end, label, score))
    return entities


def _aligned_words(
    sets: Sequence[PredictionSet],
    gold: Sequence[TaggedSequence],
) -> Iterator[tuple[str, WordPrediction, str, Sequence[TokenPrediction]]]:
    gold_by_id = {sequence.doc_id: sequence for sequence in gold}
    if len(gold_by_id) != len(gold):
        raise AlignmentError("duplicate document ids in gold sequences")
    seen = set()
    for pset in sets:
        if pset.doc_id in seen:
            raise AlignmentError(f"duplicate prediction set for document {pset.doc_id!r}")
        seen.add(pset.doc_id)
        if pset.doc_id not in gold_by_id:
            raise AlignmentError(f"no gold sequence for document {pset.doc_id!r}")
        sequence = gold_by_id[pset.doc_id]
        groups = list(_word_groups(pset))
        if len(groups) != len(sequence.tokens):
            raise AlignmentError(
                f"document {pset.doc_id!r}: {len(groups)} predicted words "
                f"but {len(sequence.tokens)} gold tokens"
            )
        words = aggregate_average(pset)
        for word, gold_tag, group in zip(words, sequence.tags, groups):
            yield pset.doc_id, word, gold_tag, group
    missing = [doc_id for doc_id in gold_by_id if doc_id not in seen]
    if missing:
        raise AlignmentError(f"documents without predictions: {missing}")


def token_accuracy(sets: Sequence[PredictionSet], gold: Sequence[TaggedSequence]) -> float:
    """Fraction of words whose aggregated tag equals the gold tag, O included."""
    correct = 0
    total = 0
    for _, word, gold_tag, _ in _aligned_words(sets, gold):
        total += 1
        if word.tag == gold_tag:
            correct += 1
    if total == 0:
        raise DataError("no tokens to score")
    return correct / total


def cross_entropy_loss(sets: Sequence[PredictionSet], gold: Sequence[TaggedSequence]) -> float:
    """Mean over words of -ln p(gold tag) under the averaged vector."""
    total = 0
    loss = 0.0
    for _, _, gold_tag, group in _aligned_words(sets, gold):
        mean = averaged_vector(group)
        probability = max(mean[tag_index(gold_tag)], PROB_FLOOR)
        loss -= math.log(probability)
        total += 1
    if total == 0:
        raise DataError("no tokens to score")
    return loss / total


# --- Entity file format ------------------------------------------------

def write_entities(entities_by_doc: Mapping[str, Sequence[PredictedEntity]]) -> str:
    """Line-delimited {"id", "entities": [{start, end, label, score}]}."""
    lines = []
    for doc_id in entities_by_doc:
        record = {
            "id": doc_id,
            "entities": [
                {"start": e.start, "end": e.end, "label": e.label.value, "score": e.score}
                for e in entities_by_doc[doc_id]
            ],
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def read_entities(source: IO[str] | str | Iterable[str]) -> dict[str, list[PredictedEntity]]:
    result: dict[str, list[PredictedEntity]] = {}
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InterchangeError(f"line {lineno}: not valid JSON ({exc})") from exc
        for key in ("id", "entities"):
            if key not in record:
                raise InterchangeError(f"line {lineno}: missing key {key!r}")
        doc_id = str(record["id"])
        if doc_id in result:
            raise InterchangeError(f"line {lineno}: duplicate document {doc_id!r}")
        entities = []
        for entry in record["entities"]:
            try:
                label = Label(entry["label"])
            except ValueError:
                raise InterchangeError(
                    f"line {lineno}: unknown label {entry['label']!r}"
                ) from None
            entities.append(
                PredictedEntity(entry["start"], entry["end"], label, entry.get("score", 1.0))
            )
        result[doc_id] = entities
    return result
