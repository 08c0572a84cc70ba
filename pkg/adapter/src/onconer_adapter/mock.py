"""Mock oracle: one-hot probabilities on the gold annotations.

Lets the whole downstream pipeline run (and be checked for the perfect
score it must then produce) without any model download. Words longer
than four characters are split into two subtokens sharing a word id, so
the averaging path downstream gets exercised too.
"""

from __future__ import annotations

import math

from .core import CANONICAL_TAGS, TAG_INDEX, CorpusDocument, gold_word_tags, word_tokens


def _one_hot(tag: str) -> list[float]:
    probs = [0.0] * len(CANONICAL_TAGS)
    probs[TAG_INDEX[tag]] = 1.0
    return probs


def mock_tokens(document: CorpusDocument) -> list[dict]:
    tokens = word_tokens(document.text)
    tags = gold_word_tags(tokens, document.spans)
    entries: list[dict] = []
    for word_id, ((start, end), tag) in enumerate(zip(tokens, tags)):
        probs = _one_hot(tag)
        if end - start > 4:
            middle = start + math.ceil((end - start) / 2)
            pieces = [(start, middle), (middle, end)]
        else:
            pieces = [(start, end)]
        for piece_start, piece_end in pieces:
            entries.append(
                {
                    "start": piece_start,
                    "end": piece_end,
                    "word_id": word_id,
                    "probs": probs,
                }
            )
    return entries
