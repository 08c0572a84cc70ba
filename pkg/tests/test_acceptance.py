"""Acceptance suite: one test per release criterion.

Each test prints a single PASS/FAIL line so a full run reads as a
checklist. The reference metric tables and count series below are fixed
reproduction targets; the tests check the toolkit's arithmetic against
them.
"""

import json
import math
import random
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import mpmath
import pytest

from onconer.cli import main
from onconer.corpus import (
    CATEGORIES,
    MATCH_PRIORITY,
    Corpus,
    Label,
    SplitSpec,
    check_complete_row,
    label_distribution,
    split,
    split_sizes,
)
from onconer.evaluate import ComparisonReport, f1, per_label_metrics
from onconer.gazetteer import (
    Dictionary,
    DictionaryEntry,
    _normalize_with_map,
    compile_dictionary,
    is_word_boundary_match,
    normalize_term,
    resolve_matches,
)
from onconer.predict import (
    PredictionSet,
    TokenPrediction,
    aggregate_average,
    cross_entropy_loss,
    token_accuracy,
)
from onconer.preprocess import preprocess_text
from onconer.report import emit_chart_data, round_half_up
from onconer.tagcodec import (
    CANONICAL_TAGS,
    TaggedSequence,
    Token,
    spans_to_tags,
    tag_index,
    tags_to_spans,
    tokenize,
)
from onconer.corpus import AnnotatedDocument, Document, Span, sort_spans

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"

LABELS = list(Label)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


# --- Reference values: per-label (printed F1, precision, recall) ----------

BREAST_VALIDATION = {
    "EVOL": (0.0, 0.0, 0.0),
    "FACTR": (0.5, 0.4762, 0.5263),
    "MET": (0.8289, 0.8252, 0.8288),
    "PAT": (0.6578, 0.6538, 0.6618),
    "SINT": (0.7999, 0.7368, 0.8750),
    "TTO": (0.7222, 0.6964, 0.75),
}
BREAST_TEST = {
    "EVOL": (0.0, 0.0, 0.0),
    "FACTR": (0.7059, 0.6207, 0.8181),
    "MET": (0.8057, 0.7747, 0.8392),
    "PAT": (0.6503, 0.6444, 0.6563),
    "SINT": (0.6383, 0.5357, 0.7895),
    "TTO": (0.7027, 0.6771, 0.7303),
}
COMPLETE_VALIDATION = {
    "EVOL": (0.3684, 0.4118, 0.3333),
    "FACTR": (0.6441, 0.6552, 0.6333),
    "MUTAC": (0.8195, 0.7304, 0.9333),
    "ANTPERSON": (0.7027, 0.65, 0.7647),
    "MET": (0.7867, 0.7809, 0.7926),
    "PAT": (0.6657, 0.6648, 0.6666),
    "SINT": (0.6593, 0.6403, 0.6794),
    "TTO": (0.7751, 0.7619, 0.7887),
}
COMPLETE_TEST = {
    "EVOL": (0.375, 0.3462, 0.4091),
    "FACTR": (0.56, 0.4666, 0.7),
    "MUTAC": (0.8, 0.6666, 1.0),
    "ANTPERSON": (0.8571, 0.8571, 0.8571),
    "MET": (0.8113, 0.7917, 0.8320),
    "PAT": (0.6564, 0.6754, 0.6384),
    "SINT": (0.6915, 0.6842, 0.6989),
    "TTO": (0.8122, 0.8696, 0.7619),
}

#: (label, real, correct predicted, incorrect predicted) series behind the
#: reference hit/miss pies.
VALIDATION_COMPARISON = [
    ("EVOL", 2, 0, 0),
    ("FACTR", 18, 22, 1),
    ("MET", 946, 941, 15),
    ("NO_LABEL", 3, 2, 0),
    ("PAT", 417, 398, 18),
    ("SINT", 19, 17, 0),
    ("TTO", 49, 45, 3),
]
COMPLETE_COMPARISON = [
    ("EVOL", 22, 12, 0),
    ("FACTR", 59, 49, 3),
    ("ANTPERSON", 17, 17, 3),
    ("MUTAC", 96, 109, 2),
    ("MET", 1161, 1120, 7),
    ("PAT", 750, 747, 11),
    ("SINT", 132, 120, 7),
    ("TTO", 147, 140, 2),
]

#: Reference label distribution rows (train, validation, test, printed
#: complete), complete dataset then breast subset.
COMPLETE_DISTRIBUTION = {
    "labels": ["EVOL", "FACTR", "MUTAC", "ANTPERSON", "MET", "PAT", "SINT", "TTO"],
    "train": [42, 107, 242, 46, 1916, 1432, 327, 286],
    "validation": [21, 60, 90, 17, 1178, 746, 131, 143],
    "test": [22, 20, 10, 14, 711, 566, 93, 105],
    "complete": [85, 187, 342, 77, 3805, 2744, 551, 534],
}
BREAST_DISTRIBUTION = {
    "labels": ["EVOL", "FACTR", "MET", "PAT", "SINT", "TTO"],
    "train": [0, 48, 1237, 814, 54, 104],
    "validation": [2, 19, 647, 410, 16, 53],
    "test": [4, 22, 759, 544, 38, 89],
    "complete": [2, 19, 647, 410, 16, 53],
}


def rows_to_maps(table):
    labels = [Label(name) for name in table["labels"]]
    splits = {
        name: dict(zip(labels, table[name]))
        for name in ("train", "validation", "test")
    }
    return splits, dict(zip(labels, table["complete"]))


# --- 1. Harmonic-mean reproduction ----------------------------------------

def test_harmonic_mean_reproduction():
    with criterion("harmonic-mean reproduction of reference tables"):
        started = time.monotonic()
        inconsistent = []
        for table_name, table in (
            ("breast-validation", BREAST_VALIDATION),
            ("breast-test", BREAST_TEST),
            ("complete-validation", COMPLETE_VALIDATION),
            ("complete-test", COMPLETE_TEST),
        ):
            for label, (printed_f1, precision, recall) in table.items():
                computed = f1(precision, recall)
                if abs(computed - printed_f1) > 5e-4:
                    inconsistent.append((table_name, label, computed, printed_f1))
        # exactly one printed row disagrees with its own precision/recall
        assert inconsistent == [
            ("breast-validation", "MET", pytest.approx(0.8270, abs=5e-4), 0.8289)
        ]
        for label in ("FACTR", "PAT", "SINT", "TTO"):
            printed_f1, precision, recall = BREAST_VALIDATION[label]
            assert abs(f1(precision, recall) - printed_f1) <= 5e-4
        assert time.monotonic() - started < 1.0


# --- 2. Hit/miss reproduction ----------------------------------------------

def test_hit_miss_reproduction():
    with criterion("hit/miss pie reproduction from reference count series"):
        started = time.monotonic()
        validation = ComparisonReport.from_counts(VALIDATION_COMPARISON)
        assert validation.hit_fraction() == Fraction(1425, 1462)
        pie, bars = emit_chart_data(validation)
        assert pie.series["percent"] == (97.5, 2.5)
        assert bars.categories == (
            "EVOL", "FACTR", "MET", "NO_LABEL", "PAT", "SINT", "TTO"
        )

        complete = ComparisonReport.from_counts(COMPLETE_COMPARISON)
        assert complete.hit_fraction() == Fraction(2314, 2349)
        pie, bars = emit_chart_data(complete)
        assert pie.series["percent"] == (98.5, 1.5)
        assert bars.categories == (
            "EVOL", "FACTR", "ANTPERSON", "MUTAC", "MET", "PAT", "SINT", "TTO"
        )

        assert round_half_up(Fraction(1425, 1462) * 100) == Fraction(975, 10)
        assert round_half_up(Fraction(2314, 2349) * 100) == Fraction(985, 10)
        assert time.monotonic() - started < 1.0


# --- 3. Distribution-sum property --------------------------------------------

def random_corpus(rng, max_docs=12, with_spans=True):
    documents = []
    for index in range(rng.randint(1, max_docs)):
        spans = []
        cursor = 0
        if with_spans:
            for _ in range(rng.randint(0, 6)):
                start = cursor + rng.randint(0, 2)
                end = start + rng.randint(1, 3)
                spans.append(Span(start, end, rng.choice(LABELS)))
                cursor = end
        text = "x" * max(cursor, 1)
        documents.append(
            AnnotatedDocument(
                Document(f"d{index}", text, rng.choice(CATEGORIES)),
                sort_spans(spans),
            )
        )
    return Corpus(tuple(documents))


def test_distribution_sum_property():
    with criterion("distribution complete row equals split sums"):
        rng = random.Random(100)
        for _ in range(100):
            corpus = random_corpus(rng)
            ids = corpus.ids()
            rng.shuffle(ids)
            first, second = rng.randint(0, len(ids)), rng.randint(0, len(ids))
            first, second = min(first, second), max(first, second)
            assignment = {
                "train": ids[:first],
                "validation": ids[first:second],
                "test": ids[second:],
            }
            distribution = label_distribution(corpus, assignment)
            for label in Label:
                assert distribution.complete[label] == sum(
                    distribution.splits[name][label] for name in assignment
                )
            assert check_complete_row(distribution.splits, distribution.complete) == []

        # the reference complete-dataset rows satisfy the identity
        splits, complete = rows_to_maps(COMPLETE_DISTRIBUTION)
        assert check_complete_row(splits, complete) == []
        assert 1916 + 1178 + 711 == 3805  # spot check, MET column

        # the reference breast-set complete row repeats the validation row
        # instead of the column sums and is flagged
        splits, complete = rows_to_maps(BREAST_DISTRIBUTION)
        flagged = check_complete_row(splits, complete)
        assert set(flagged) == {
            Label.EVOL, Label.FACTR, Label.MET, Label.PAT, Label.SINT, Label.TTO
        }


# --- 4. Split protocol ---------------------------------------------------------

def test_split_protocol():
    with criterion("split protocol: sizes, stratification, determinism"):
        corpus = Corpus(tuple(
            AnnotatedDocument(Document(f"d{i:03d}", "texto", "breast_pathology"), ())
            for i in range(200)
        ))
        spec = SplitSpec(0.5, 0.25, 0.25, seed=5)
        result = split(corpus, spec)
        assert (len(result.train), len(result.validation), len(result.test)) == (100, 50, 50)

        rng = random.Random(200)
        for trial in range(1000):
            corpus = random_corpus(rng, max_docs=20, with_spans=False)
            spec = SplitSpec(0.5, 0.25, 0.25, seed=trial)
            result = split(corpus, spec)
            for category in CATEGORIES:
                total = sum(
                    1 for doc in corpus if doc.document.category == category
                )
                expected = split_sizes(total, spec.fractions)
                observed = tuple(
                    sum(1 for doc in part if doc.document.category == category)
                    for part in (result.train, result.validation, result.test)
                )
                assert observed == expected, (trial, category)
            assert split(corpus, spec) == result  # deterministic

        big = Corpus(tuple(
            AnnotatedDocument(Document(f"d{i:03d}", "x", "lung_pathology"), ())
            for i in range(60)
        ))
        first = split(big, SplitSpec(0.5, 0.25, 0.25, seed=1))
        second = split(big, SplitSpec(0.5, 0.25, 0.25, seed=2))
        assert first != second  # different seeds diverge


# --- 5. Codec round trip ---------------------------------------------------------

def random_tokens(rng, max_words=15):
    text = " ".join(
        "".join(rng.choice("abcñé") for _ in range(rng.randint(1, 6)))
        for _ in range(rng.randint(1, max_words))
    )
    return tokenize(text)


def test_codec_round_trip_and_totality():
    with criterion("span/tag codec round trip and decoder totality"):
        rng = random.Random(300)
        for _ in range(1000):
            tokens = random_tokens(rng)
            spans = []
            index = 0
            while index < len(tokens):
                if rng.random() < 0.45:
                    last = min(len(tokens) - 1, index + rng.randint(0, 2))
                    spans.append(Span(tokens[index].start, tokens[last].end, rng.choice(LABELS)))
                    index = last + 1
                else:
                    index += 1
            sequence, partial = spans_to_tags(tokens, spans)
            assert partial == 0
            assert tags_to_spans(sequence) == spans

        alphabet = list(CANONICAL_TAGS) + ["I-", "B-", "X", "", "B-FOO", "i-met", "O O"]
        for _ in range(1000):
            count = rng.randint(0, 12)
            tokens = tuple(Token("t", i * 2, i * 2 + 1) for i in range(count))
            tags = tuple(rng.choice(alphabet) for _ in range(count))
            spans = tags_to_spans(TaggedSequence("d", tokens, tags))  # never raises
            for prev, cur in zip(spans, spans[1:]):
                assert prev.end <= cur.start


# --- 6. Gazetteer oracle -----------------------------------------------------------

def test_gazetteer_oracle():
    with criterion("gazetteer automaton equals brute-force scanner"):
        rng = random.Random(400)
        alphabet = "abmcé ñó-t."
        for _ in range(1000):
            entries = []
            seen = set()
            for _ in range(rng.randint(0, 50)):
                term = normalize_term(
                    "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 7)))
                )
                label = rng.choice(LABELS)
                if term and (term, label) not in seen:
                    seen.add((term, label))
                    entries.append((term, label))
            matcher = compile_dictionary(
                Dictionary(tuple(DictionaryEntry(t, l, (l.value,)) for t, l in entries))
            )
            text = "".join(rng.choice(alphabet + "ABÉ,") for _ in range(rng.randint(0, 500)))
            normalized, _ = _normalize_with_map(text)

            automaton = sorted(set(matcher.iter_matches(normalized)))
            brute = []
            for term, label in entries:
                offset = 0
                while True:
                    found = normalized.find(term, offset)
                    if found < 0:
                        break
                    brute.append((found, found + len(term), label))
                    offset = found + 1
            assert automaton == sorted(set(brute))

            bounded = [
                m for m in brute if is_word_boundary_match(normalized, m[0], m[1])
            ]
            # independent quadratic selection
            expected = []
            remaining = sorted(set(bounded))
            while remaining:
                leftmost = min(m[0] for m in remaining)
                longest = max(m[1] for m in remaining if m[0] == leftmost)
                ties = [m for m in remaining if (m[0], m[1]) == (leftmost, longest)]
                best = min(ties, key=lambda m: MATCH_PRIORITY.index(m[2]))
                expected.append(best)
                remaining = [m for m in remaining if m[0] >= best[1]]
            assert resolve_matches(bounded) == expected



# --- 7. Aggregation oracle -----------------------------------------------------------

def random_interchange_set(rng, doc_id="d"):
    tokens = []
    position = 0
    for word_id in range(rng.randint(0, 10)):
        for _ in range(rng.randint(1, 3)):
            raw = [rng.random() + 1e-9 for _ in range(17)]
            total = sum(raw)
            tokens.append(
                TokenPrediction(position, position + 2, word_id, tuple(v / total for v in raw))
            )
            position += 2
    return PredictionSet(doc_id, "raw", tuple(tokens))


def test_aggregation_oracle():
    with criterion("average aggregation, accuracy and loss oracles"):
        rng = random.Random(500)
        mpmath.mp.dps = 40
        for _ in range(1000):
            pset = random_interchange_set(rng)
            words = aggregate_average(pset)

            groups = {}
            for token in pset.tokens:
                groups.setdefault(token.word_id, []).append(token)
            assert len(words) == len(groups)
            for word, (word_id, group) in zip(words, sorted(groups.items())):
                mean = [
                    sum(t.probs[i] for t in group) / len(group) for i in range(17)
                ]
                best = max(range(17), key=lambda i: (mean[i], -i))
                assert word.tag == CANONICAL_TAGS[best]
                assert abs(word.score - mean[best]) <= 1e-9
                assert word.start == min(t.start for t in group)
                assert word.end == max(t.end for t in group)

        # loss against an arbitrary-precision recomputation
        for _ in range(50):
            pset = random_interchange_set(rng)
            groups = {}
            for token in pset.tokens:
                groups.setdefault(token.word_id, []).append(token)
            if not groups:
                continue
            gold_tags = [rng.choice(CANONICAL_TAGS) for _ in groups]
            gold = TaggedSequence(
                "d",
                tuple(Token("w", i * 2, i * 2 + 1) for i in range(len(groups))),
                tuple(gold_tags),
            )
            loss = cross_entropy_loss([pset], [gold])
            exact = mpmath.mpf(0)
            for (word_id, group), tag in zip(sorted(groups.items()), gold_tags):
                mean = mpmath.fsum(
                    [mpmath.mpf(t.probs[tag_index(tag)]) for t in group]
                ) / len(group)
                exact -= mpmath.log(mean)
            assert abs(loss - float(exact / len(groups))) < 1e-9

        # one-hot on gold: accuracy 1, loss at the clamp floor
        tags = ["B-MET", "O", "B-PAT", "I-PAT", "O"]
        tokens = []
        for i, tag in enumerate(tags):
            probs = [0.0] * 17
            probs[tag_index(tag)] = 1.0
            tokens.append(TokenPrediction(i * 2, i * 2 + 1, i, tuple(probs)))
        pset = PredictionSet("d", "raw", tuple(tokens))
        gold = TaggedSequence(
            "d", tuple(Token("w", i * 2, i * 2 + 1) for i in range(len(tags))), tuple(tags)
        )
        assert token_accuracy([pset], [gold]) == 1.0
        assert cross_entropy_loss([pset], [gold]) <= 1e-10


# --- 8. Offset projection -----------------------------------------------------------

PROJECTION_ALPHABET = (
    list("abcdefghinor stuz")
    + ["á", "é", "ó", "ñ", "é", "  ", "\t", " \t ", "-\nn", "-\nB", "\n",
       "\n\n", "•", "– ", "estadiopT2", "pT1N0M0", "5–10", ".", ",", "(", ")"]
)


def test_offset_projection():
    with criterion("offset projection round trip through all passes"):
        rng = random.Random(600)
        for _ in range(1000):
            text = "".join(
                rng.choice(PROJECTION_ALPHABET) for _ in range(rng.randint(0, 40))
            )[:200]
            clean, omap, _ = preprocess_text(text)
            tokens = tokenize(text)
            if len(tokens) <= 16:
                spans = [
                    (tokens[i].start, tokens[j].end)
                    for i in range(len(tokens))
                    for j in range(i, len(tokens))
                ]
            else:
                spans = [(t.start, t.end) for t in tokens]
                for _ in range(24):
                    i = rng.randrange(len(tokens))
                    j = rng.randrange(i, len(tokens))
                    spans.append((tokens[i].start, tokens[j].end))
            for start, end in spans:
                projected = omap.project(start, end)  # never panics
                if projected is None:
                    continue
                back = omap.project_back(*projected)
                assert back is not None
                isolated, _, _ = preprocess_text(text[back[0] : back[1]])
                assert isolated == clean[projected[0] : projected[1]]


# --- 9. Evaluation oracle ------------------------------------------------------------

def test_evaluation_oracle():
    with criterion("per-label metrics equal brute-force matching"):
        rng = random.Random(700)
        for _ in range(1000):
            def random_entities():
                spans = []
                cursor = 0
                for _ in range(rng.randint(0, 20)):
                    start = cursor + rng.randint(0, 2)
                    end = start + rng.randint(1, 3)
                    spans.append(Span(start, end, rng.choice(LABELS)))
                    cursor = end
                return spans

            gold = {f"d{i}": random_entities() for i in range(rng.randint(1, 3))}
            pred = {f"d{i}": random_entities() for i in range(rng.randint(1, 3))}
            table = {m.label: m for m in per_label_metrics(gold, pred)}
            for label in Label:
                tp = fp = fn = 0
                for doc_id in set(gold) | set(pred):
                    g = {
                        (s.start, s.end)
                        for s in gold.get(doc_id, [])
                        if s.label == label
                    }
                    p = {
                        (s.start, s.end)
                        for s in pred.get(doc_id, [])
                        if s.label == label
                    }
                    tp += len(g & p)
                    fp += len(p - g)
                    fn += len(g - p)
                metrics = table[label]
                assert (metrics.tp, metrics.fp, metrics.fn) == (tp, fp, fn)
                assert metrics.support == tp + fn


# --- 10. End-to-end golden run --------------------------------------------------------

def test_end_to_end_reproduces_golden_report(tmp_path):
    with criterion("end-to-end pipeline reproduces the golden report byte for byte"):
        work = tmp_path / "run"
        work.mkdir()
        charts = work / "charts"

        assert main(["ingest", "--in", str(DATA / "corpus.jsonl"),
                     "--out", str(work / "corpus_canonical.jsonl")]) == 0
        assert main(["aggregate", "--in", str(DATA / "predictions.jsonl"),
                     "--out", str(work / "entities.jsonl")]) == 0
        assert main(["evaluate", "--gold", str(DATA / "corpus.jsonl"),
                     "--pred", str(work / "entities.jsonl"),
                     "--out", str(work / "metrics.json"),
                     "--interchange", str(DATA / "predictions.jsonl")]) == 0
        assert main(["compare", "--gold", str(DATA / "corpus.jsonl"),
                     "--pred", str(work / "entities.jsonl"),
                     "--out", str(work / "comparison.json")]) == 0
        for fmt in ("csv", "md", "txt"):
            assert main(["report", "--in", str(work), "--format", fmt,
                         "--charts", str(charts)]) == 0

        golden_files = [
            "corpus_canonical.jsonl",
            "entities.jsonl",
            "metrics.json",
            "comparison.json",
            "metrics.csv", "metrics.md", "metrics.txt",
            "comparison.csv", "comparison.md", "comparison.txt",
            "charts/pie.csv", "charts/bars.csv", "charts/charts.json",
        ]
        for name in golden_files:
            produced = (work / name).read_bytes()
            expected = (GOLDEN / name).read_bytes()
            assert produced == expected, f"{name} differs from golden copy"

        # the golden metrics themselves match the hand-computed counts
        payload = json.loads((work / "metrics.json").read_text(encoding="utf-8"))
        assert payload["global"]["tp"] == 10
        assert payload["global"]["fp"] == 3
        assert payload["global"]["fn"] == 3
        assert payload["global"]["precision"] == pytest.approx(10 / 13)
        assert payload["global"]["accuracy"] == pytest.approx(51 / 55)
        expected_loss = -(
            math.log(0.7) + math.log(0.45) + math.log(0.2)
            + math.log(0.4) + math.log(0.3)
        ) / 55
        assert payload["global"]["loss"] == pytest.approx(expected_loss, abs=1e-12)
        comparison = json.loads((work / "comparison.json").read_text(encoding="utf-8"))
        assert comparison["hit_fraction"] == [5, 6]
