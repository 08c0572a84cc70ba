"""Command line entry point exposing the pipeline as subcommands.

Exit codes: 0 on success, 1 on data validation failures, 2 on usage
errors. Diagnostics go to standard error; data goes to files or standard
output. With fixed inputs and seed every subcommand produces
byte-identical output, independent of --jobs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluate as evaluate_mod
from . import gazetteer as gazetteer_mod
from . import predict as predict_mod
from . import preprocess as preprocess_mod
from . import report as report_mod
from . import tagcodec
from .errors import DataError, PipelineError

DEFAULT_SEED = 42


def _write_text(path: str | Path, content: str) -> None:
    Path(path).write_text(content, encoding="utf-8")


def _read_text(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(content: str, out: str | None) -> None:
    if out:
        _write_text(out, content)
    else:
        sys.stdout.write(content)


def _load_corpus(path: str, **kwargs) -> corpus_mod.Corpus:
    return corpus_mod.parse_doccano(_read_text(path), **kwargs)


def _write_maps(path: str, maps: dict[str, tuple[preprocess_mod.OffsetMap, tuple[str, ...]]]) -> None:
    lines = []
    for doc_id, (omap, passes) in maps.items():
        obj = {"id": doc_id, "passes": list(passes)}
        obj.update(omap.to_json_obj())
        lines.append(json.dumps(obj, ensure_ascii=False))
    _write_text(path, "".join(line + "\n" for line in lines))


def _read_maps(path: str) -> dict[str, preprocess_mod.OffsetMap]:
    maps = {}
    for line in _read_text(path).splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        maps[str(obj["id"])] = preprocess_mod.OffsetMap.from_json_obj(obj)
    return maps


def _parallel_map(function, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(function, items))


# --- Subcommands --------------------------------------------------------

def _cmd_ingest(args) -> int:
    corpus = _load_corpus(
        args.infile,
        drop_overlaps=args.drop_overlaps,
        ignore_unknown_labels=args.ignore_unknown_labels,
    )
    violations = corpus_mod.validate(corpus)
    for violation in violations:
        print(f"{violation.doc_id}: {violation.kind}: {violation.message}", file=sys.stderr)
    if violations:
        return 1
    _emit(corpus_mod.serialize_corpus(corpus), args.out)
    return 0


def _cmd_validate(args) -> int:
    corpus = _load_corpus(args.infile)
    violations = corpus_mod.validate(corpus)
    for violation in violations:
        print(f"{violation.doc_id}: {violation.kind}: {violation.message}", file=sys.stderr)
    if violations:
        return 1
    print(f"ok: {len(corpus)} documents", file=sys.stderr)
    return 0


def _cmd_stats(args) -> int:
    corpus = _load_corpus(args.infile)
    assignment = None
    if args.splits_dir:
        assignment = {}
        for name in corpus_mod.SPLIT_NAMES:
            path = Path(args.splits_dir) / f"{name}.jsonl"
            if path.exists():
                assignment[name] = corpus_mod.parse_doccano(_read_text(path)).ids()
    distribution = corpus_mod.label_distribution(corpus, assignment)
    _emit(report_mod.render_distribution(distribution, args.format), args.out)
    return 0


def _cmd_split(args) -> int:
    corpus = _load_corpus(args.infile)
    spec = corpus_mod.SplitSpec(
        args.train, args.val, args.test,
        seed=args.seed,
        stratify_by_category=not args.no_stratify,
    )
    result = corpus_mod.split(corpus, spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in result.as_dict().items():
        _write_text(out_dir / f"{name}.jsonl", corpus_mod.serialize_corpus(part))
    print(
        f"split {len(corpus)} documents into "
        f"{len(result.train)}/{len(result.validation)}/{len(result.test)}",
        file=sys.stderr,
    )
    return 0


def _preprocess_one(item):
    doc, passes = item
    prepared = preprocess_mod.preprocess(doc.text, passes, doc_id=doc.id)
    spans = []
    dropped = 0
    for span in doc.spans:
        projected = preprocess_mod.project_span(span, prepared.offset_map)
        if projected is None:
            dropped += 1
        else:
            spans.append(projected)
    clean_doc = corpus_mod.AnnotatedDocument(
        corpus_mod.Document(doc.id, prepared.clean_text, doc.document.category),
        corpus_mod.sort_spans(spans),
    )
    return clean_doc, prepared, dropped


def _cmd_preprocess(args) -> int:
    corpus = _load_corpus(args.infile)
    passes = preprocess_mod.resolve_passes(args.passes)
    results = _parallel_map(_preprocess_one, [(doc, passes) for doc in corpus], args.jobs)
    results.sort(key=lambda item: item[0].id)
    clean_corpus = corpus_mod.Corpus(tuple(item[0] for item in results))
    dropped = sum(item[2] for item in results)
    _write_text(args.out, corpus_mod.serialize_corpus(clean_corpus))
    if args.maps:
        _write_maps(args.maps, {item[1].doc_id: (item[1].offset_map, item[1].passes) for item in results})
    if dropped:
        print(f"warning: {dropped} gold spans fell inside deleted text", file=sys.stderr)
    return 0


def _cmd_convert(args) -> int:
    if args.to == "conll":
        corpus = _load_corpus(args.infile)
        sequences = []
        partial = 0
        for doc in corpus:
            sequence, partial_tokens = tagcodec.spans_to_tags(
                tagcodec.tokenize(doc.text), doc.spans, doc_id=doc.id
            )
            partial += partial_tokens
            sequences.append(sequence)
        if partial:
            print(f"warning: {partial} tokens only partially covered by spans", file=sys.stderr)
        _emit(tagcodec.export_conll(sequences), args.out)
        return 0
    sequences = tagcodec.import_conll(_read_text(args.infile))
    documents = []
    for sequence in sequences:
        text = " ".join(token.text for token in sequence.tokens)
        spans = tagcodec.tags_to_spans(sequence)
        documents.append(
            corpus_mod.AnnotatedDocument(
                corpus_mod.Document(sequence.doc_id, text), corpus_mod.sort_spans(spans)
            )
        )
    _emit(corpus_mod.serialize_corpus(corpus_mod.Corpus(tuple(documents))), args.out)
    return 0


def _tag_one(item):
    doc, matcher, omap = item
    spans = gazetteer_mod.tag_text(matcher, doc.text, omap)
    return doc.id, [
        predict_mod.PredictedEntity(span.start, span.end, span.label, 1.0) for span in spans
    ]


def _cmd_tag(args) -> int:
    with open(args.dict, encoding="utf-8") as handle:
        dictionary = gazetteer_mod.load_dictionary(handle)
    matcher = gazetteer_mod.compile_dictionary(dictionary)
    corpus = _load_corpus(args.infile)
    maps = _read_maps(args.maps) if args.maps else {}
    items = [(doc, matcher, maps.get(doc.id)) for doc in corpus]
    results = _parallel_map(_tag_one, items, args.jobs)
    entities = dict(sorted(results, key=lambda pair: pair[0]))
    _emit(predict_mod.write_entities(entities), args.out)
    return 0


def _cmd_aggregate(args) -> int:
    sets = predict_mod.parse_predictions(_read_text(args.infile))
    maps = _read_maps(args.maps) if args.maps else {}
    entities = {}
    for pset in sorted(sets, key=lambda p: p.doc_id):
        if pset.doc_id in entities:
            raise DataError(f"duplicate prediction record for document {pset.doc_id!r}")
        omap = maps.get(pset.doc_id)
        if pset.coords == "clean" and omap is None:
            raise DataError(f"document {pset.doc_id!r} uses clean coords but no map was given")
        words = predict_mod.aggregate_average(pset)
        entities[pset.doc_id] = predict_mod.assemble_entities(words, omap, pset.coords)
    _emit(predict_mod.write_entities(entities), args.out)
    return 0


def _gold_sequences(corpus: corpus_mod.Corpus) -> list[tagcodec.TaggedSequence]:
    sequences = []
    for doc in corpus:
        sequence, _ = tagcodec.spans_to_tags(tagcodec.tokenize(doc.text), doc.spans, doc_id=doc.id)
        sequences.append(sequence)
    return sequences


def _cmd_evaluate(args) -> int:
    gold_corpus = _load_corpus(args.gold)
    predicted = predict_mod.read_entities(_read_text(args.pred))
    gold = {doc.id: list(doc.spans) for doc in gold_corpus}
    accuracy = loss = None
    if args.interchange:
        sets = predict_mod.parse_predictions(_read_text(args.interchange))
        tokens_corpus = _load_corpus(args.tokens_corpus) if args.tokens_corpus else gold_corpus
        sequences = _gold_sequences(tokens_corpus)
        accuracy = predict_mod.token_accuracy(sets, sequences)
        loss = predict_mod.cross_entropy_loss(sets, sequences)
    result = evaluate_mod.evaluate(gold, predicted, accuracy, loss)
    _write_text(args.out, json.dumps(result.to_json_obj(), ensure_ascii=False, indent=2) + "\n")
    print(report_mod.render_tables(result, "txt"), end="", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    gold_corpus = _load_corpus(args.gold)
    predicted = predict_mod.read_entities(_read_text(args.pred))
    gold = {doc.id: list(doc.spans) for doc in gold_corpus}
    result = evaluate_mod.compare_report(gold, predicted)
    _write_text(
        args.out,
        json.dumps(evaluate_mod.comparison_to_json_obj(result), ensure_ascii=False, indent=2) + "\n",
    )
    print(report_mod.render_comparison_table(result, "txt"), end="", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    in_dir = Path(args.indir)
    out_dir = Path(args.out_dir) if args.out_dir else in_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote = []

    metrics_path = in_dir / "metrics.json"
    if metrics_path.exists():
        result = evaluate_mod.EvaluationReport.from_json_obj(json.loads(_read_text(metrics_path)))
        content = report_mod.render_tables(result, args.format)
        path = out_dir / f"metrics.{args.format}"
        _write_text(path, content)
        wrote.append(path)

    comparison_path = in_dir / "comparison.json"
    if comparison_path.exists():
        comparison = evaluate_mod.comparison_from_json_obj(json.loads(_read_text(comparison_path)))
        path = out_dir / f"comparison.{args.format}"
        _write_text(path, report_mod.render_comparison_table(comparison, args.format))
        wrote.append(path)
        if args.charts:
            charts_dir = Path(args.charts)
            charts_dir.mkdir(parents=True, exist_ok=True)
            charts = report_mod.emit_chart_data(comparison)
            for chart in charts:
                if chart.kind == "pie":
                    path = charts_dir / "pie.csv"
                    _write_text(path, report_mod.render_pie_csv(chart))
                    wrote.append(path)
                else:
                    path = charts_dir / "bars.csv"
                    _write_text(path, report_mod.render_bars_csv(chart))
                    wrote.append(path)
            path = charts_dir / "charts.json"
            _write_text(path, report_mod.render_charts_json(charts))
            wrote.append(path)

    if not wrote:
        raise DataError(f"nothing to report: no metrics.json or comparison.json under {in_dir}")
    for path in wrote:
        print(f"wrote {path}", file=sys.stderr)
    return 0


# --- Parser -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onconer",
        description="Clinical report NER pipeline: ingest, preprocess, tag, aggregate, evaluate, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an annotation export and write the canonical form")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None, help="default: standard output")
    p.add_argument("--drop-overlaps", action="store_true",
                   help="keep the longer of two overlapping gold spans instead of aborting")
    p.add_argument("--ignore-unknown-labels", action="store_true")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("validate", help="report invariant violations")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stats", help="label distribution table")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--splits-dir", default=None, help="directory with train/validation/test.jsonl")
    p.add_argument("--format", choices=report_mod.FORMATS, default="txt")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("split", help="stratified train/validation/test split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("preprocess", help="normalize text, keeping an offset map per document")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="cleaned corpus with projected spans")
    p.add_argument("--maps", default=None, help="offset map file for projecting back")
    p.add_argument("--passes", default="all",
                   help="all, none or a comma list of " + ",".join(preprocess_mod.PASS_ORDER))
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("convert", help="convert between span annotations and CoNLL tokens")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--to", choices=("conll", "doccano"), required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("tag", help="dictionary tagging")
    p.add_argument("--dict", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--maps", default=None,
                   help="offset maps produced by preprocess when tagging cleaned text")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_tag)

    p = sub.add_parser("aggregate", help="average subword predictions into entities")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--maps", default=None)
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("evaluate", help="strict entity metrics against gold annotations")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.add_argument("--interchange", default=None,
                   help="prediction interchange for token accuracy and loss")
    p.add_argument("--tokens-corpus", default=None,
                   help="corpus whose text matches the interchange coordinates (default: --gold)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="real vs predicted entity counts per label")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True, help="comparison JSON path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="render tables and chart data from evaluation output")
    p.add_argument("--in", dest="indir", required=True, help="directory with metrics/comparison JSON")
    p.add_argument("--format", choices=report_mod.FORMATS, default="csv")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--charts", default=None, help="directory for chart data files")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
