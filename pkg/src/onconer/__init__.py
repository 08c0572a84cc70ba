"""Clinical report NER pipeline toolkit.

Ingests span-annotated cancer reports, normalizes text with exact offset
maps, converts between spans and IOB2 tags, tags entities from a
hierarchical term dictionary or from externally supplied token
probabilities, and evaluates predictions with strict entity-level
metrics.
"""

from .corpus import (
    AnnotatedDocument,
    Corpus,
    Document,
    Label,
    LabelDistribution,
    Span,
    SplitSpec,
    label_distribution,
    parse_doccano,
    serialize_corpus,
    split,
    validate,
)
from .errors import DataError, FormatError, PipelineError
from .evaluate import (
    ComparisonReport,
    EvaluationReport,
    GlobalMetrics,
    LabelMetrics,
    compare_report,
    f1,
    match_strict,
    per_label_metrics,
)
from .gazetteer import CompiledMatcher, Dictionary, load_dictionary, normalize_term, tag_text
from .predict import (
    PredictedEntity,
    PredictionSet,
    aggregate_average,
    assemble_entities,
    cross_entropy_loss,
    parse_predictions,
    token_accuracy,
)
from .preprocess import OffsetMap, PreprocessedDocument, compose, preprocess_text, project_span
from .tagcodec import (
    CANONICAL_TAGS,
    TaggedSequence,
    Token,
    export_conll,
    import_conll,
    spans_to_tags,
    tags_to_spans,
    tokenize,
)

__version__ = "0.1.0"
