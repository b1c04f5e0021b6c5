"""Two-stage knowledge pipeline: LLM relation extraction, then in-context
knowledge editing, with the scoring used to judge both stages."""

from seqfusion.corpus import (
    Corpus,
    DatasetKind,
    Relation,
    RelationLabel,
    Sample,
    SpanMention,
    load_corpus,
    save_corpus,
    split_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "DatasetKind",
    "Relation",
    "RelationLabel",
    "Sample",
    "SpanMention",
    "load_corpus",
    "save_corpus",
    "split_corpus",
]
