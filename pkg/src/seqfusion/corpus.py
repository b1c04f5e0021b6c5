"""Dataset model and I/O for drug-combination (DCE) and moderating-effect
(MEE) corpora.

Records are JSON objects with ``sentence``, ``spans``, ``paragraph`` and
``gold`` keys. Files may be a single JSON array or JSON-lines.
"""

from __future__ import annotations

import enum
import json
import os
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from seqfusion.errors import DataError


class DatasetKind(str, enum.Enum):
    DCE = "DCE"
    MEE = "MEE"

    @classmethod
    def parse(cls, value: "str | DatasetKind") -> "DatasetKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise DataError(f"unknown dataset kind {value!r} (expected DCE or MEE)") from None


class RelationLabel(str, enum.Enum):
    POS = "POS"
    NEG = "NEG"
    COMB = "COMB"
    NO_COMB = "NO_COMB"


@dataclass(frozen=True)
class SpanMention:
    span_id: int
    text: str
    start: int | None = None
    end: int | None = None
    token_start: int | None = None
    token_end: int | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"span_id": self.span_id, "text": self.text}
        for key in ("start", "end", "token_start", "token_end"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True)
class Relation:
    """A labelled set of two or more participating span ids."""

    label: RelationLabel
    spans: frozenset[int]
    is_context_needed: bool | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", RelationLabel(self.label))
        object.__setattr__(self, "spans", frozenset(self.spans))
        if len(self.spans) < 2:
            raise DataError(f"a relation needs at least 2 spans, got {sorted(self.spans)}")

    @property
    def sorted_spans(self) -> tuple[int, ...]:
        return tuple(sorted(self.spans))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"class": self.label.value, "spans": list(self.sorted_spans)}
        if self.is_context_needed is not None:
            out["is_context_needed"] = self.is_context_needed
        return out


@dataclass(frozen=True)
class Sample:
    id: str
    sentence: str
    spans: tuple[SpanMention, ...]
    paragraph: str
    gold: tuple[Relation, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict, compare=True, hash=False)

    @property
    def span_ids(self) -> frozenset[int]:
        return frozenset(s.span_id for s in self.spans)

    def span(self, span_id: int) -> SpanMention:
        for s in self.spans:
            if s.span_id == span_id:
                return s
        raise KeyError(span_id)

    def input_dict(self) -> dict[str, Any]:
        """The model-facing view: no gold, no metadata."""
        return {
            "sentence": self.sentence,
            "spans": [s.to_dict() for s in self.spans],
            "paragraph": self.paragraph,
        }

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id}
        out.update(self.input_dict())
        out["gold"] = [r.to_dict() for r in self.gold]
        for key, value in self.extra.items():
            out.setdefault(key, value)
        return out


@dataclass(frozen=True)
class Corpus:
    samples: tuple[Sample, ...]
    kind: DatasetKind

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for s in self.samples:
            if s.id in seen:
                raise DataError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}

    def get(self, sample_id: str) -> Sample:
        for s in self.samples:
            if s.id == sample_id:
                return s
        raise KeyError(sample_id)


_KNOWN_KEYS = {"id", "sentence", "result", "spans", "paragraph", "gold"}


def _maybe_json(value: Any, what: str) -> Any:
    # the published examples quote the span list as a string
    if isinstance(value, str):
        try:
            return json.loads(value)
        except json.JSONDecodeError as exc:
            raise DataError(f"{what} is a string but not valid JSON: {exc}") from None
    return value


def _opt_int(raw: Mapping[str, Any], key: str) -> int | None:
    value = raw.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise DataError(f"span field {key!r} must be an integer, got {value!r}")
    return value


def parse_span(raw: Any, kind: DatasetKind) -> SpanMention:
    if not isinstance(raw, Mapping):
        raise DataError(f"span entry must be an object, got {type(raw).__name__}")
    span_id = raw.get("span_id")
    if isinstance(span_id, bool) or not isinstance(span_id, int) or span_id < 0:
        raise DataError(f"span_id must be a non-negative integer, got {span_id!r}")
    text = raw.get("text")
    if not isinstance(text, str) or not text:
        raise DataError(f"span {span_id} has no text")
    if kind is DatasetKind.MEE:
        return SpanMention(span_id, text)
    span = SpanMention(
        span_id,
        text,
        _opt_int(raw, "start"),
        _opt_int(raw, "end"),
        _opt_int(raw, "token_start"),
        _opt_int(raw, "token_end"),
    )
    if span.start is not None and span.end is not None and span.start > span.end:
        raise DataError(f"span {span_id}: start {span.start} > end {span.end}")
    if (
        span.token_start is not None
        and span.token_end is not None
        and span.token_start > span.token_end
    ):
        raise DataError(f"span {span_id}: token_start > token_end")
    return span


def relation_from_dict(raw: Any, span_ids: Iterable[int] | None = None) -> Relation:
    if not isinstance(raw, Mapping):
        raise DataError(f"relation must be an object, got {type(raw).__name__}")
    label = raw.get("class")
    try:
        label = RelationLabel(label)
    except ValueError:
        raise DataError(f"unknown relation label {label!r}") from None
    spans = raw.get("spans")
    if not isinstance(spans, list) or not all(
        isinstance(x, int) and not isinstance(x, bool) for x in spans
    ):
        raise DataError(f"relation spans must be a list of integers, got {spans!r}")
    if len(set(spans)) != len(spans):
        raise DataError(f"relation repeats a span id: {spans!r}")
    if span_ids is not None:
        known = set(span_ids)
        missing = [x for x in spans if x not in known]
        if missing:
            raise DataError(f"relation references unknown span id(s) {missing}")
    ctx = raw.get("is_context_needed")
    if ctx is not None and not isinstance(ctx, bool):
        raise DataError(f"is_context_needed must be boolean, got {ctx!r}")
    return Relation(label, frozenset(spans), ctx)


def sample_from_dict(raw: Any, kind: DatasetKind, default_id: str) -> Sample:
    if not isinstance(raw, Mapping):
        raise DataError(f"record must be an object, got {type(raw).__name__}")
    sentence = raw.get("sentence", raw.get("result"))
    if not isinstance(sentence, str) or not sentence.strip():
        raise DataError("missing or empty 'sentence'")
    paragraph = raw.get("paragraph")
    if not isinstance(paragraph, str) or not paragraph.strip():
        raise DataError("missing or empty 'paragraph'")
    if "spans" not in raw:
        raise DataError("missing 'spans'")
    spans_raw = _maybe_json(raw["spans"], "spans")
    if not isinstance(spans_raw, list):
        raise DataError("'spans' must be a list")
    spans = tuple(parse_span(s, kind) for s in spans_raw)
    ids = [s.span_id for s in spans]
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate span_id in {ids}")
    gold_raw = _maybe_json(raw.get("gold", []), "gold")
    if not isinstance(gold_raw, list):
        raise DataError("'gold' must be a list")
    gold = tuple(relation_from_dict(r, ids) for r in gold_raw)
    sample_id = raw.get("id", default_id)
    extra = {k: v for k, v in raw.items() if k not in _KNOWN_KEYS}
    return Sample(str(sample_id), sentence, spans, paragraph, gold, extra)


def _read_records(path: Path) -> list[Any]:
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON array: {exc}") from None
        return data
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON line: {exc}") from None
    return records


def corpus_from_records(records: Iterable[Any], kind: "DatasetKind | str") -> Corpus:
    kind = DatasetKind.parse(kind)
    samples = []
    for index, raw in enumerate(records):
        try:
            samples.append(sample_from_dict(raw, kind, default_id=str(index)))
        except DataError as exc:
            raise DataError(f"record {index}: {exc}") from None
    return Corpus(tuple(samples), kind)


def load_corpus(path: "str | os.PathLike[str]", kind: "DatasetKind | str") -> Corpus:
    path = Path(path)
    try:
        records = _read_records(path)
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    return corpus_from_records(records, kind)


def dump_corpus(corpus: Corpus) -> str:
    return "".join(json.dumps(s.to_dict(), ensure_ascii=False) + "\n" for s in corpus)


def save_corpus(corpus: Corpus, path: "str | os.PathLike[str]") -> None:
    atomic_write_text(Path(path), dump_corpus(corpus))


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def split_corpus(corpus: Corpus, test_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seeded train/test partition. Both halves keep the original order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(corpus)
    if n == 0:
        raise ValueError("cannot split an empty corpus")
    n_test = round(n * test_fraction)
    if n_test == 0 or n_test == n:
        raise ValueError(
            f"test_fraction {test_fraction} on {n} samples leaves an empty partition"
        )
    order = list(range(n))
    random.Random(seed).shuffle(order)
    test_idx = set(order[:n_test])
    train = tuple(s for i, s in enumerate(corpus.samples) if i not in test_idx)
    test = tuple(s for i, s in enumerate(corpus.samples) if i in test_idx)
    return Corpus(train, corpus.kind), Corpus(test, corpus.kind)
