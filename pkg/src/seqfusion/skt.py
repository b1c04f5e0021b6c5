"""Structured knowledge transformation.

A relation such as ``{"class": "POS", "spans": [0, 1]}`` is first mapped to
the entity attributes its span ids point at, then verbalized with a
dataset-specific sentence template::

    >>> fact = integrate([("Tanespimycin",), ("trastuzumab",)], "POS", "DCE")
    >>> fact.text
    'Tanespimycin and trastuzumab are used in combination, and the effects of the combination are positive.'
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from seqfusion.corpus import Corpus, DatasetKind, Relation, RelationLabel, Sample, SpanMention
from seqfusion.errors import DataError


class UnresolvedSpanError(DataError):
    def __init__(self, span_id: int):
        super().__init__(f"span id {span_id} has no entity in the knowledge base")
        self.span_id = span_id


@dataclass(frozen=True)
class StructuredKnowledge:
    relation: Relation
    sample_id: str


@dataclass(frozen=True)
class EntityBase:
    entries: Mapping[int, SpanMention]

    @classmethod
    def from_sample(cls, sample: Sample) -> "EntityBase":
        return cls({s.span_id: s for s in sample.spans})


@dataclass(frozen=True)
class FactTemplate:
    """Sentence pattern plus the phrase used for each label.

    The pattern may use ``{entities}`` (all names joined by " and "),
    ``{effect}``, ``{moderator}`` (last name) and ``{others}`` (the rest,
    joined by " and ").
    """

    pattern: str
    effects: Mapping[RelationLabel, str]

    def render(self, names: Sequence[str], label: RelationLabel) -> str:
        return self.pattern.format(
            entities=" and ".join(names),
            effect=self.effects[label],
            moderator=names[-1],
            others=" and ".join(names[:-1]),
        )


DCE_TEMPLATE = FactTemplate(
    "{entities} are used in combination, and the effects of the combination are {effect}.",
    {
        RelationLabel.POS: "positive",
        RelationLabel.NEG: "negative",
        RelationLabel.COMB: "not yet clear",
    },
)

MEE_TEMPLATE = FactTemplate(
    "{moderator} moderates the relationship involving {others}; the moderating effect {effect}.",
    {
        RelationLabel.POS: "strengthens the main effect",
        RelationLabel.NEG: "weakens the main effect",
        RelationLabel.COMB: "is undetermined",
    },
)

DEFAULT_TEMPLATES = {DatasetKind.DCE: DCE_TEMPLATE, DatasetKind.MEE: MEE_TEMPLATE}


def load_fact_template(path: "str | Path", kind: "DatasetKind | str") -> FactTemplate:
    """Read an override pattern (first non-blank line) for *kind*."""
    kind = DatasetKind.parse(kind)
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"fact template {path} is empty")
    pattern = lines[0]
    if "{effect}" not in pattern:
        raise DataError(f"fact template {path} lacks an {{effect}} placeholder")
    return FactTemplate(pattern, DEFAULT_TEMPLATES[kind].effects)


@dataclass(frozen=True)
class NaturalFact:
    text: str
    sample_id: str
    source_relation: Relation
    context: str
    entities: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "text": self.text,
            "relation": self.source_relation.to_dict(),
            "entities": list(self.entities),
            "context": self.context,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "NaturalFact":
        from seqfusion.corpus import relation_from_dict

        return cls(
            raw["text"],
            str(raw["sample_id"]),
            relation_from_dict(raw["relation"]),
            raw.get("context", ""),
            tuple(raw.get("entities", ())),
        )


def map_spans(k: StructuredKnowledge, d: EntityBase) -> list[tuple[str, ...]]:
    """Entity attribute tuples for the relation's spans, by ascending span id."""
    out = []
    for span_id in k.relation.sorted_spans:
        entity = d.entries.get(span_id)
        if entity is None:
            raise UnresolvedSpanError(span_id)
        out.append((entity.text,))
    return out


def integrate(
    entities: Sequence[tuple[str, ...]],
    label: "RelationLabel | str",
    context: "DatasetKind | str",
    template: FactTemplate | None = None,
    *,
    sample_id: str = "",
    relation: Relation | None = None,
) -> NaturalFact:
    label = RelationLabel(label)
    kind = DatasetKind.parse(context)
    if len(entities) < 2:
        raise DataError(f"a combination needs at least 2 entities, got {len(entities)}")
    if label is RelationLabel.NO_COMB:
        raise DataError("NO_COMB relations carry no fact to verbalize")
    names = [e[0] for e in entities]
    template = template or DEFAULT_TEMPLATES[kind]
    if relation is None:
        relation = Relation(label, frozenset(range(len(names))))
    return NaturalFact(template.render(names, label), sample_id, relation, kind.value, tuple(names))


def transform_sample(
    sample: Sample,
    relations: Sequence[Relation],
    kind: "DatasetKind | str",
    template: FactTemplate | None = None,
) -> list[NaturalFact]:
    base = EntityBase.from_sample(sample)
    ordered = sorted(relations, key=lambda r: r.sorted_spans)
    facts = []
    for rel in ordered:
        if rel.label is RelationLabel.NO_COMB:
            continue
        entities = map_spans(StructuredKnowledge(rel, sample.id), base)
        facts.append(
            integrate(entities, rel.label, kind, template, sample_id=sample.id, relation=rel)
        )
    return facts


def transform_corpus(
    extractions: Mapping[str, Sequence[Relation]],
    corpus: Corpus,
    template: FactTemplate | None = None,
) -> list[NaturalFact]:
    """Facts in corpus order, then span-set order within a sample."""
    facts = []
    for sample in corpus:
        rels = extractions.get(sample.id)
        if not rels:
            continue
        try:
            facts.extend(transform_sample(sample, rels, corpus.kind, template))
        except DataError as exc:
            raise DataError(f"sample {sample.id}: {exc}") from exc
    return facts


def structured_form(fact: NaturalFact) -> str:
    """The same fact in its structured serialization."""
    return json.dumps(fact.source_relation.to_dict(), ensure_ascii=False)
