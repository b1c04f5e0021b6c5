"""In-context knowledge editing inputs.

Facts are injected through the prompt: a run of demonstrations, each a
``New Fact / Q / A`` triple, followed by the new facts and the question to
answer. Nothing here touches model weights.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from seqfusion.corpus import Corpus, DatasetKind
from seqfusion.errors import BackendError, DataError
from seqfusion.llm_client import DEFAULT_CONCURRENCY, Backend, LlmRequest
from seqfusion.qa_eval import ComboAnswer
from seqfusion.skt import NaturalFact, transform_corpus

log = logging.getLogger(__name__)

QUESTIONS = {
    DatasetKind.DCE: "Which drug combinations are mentioned and what are the effects of each combination?",
    DatasetKind.MEE: "Which moderating effects are mentioned and what is the direction of each?",
}

DEFAULT_DEMOS = 8


@dataclass(frozen=True)
class QAPair:
    question: str
    expected: tuple[ComboAnswer, ...]
    facts: tuple[NaturalFact, ...]
    sample_id: str


@dataclass(frozen=True)
class Demonstration:
    facts: tuple[NaturalFact, ...]
    question: str
    answer: str


@dataclass
class EditContext:
    demonstrations: list[Demonstration]
    new_facts: list[NaturalFact]
    question: str
    l_align: int
    sample_id: str | None = None
    prompt: str = ""
    expected: list[ComboAnswer] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "question": self.question,
            "l_align": self.l_align,
            "new_facts": [f.text for f in self.new_facts],
            "demonstrations": len(self.demonstrations),
            "expected": [c.to_dict() for c in self.expected],
            "prompt": self.prompt,
        }


def expected_from_fact(fact: NaturalFact) -> ComboAnswer:
    return ComboAnswer.of(fact.entities, fact.source_relation.label)


def facts_text(facts: Sequence[NaturalFact]) -> str:
    return " ".join(f.text for f in facts)


def generate_qa_pairs(
    facts: Sequence[NaturalFact], corpus: Corpus, question: str | None = None
) -> list[QAPair]:
    """One pair per sample with facts, in corpus order.

    The question is the sample sentence followed by the dataset question.
    """
    by_sample: dict[str, list[NaturalFact]] = {}
    ids = {s.id for s in corpus}
    for f in facts:
        if f.sample_id not in ids:
            raise DataError(f"fact references unknown sample {f.sample_id!r}")
        by_sample.setdefault(f.sample_id, []).append(f)
    question = question or QUESTIONS[corpus.kind]
    pairs = []
    for sample in corpus:
        sample_facts = by_sample.get(sample.id)
        if not sample_facts:
            continue
        pairs.append(
            QAPair(
                f"{sample.sentence} {question}",
                tuple(expected_from_fact(f) for f in sample_facts),
                tuple(sample_facts),
                sample.id,
            )
        )
    return pairs


def build_demonstrations(
    train: Corpus,
    k: int = DEFAULT_DEMOS,
    seed: int = 0,
    question: str | None = None,
) -> list[Demonstration]:
    """*k* demonstrations from training gold, chosen by seeded shuffle."""
    facts = transform_corpus({s.id: s.gold for s in train}, train)
    pairs = generate_qa_pairs(facts, train, question)
    random.Random(seed).shuffle(pairs)
    return [Demonstration(p.facts, p.question, facts_text(p.facts)) for p in pairs[:k]]


def render_block(facts: Sequence[NaturalFact], question: str, answer: str | None) -> str:
    tail = f"A: {answer}" if answer is not None else "A:"
    return f"New Fact: {facts_text(facts)}\nQ: {question}\n{tail}"


def build_edit_context(
    demos: Sequence[Demonstration],
    facts: Sequence[NaturalFact],
    question: str,
    sample_id: str | None = None,
    expected: Sequence[ComboAnswer] = (),
) -> tuple[EditContext, str]:
    """Assemble the edit prompt; ``l_align`` is 1 iff *facts* cover *sample_id*."""
    if not question or not question.strip():
        raise ValueError("edit question must not be empty")
    blocks = [render_block(d.facts, d.question, d.answer) for d in demos]
    blocks.append(render_block(facts, question, None))
    prompt = "\n\n".join(blocks)
    l_align = int(sample_id is not None and any(f.sample_id == sample_id for f in facts))
    ctx = EditContext(list(demos), list(facts), question, l_align, sample_id, prompt, list(expected))
    return ctx, prompt


def contexts_for_pairs(demos: Sequence[Demonstration], pairs: Sequence[QAPair]) -> list[EditContext]:
    return [
        build_edit_context(demos, p.facts, p.question, p.sample_id, p.expected)[0] for p in pairs
    ]


@dataclass
class AnswerRecord:
    sample_id: str | None
    question: str
    answer: str | None
    error: str | None = None
    expected: list[ComboAnswer] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "question": self.question,
            "answer": self.answer,
            "error": self.error,
            "expected": [c.to_dict() for c in self.expected],
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "AnswerRecord":
        return cls(
            raw.get("sample_id"),
            raw.get("question", ""),
            raw.get("answer"),
            raw.get("error"),
            [ComboAnswer.from_dict(c) for c in raw.get("expected", [])],
        )


def run_edited_qa(
    backend: Backend,
    contexts: Sequence[EditContext],
    model: str = "mock",
    *,
    temperature: float = 0.0,
    max_tokens: int = 512,
    concurrency: int = DEFAULT_CONCURRENCY,
) -> list[AnswerRecord]:
    """Answer every context; a failing sample is recorded, not raised."""

    def one(ctx: EditContext) -> AnswerRecord:
        try:
            resp = backend.complete(LlmRequest(model, ctx.prompt, temperature, max_tokens))
            return AnswerRecord(ctx.sample_id, ctx.question, resp.text, None, ctx.expected)
        except BackendError as exc:
            log.warning("sample %s: %s", ctx.sample_id, exc)
            return AnswerRecord(ctx.sample_id, ctx.question, None, str(exc), ctx.expected)

    if not contexts:
        return []
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        return list(pool.map(one, contexts))


def dump_jsonl(records: Sequence) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records)
