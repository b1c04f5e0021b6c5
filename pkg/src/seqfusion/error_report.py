"""Failure taxonomy for QA answers and its percent-of-samples table."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from seqfusion.corpus import Sample
from seqfusion.qa_eval import ComboAnswer, contradicted_sets, sample_score


class ErrorType(str, enum.Enum):
    NO_ANSWER = "NoAnswer"
    CONTRADICTION = "Contradiction"
    WRONG_EFFECT = "WrongEffect"
    OMISSION = "Omission"


COLUMN_TITLES = {
    ErrorType.NO_ANSWER: "No Answers",
    ErrorType.CONTRADICTION: "Contradiction",
    ErrorType.WRONG_EFFECT: "Error",
    ErrorType.OMISSION: "Omissions",
}

REFUSAL_PHRASES = (
    "cannot determine",
    "can't determine",
    "unable to determine",
    "not sure",
    "no information",
    "i don't know",
    "i do not know",
)
_REFUSAL_RE = re.compile("|".join(re.escape(p) for p in REFUSAL_PHRASES), re.IGNORECASE)


def is_refusal(text: str | None) -> bool:
    return bool(text) and _REFUSAL_RE.search(text) is not None


def classify(
    sample: Sample | None,
    standards: Sequence[ComboAnswer],
    generated: Sequence[ComboAnswer],
    answer_text: str | None = None,
) -> set[ErrorType]:
    """Error types exhibited by one answer; empty for a perfect answer.

    NoAnswer excludes the other three types.
    """
    if not generated:
        return {ErrorType.NO_ANSWER}
    if not standards:
        return set()
    score = sample_score(standards, generated)
    if score.D == 1.0:
        return set()
    if is_refusal(answer_text):
        return {ErrorType.NO_ANSWER}
    errors: set[ErrorType] = set()
    contradicted = contradicted_sets(generated)
    if contradicted:
        errors.add(ErrorType.CONTRADICTION)
    for s, j in zip(standards, score.pairs):
        if j is None:
            continue
        g = generated[j]
        if g.entities not in contradicted and g.effect != s.effect:
            errors.add(ErrorType.WRONG_EFFECT)
    paired = [j is not None for j in score.pairs]
    if any(paired) and not all(paired):
        errors.add(ErrorType.OMISSION)
    return errors


def distribution(classifications: Iterable[set[ErrorType]], n: int) -> dict[ErrorType, float]:
    """Percent of the *n* samples showing each type (types overlap)."""
    if n < 1:
        raise ValueError("distribution needs n >= 1")
    counts = {t: 0 for t in ErrorType}
    for errors in classifications:
        for t in errors:
            counts[ErrorType(t)] += 1
    return {t: 100.0 * c / n for t, c in counts.items()}


@dataclass
class ErrorRow:
    model: str
    dataset: str
    method: str
    percentages: Mapping[ErrorType, float]


@dataclass
class ErrorTable:
    rows: list[ErrorRow] = field(default_factory=list)

    def add(self, model: str, dataset: str, method: str, dist: Mapping[ErrorType, float]) -> None:
        self.rows.append(ErrorRow(model, dataset, method, dict(dist)))

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "model": r.model,
                    "dataset": r.dataset,
                    "method": r.method,
                    **{COLUMN_TITLES[t]: round(r.percentages[t], 1) for t in ErrorType},
                }
                for r in self.rows
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        head = ["Model", "Dataset", "Method"] + [COLUMN_TITLES[t] for t in ErrorType]
        body = [
            [r.model, r.dataset, r.method] + [f"{r.percentages[t]:.1f}" for t in ErrorType]
            for r in self.rows
        ]
        widths = [max(len(x) for x in col) + 2 for col in zip(head, *body)]
        lines = ["".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head] + body]
        return "\n".join(lines) + "\n"
