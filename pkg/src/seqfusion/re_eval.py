"""Relation-extraction scoring: binary label encoding, exact/partial span
matching and micro-averaged F1 over a corpus."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from seqfusion.corpus import Corpus, Relation, RelationLabel

# minimum shared spans for a partial match
MIN_PARTIAL_OVERLAP = 2


class BinaryEncoding(str, enum.Enum):
    POSITIVE_COMBINATION = "PositiveCombination"
    ANY_COMBINATION = "AnyCombination"


class MatchMode(str, enum.Enum):
    EXACT = "Exact"
    PARTIAL = "Partial"


_ENCODING_TABLE = {
    BinaryEncoding.POSITIVE_COMBINATION: {
        RelationLabel.POS: 1,
        RelationLabel.NEG: 0,
        RelationLabel.COMB: 0,
        RelationLabel.NO_COMB: 0,
    },
    BinaryEncoding.ANY_COMBINATION: {
        RelationLabel.POS: 1,
        RelationLabel.NEG: 1,
        RelationLabel.COMB: 1,
        RelationLabel.NO_COMB: 0,
    },
}


def encode_label(label: RelationLabel, encoding: BinaryEncoding) -> int:
    return _ENCODING_TABLE[BinaryEncoding(encoding)][RelationLabel(label)]


def pair_overlap(gold: Relation, pred: Relation, mode: MatchMode) -> int:
    """Shared span count if the pair is eligible under *mode*, else 0."""
    if mode is MatchMode.EXACT:
        return len(gold.spans) if gold.spans == pred.spans else 0
    shared = len(gold.spans & pred.spans)
    return shared if shared >= MIN_PARTIAL_OVERLAP else 0


def match_relations(
    gold: Sequence[Relation], predicted: Sequence[Relation], mode: MatchMode
) -> list[tuple[int, int]]:
    """One-to-one pairing of gold and predicted relations.

    Maximizes total shared spans over eligible pairs, then the number of
    pairs. Returned pairs are sorted by gold index.
    """
    mode = MatchMode(mode)
    if not gold or not predicted:
        return []
    overlap = np.array(
        [[pair_overlap(g, p, mode) for p in predicted] for g in gold], dtype=np.int64
    )
    if not overlap.any():
        return []
    # weight = overlap * big + 1 makes the objective lexicographic
    big = min(len(gold), len(predicted)) + 1
    weight = np.where(overlap > 0, overlap * big + 1, 0)
    rows, cols = linear_sum_assignment(weight, maximize=True)
    return sorted((int(r), int(c)) for r, c in zip(rows, cols) if weight[r, c] > 0)


def greedy_match(
    gold: Sequence[Relation], predicted: Sequence[Relation], mode: MatchMode
) -> list[tuple[int, int]]:
    """Descending-overlap greedy pairing, ties by lowest gold then predicted index.

    Kept for comparison only: it is not optimal in general.
    """
    mode = MatchMode(mode)
    cands = sorted(
        (-pair_overlap(g, p, mode), gi, pi)
        for gi, g in enumerate(gold)
        for pi, p in enumerate(predicted)
        if pair_overlap(g, p, mode) > 0
    )
    used_g: set[int] = set()
    used_p: set[int] = set()
    pairs = []
    for _, gi, pi in cands:
        if gi in used_g or pi in used_p:
            continue
        used_g.add(gi)
        used_p.add(pi)
        pairs.append((gi, pi))
    return sorted(pairs)


@dataclass
class F1Report:
    precision: float
    recall: float
    f1: float
    matched: int
    predicted: int
    gold: int
    mode: str = ""
    encoding: str = ""
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def f1_from_counts(matched: int, predicted: int, gold: int) -> tuple[float, float, float]:
    precision = matched / predicted if predicted else 0.0
    recall = matched / gold if gold else 0.0
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom else 0.0
    return precision, recall, f1


def count_sample(
    gold: Sequence[Relation],
    predicted: Sequence[Relation],
    mode: MatchMode,
    encoding: BinaryEncoding,
) -> tuple[int, int, int]:
    """(matched, predicted, gold) counts for one sample.

    Relations that encode to 0 are dropped from both sides before matching,
    so every surviving pair agrees on the encoded bit.
    """
    g = [r for r in gold if encode_label(r.label, encoding)]
    p = [r for r in predicted if encode_label(r.label, encoding)]
    return len(match_relations(g, p, mode)), len(p), len(g)


def compute_f1(
    corpus: Corpus,
    predictions: Mapping[str, Sequence[Relation]],
    mode: MatchMode,
    encoding: BinaryEncoding,
) -> F1Report:
    mode = MatchMode(mode)
    encoding = BinaryEncoding(encoding)
    tp = n_pred = n_gold = 0
    missing = []
    for sample in corpus:
        if sample.id not in predictions:
            missing.append(sample.id)
        m, p, g = count_sample(sample.gold, predictions.get(sample.id, ()), mode, encoding)
        tp += m
        n_pred += p
        n_gold += g
    precision, recall, f1 = f1_from_counts(tp, n_pred, n_gold)
    return F1Report(
        precision, recall, f1, tp, n_pred, n_gold, mode.value, encoding.value, missing
    )


TABLE_COLUMNS = [
    (MatchMode.EXACT, BinaryEncoding.POSITIVE_COMBINATION),
    (MatchMode.EXACT, BinaryEncoding.ANY_COMBINATION),
    (MatchMode.PARTIAL, BinaryEncoding.POSITIVE_COMBINATION),
    (MatchMode.PARTIAL, BinaryEncoding.ANY_COMBINATION),
]

_COLUMN_TITLES = {
    BinaryEncoding.POSITIVE_COMBINATION: "Positive Combination F1",
    BinaryEncoding.ANY_COMBINATION: "Any Combination F1",
}


@dataclass
class F1Table:
    """The four mode x encoding scores for one run."""

    reports: list[F1Report]
    warnings: list[str] = field(default_factory=list)

    def cell(self, mode: MatchMode, encoding: BinaryEncoding) -> F1Report:
        for r in self.reports:
            if r.mode == MatchMode(mode).value and r.encoding == BinaryEncoding(encoding).value:
                return r
        raise KeyError((mode, encoding))

    def percentages(self) -> dict[str, float]:
        return {
            f"{r.mode} {_COLUMN_TITLES[BinaryEncoding(r.encoding)]}": round(100 * r.f1, 1)
            for r in self.reports
        }

    def to_dict(self) -> dict:
        return {
            "columns": self.percentages(),
            "reports": [r.to_dict() for r in self.reports],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        header = ["", "Exact Match", "", "Partial Match", ""]
        sub = ["", "Pos. Comb. F1", "Any Comb. F1", "Pos. Comb. F1", "Any Comb. F1"]
        lines = [
            "".join(f"{h:<16}" for h in header).rstrip(),
            "".join(f"{h:<16}" for h in sub).rstrip(),
        ]
        for metric in ("f1", "precision", "recall"):
            row = [metric.upper() if metric == "f1" else metric.capitalize()]
            for mode, enc in TABLE_COLUMNS:
                row.append(f"{100 * getattr(self.cell(mode, enc), metric):.1f}")
            lines.append("".join(f"{c:<16}" for c in row).rstrip())
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines) + "\n"


def f1_table(corpus: Corpus, predictions: Mapping[str, Sequence[Relation]]) -> F1Table:
    reports = [compute_f1(corpus, predictions, m, e) for m, e in TABLE_COLUMNS]
    missing = reports[0].missing
    warnings = [f"no prediction for sample {sid}; scored as empty" for sid in missing]
    return F1Table(reports, warnings)
