import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqfusion.corpus import Corpus, DatasetKind, Relation, RelationLabel, Sample, SpanMention
from seqfusion.re_eval import (
    BinaryEncoding,
    MatchMode,
    compute_f1,
    encode_label,
    f1_table,
    greedy_match,
    match_relations,
    pair_overlap,
)
from tests.oracles import ANY, POSITIVE, best_relation_matching, f1_oracle

R = RelationLabel
PC = BinaryEncoding.POSITIVE_COMBINATION
AC = BinaryEncoding.ANY_COMBINATION


def rel(label, *spans):
    return Relation(R(label), frozenset(spans))


@pytest.mark.parametrize(
    "encoding, expected",
    [
        (PC, {"POS": 1, "NEG": 0, "COMB": 0, "NO_COMB": 0}),
        (AC, {"POS": 1, "NEG": 1, "COMB": 1, "NO_COMB": 0}),
    ],
)
def test_encoding_table(encoding, expected):
    assert {l.value: encode_label(l, encoding) for l in R} == expected


def test_match_examples():
    g = [rel("POS", 0, 1, 2)]
    assert match_relations(g, [rel("POS", 0, 1, 2)], MatchMode.EXACT) == [(0, 0)]
    assert match_relations(g, [rel("POS", 0, 1)], MatchMode.EXACT) == []
    assert match_relations(g, [rel("POS", 0, 1)], MatchMode.PARTIAL) == [(0, 0)]
    assert match_relations([rel("POS", 0, 1)], [rel("POS", 0, 2)], MatchMode.PARTIAL) == []


def test_greedy_is_not_optimal_but_matcher_is():
    # greedy grabs the overlap-3 pair first and strands the other gold
    gold = [rel("POS", 0, 1, 2), rel("POS", 0, 5)]
    pred = [rel("POS", 0, 1, 2, 5), rel("POS", 0, 1)]
    greedy = greedy_match(gold, pred, MatchMode.PARTIAL)
    best = match_relations(gold, pred, MatchMode.PARTIAL)
    assert greedy == [(0, 0)]
    assert best == [(0, 1), (1, 0)]
    assert best_relation_matching(gold, pred, exact=False) == (4, 2)


def _objective(gold, pred, pairs, mode):
    return (sum(pair_overlap(gold[i], pred[j], mode) for i, j in pairs), len(pairs))


def random_relations(rng, n, max_span=5):
    labels = list(R)
    out = []
    for _ in range(n):
        k = rng.randint(2, 4)
        out.append(Relation(rng.choice(labels), frozenset(rng.sample(range(max_span), k))))
    return out


@pytest.mark.parametrize("mode", list(MatchMode))
def test_matcher_equals_exhaustive_oracle(mode):
    rng = random.Random(11)
    for _ in range(300):
        gold = random_relations(rng, rng.randint(0, 4))
        pred = random_relations(rng, rng.randint(0, 4))
        pairs = match_relations(gold, pred, mode)
        assert len({i for i, _ in pairs}) == len(pairs) == len({j for _, j in pairs})
        assert all(pair_overlap(gold[i], pred[j], mode) > 0 for i, j in pairs)
        assert _objective(gold, pred, pairs, mode) == best_relation_matching(
            gold, pred, exact=mode is MatchMode.EXACT
        )


def _corpus(golds):
    samples = tuple(
        Sample(str(i), "s", tuple(SpanMention(k, f"d{k}") for k in range(6)), "p", tuple(g))
        for i, g in enumerate(golds)
    )
    return Corpus(samples, DatasetKind.DCE)


# one partial overlap, one label flip, one exact sample
HAND_GOLD = [[rel("POS", 0, 1, 2)], [rel("POS", 0, 1)], [rel("NEG", 0, 1), rel("POS", 1, 2)]]
HAND_PRED = [[rel("POS", 0, 1)], [rel("NEG", 0, 1)], [rel("NEG", 0, 1), rel("POS", 1, 2)]]
# frozen from tests.oracles.f1_oracle
HAND_EXPECTED = {
    (MatchMode.EXACT, PC): Fraction(2, 5),
    (MatchMode.EXACT, AC): Fraction(3, 4),
    (MatchMode.PARTIAL, PC): Fraction(4, 5),
    (MatchMode.PARTIAL, AC): Fraction(1),
}


@pytest.mark.parametrize("mode, encoding", list(HAND_EXPECTED))
def test_hand_fixture(mode, encoding):
    oracle = f1_oracle(
        list(zip(HAND_GOLD, HAND_PRED)), mode is MatchMode.EXACT, POSITIVE if encoding is PC else ANY
    )
    assert oracle == HAND_EXPECTED[(mode, encoding)]
    corpus = _corpus(HAND_GOLD)
    preds = {str(i): p for i, p in enumerate(HAND_PRED)}
    report = compute_f1(corpus, preds, mode, encoding)
    assert report.f1 == pytest.approx(float(oracle), abs=1e-12)


def test_self_match_all_ones():
    corpus = _corpus(HAND_GOLD)
    preds = {s.id: list(s.gold) for s in corpus}
    table = f1_table(corpus, preds)
    assert set(table.percentages().values()) == {100.0}
    for r in table.reports:
        assert r.precision == r.recall == r.f1 == 1.0


def test_empty_predictions():
    corpus = _corpus(HAND_GOLD)
    report = compute_f1(corpus, {}, MatchMode.EXACT, AC)
    assert report.recall == 0 and report.f1 == 0 and report.precision == 0
    assert report.missing == ["0", "1", "2"]
    assert len(f1_table(corpus, {}).warnings) == 3


def test_no_comb_excluded_from_counts():
    corpus = _corpus([[rel("NO_COMB", 0, 1), rel("POS", 2, 3)]])
    report = compute_f1(corpus, {"0": [rel("NO_COMB", 0, 1)]}, MatchMode.EXACT, AC)
    assert (report.gold, report.predicted, report.matched) == (1, 0, 0)


rels = st.builds(
    lambda l, s: Relation(l, frozenset(s)),
    st.sampled_from(list(R)),
    st.sets(st.integers(0, 5), min_size=2, max_size=4),
)
instances = st.lists(st.tuples(st.lists(rels, max_size=4), st.lists(rels, max_size=4)), min_size=1, max_size=4)


@settings(max_examples=150, deadline=None)
@given(instances, st.randoms(use_true_random=False))
def test_properties(inst, rnd):
    corpus = _corpus([g for g, _ in inst])
    preds = {str(i): p for i, (_, p) in enumerate(inst)}
    for enc in BinaryEncoding:
        exact = compute_f1(corpus, preds, MatchMode.EXACT, enc)
        partial = compute_f1(corpus, preds, MatchMode.PARTIAL, enc)
        # every exact pair is also a partial candidate
        assert exact.matched <= partial.matched
        assert exact.f1 <= partial.f1 + 1e-12
    for mode in MatchMode:
        pos = compute_f1(corpus, preds, mode, PC)
        anyc = compute_f1(corpus, preds, mode, AC)
        assert pos.matched <= anyc.matched
        # permuting samples and relations leaves the score unchanged
        order = list(range(len(inst)))
        rnd.shuffle(order)
        shuffled = []
        for i in order:
            g, p = list(inst[i][0]), list(inst[i][1])
            rnd.shuffle(g)
            rnd.shuffle(p)
            shuffled.append((g, p))
        corpus2 = _corpus([g for g, _ in shuffled])
        preds2 = {str(k): p for k, (_, p) in enumerate(shuffled)}
        for enc in BinaryEncoding:
            assert compute_f1(corpus2, preds2, mode, enc).f1 == pytest.approx(
                compute_f1(corpus, preds, mode, enc).f1, abs=1e-12
            )


def test_table_text_layout():
    corpus = _corpus(HAND_GOLD)
    text = f1_table(corpus, {str(i): p for i, p in enumerate(HAND_PRED)}).to_text()
    assert "Exact Match" in text and "Partial Match" in text
    f1_line = next(line for line in text.splitlines() if line.startswith("F1"))
    assert f1_line.split()[1:] == ["40.0", "75.0", "80.0", "100.0"]
