import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqfusion.corpus import RelationLabel
from seqfusion.errors import DataError
from seqfusion.qa_eval import (
    AccuracyReport,
    ComboAnswer,
    SampleScore,
    Verdict,
    apply_adjudication,
    combo_score,
    corpus_accuracy,
    normalize_answer,
    sample_score,
)
from tests.oracles import best_sample_score

R = RelationLabel
POS, NEG, COMB = R.POS, R.NEG, R.COMB

LLAMA2 = (
    "A:Trastuzumab and chemotherapy are used in combination, and the effects of the combination are "
    "positive. Pertuzumab and chemotherapy are used in combination, and the effects of the combination "
    "are positive. Bevacizumab and chemotherapy are used in combination, and the effects of the "
    "combination are positive. Lapatinib and chemotherapy are used in combination, and the effects of "
    "the combination are positive.Answer: The combination of Trastuzumab and chemotherapy has a "
    "positive effect."
)
QWEN = (
    "A:  Trastuzumab and chemotherapy are combined. The impact of this combination is positive. "
    "Pertuzumab and chemotherapy are combined. The impact of this combination is positive. "
    "Bevacizumab and chemotherapy are combined. The impact of this combination is positive. "
    "Lapatinib and chemotherapy are combined. The impact of this combination is positive "
    ".Trastuzumab and chemotherapy have a positive effect when they are combined together."
    "Pertuzumab and chemotherapy have a positive effect when they"
)
DRUGS = ["trastuzumab", "pertuzumab", "bevacizumab", "lapatinib"]
NAMES_257 = DRUGS + ["chemotherapy"]
STANDARD_257 = [ComboAnswer.of([d, "chemotherapy"], POS) for d in DRUGS]


def c(names, effect=POS):
    return ComboAnswer.of(list(names), effect)


@pytest.mark.parametrize("answer", [LLAMA2, QWEN])
def test_captured_model_answers(answer):
    combos = normalize_answer(answer, NAMES_257)
    assert set(combos) == set(STANDARD_257)
    score = sample_score(STANDARD_257, combos)
    assert score.D == 1.0
    assert score.effect_flags == [1, 1, 1, 1]


def test_refusal_yields_nothing():
    assert normalize_answer("I cannot determine the combinations.", NAMES_257) == []


def test_effect_in_same_or_next_sentence():
    names = ["a1", "b1"]
    assert normalize_answer("a1 and b1 are combined; the effect is negative.", names) == [
        c(["a1", "b1"], NEG)
    ]
    assert normalize_answer("A1 with B1. The result is unclear.", names) == [c(["a1", "b1"], COMB)]
    assert normalize_answer("A1 with B1.", names) == [c(["a1", "b1"], None)]


def test_effect_words_inside_entity_names_ignored():
    names = ["Positive Affect", "Tenure"]
    text = "Tenure moderates the relationship involving Positive Affect; the moderating effect weakens the main effect."
    assert normalize_answer(text, names) == [c(["positive affect", "tenure"], NEG)]


def test_names_case_folded():
    assert c(["  Trastuzumab ", "CHEMOTHERAPY"]).entities == {"trastuzumab", "chemotherapy"}


@pytest.mark.parametrize(
    "s, g, expected",
    [
        ("ab", "ab", Fraction(1)),
        ("abc", "abd", Fraction(2, 3)),
        ("ab", "ac", Fraction(0)),
        ("abc", "a", Fraction(0)),
    ],
)
def test_combo_score(s, g, expected):
    assert combo_score(c(s), c(g)) == expected


def test_sample_score_examples():
    std = [c("ab"), c("cd")]
    assert sample_score(std, std).D == 1.0
    assert sample_score(std, [c("ab")]).D == 0.5
    dup = sample_score([c("ab")], [c("ab", POS), c("ab", NEG)])
    assert dup.effect_flags == [0] and dup.D == 0.0


def test_unknown_effect_scores_zero():
    assert sample_score([c("ab")], [c("ab", None)]).D == 0.0


def test_largest_intersection_pairing():
    # first-come pairing would give S1 the 3-set and leave S2 with 2/3
    std = [c("ab"), c("abc")]
    gen = [c("abc"), c("ab")]
    score = sample_score(std, gen)
    assert score.pairs == [1, 0]
    assert score.D == 1.0


def test_sample_score_needs_standards():
    with pytest.raises(DataError):
        sample_score([], [c("ab")])


def _random_combo(rng, allow_unknown=True):
    k = rng.randint(1, 4)
    effects = [POS, NEG, COMB] + ([None] if allow_unknown else [])
    return ComboAnswer.of(rng.sample("abcdef", k), rng.choice(effects))


def test_pairing_equals_exhaustive_oracle():
    rng = random.Random(5)
    for _ in range(400):
        std = [_random_combo(rng, False) for _ in range(rng.randint(1, 4))]
        gen = [_random_combo(rng) for _ in range(rng.randint(0, 4))]
        assert sample_score(std, gen).exact_D == best_sample_score(std, gen)


def test_corpus_accuracy_mean():
    scores = [SampleScore([], [], d) for d in (1.0, 0.5, 0.0)]
    report = corpus_accuracy(scores)
    assert report.final_accuracy == 0.5 and report.percent == 50.0 and report.n == 3


def test_corpus_accuracy_empty():
    with pytest.raises(DataError):
        corpus_accuracy([])


def _report(ds):
    return corpus_accuracy([SampleScore([], [], d, sample_id=f"s{i}") for i, d in enumerate(ds)])


def test_adjudication_raises_by_ten_points():
    report = _report([0.0] + [1.0] * 5 + [0.0] * 4)
    adjusted = apply_adjudication(report, [Verdict("s0", 1.0, "reviewer agreed")])
    assert adjusted.percent - report.percent == pytest.approx(10.0, abs=1e-9)
    assert adjusted.adjudicated == {"s0": "reviewer agreed"}


def test_adjudication_identity_and_errors():
    report = _report([1.0, 0.0])
    assert apply_adjudication(report, []) is report
    with pytest.raises(DataError, match="unknown sample"):
        apply_adjudication(report, {"zz": 1.0})
    with pytest.raises(DataError, match=r"\[0, 1\]"):
        apply_adjudication(report, {"s0": 1.5})


combos = st.builds(
    ComboAnswer.of,
    st.sets(st.sampled_from("abcdef"), min_size=1, max_size=4),
    st.sampled_from([POS, NEG, COMB, None]),
)
std_combos = st.builds(
    ComboAnswer.of,
    st.sets(st.sampled_from("abcdef"), min_size=1, max_size=4),
    st.sampled_from([POS, NEG, COMB]),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(std_combos, min_size=1, max_size=4), st.lists(combos, max_size=4), st.randoms(use_true_random=False))
def test_score_range_and_permutation(std, gen, rnd):
    score = sample_score(std, gen)
    assert 0.0 <= score.D <= 1.0
    shuffled = list(gen)
    rnd.shuffle(shuffled)
    assert sample_score(std, shuffled).exact_D == score.exact_D


@settings(max_examples=200, deadline=None)
@given(st.lists(std_combos, min_size=1, max_size=4), st.lists(combos, max_size=4), st.data())
def test_adding_a_correct_combo_never_lowers_score(std, gen, data):
    target = data.draw(st.sampled_from(std))
    if any(g.entities == target.entities and g.effect != target.effect for g in gen):
        return  # would introduce a contradiction, which is meant to cost
    assert sample_score(std, gen + [target]).exact_D >= sample_score(std, gen).exact_D


@settings(max_examples=100, deadline=None)
@given(st.lists(st.fractions(0, 1), min_size=1, max_size=8), st.data())
def test_corpus_accuracy_monotone(ds, data):
    i = data.draw(st.integers(0, len(ds) - 1))
    bump = data.draw(st.fractions(0, 1 - ds[i]))
    before = corpus_accuracy([SampleScore([], [], float(d), exact_D=d) for d in ds])
    raised = list(ds)
    raised[i] += bump
    after = corpus_accuracy([SampleScore([], [], float(d), exact_D=d) for d in raised])
    assert 0.0 <= before.final_accuracy <= after.final_accuracy <= 1.0


FACT_ANSWER = " ".join(
    f"{d} and chemotherapy are used in combination, and the effects of the combination are positive."
    for d in DRUGS
)
suffix = st.text(max_size=60).filter(lambda t: not any(n in t.casefold() for n in NAMES_257))


@settings(max_examples=300, deadline=None)
@given(suffix)
def test_suffix_insensitive(tail):
    base = sample_score(STANDARD_257, normalize_answer(FACT_ANSWER, NAMES_257))
    assert base.D == 1.0
    assert sample_score(STANDARD_257, normalize_answer(FACT_ANSWER + tail, NAMES_257)).D == 1.0
