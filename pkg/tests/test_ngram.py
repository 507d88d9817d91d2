import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prososeg.ngram import (BOUNDARY, START, UNK, NgramConfig, NgramError, NgramModel,
                            boundary_posteriors, forward_backward, format_arpa,
                            good_turing_discounts, read_arpa, tagged_sequence, train_ngram,
                            viterbi_decode, write_arpa)

from oracles import lm_enumerate, lm_joint

ALL = {1: 1, 2: 1, 3: 1, 4: 1}


def random_model(seed, order, vocab=4, length=400):
    r = np.random.default_rng(seed)
    words = [f"w{i}" for i in r.integers(0, vocab, length)]
    tags = (r.random(length) < 0.3).astype(int)
    cfg = NgramConfig(order=order, cutoffs=ALL, min_word_count=1)
    return train_ngram([tagged_sequence(words, tags)], cfg)


def test_hand_example_katz():
    m = train_ngram([["a", BOUNDARY, "a", BOUNDARY]], NgramConfig(order=2, cutoffs=ALL))
    # bigram counts {<s> a: 1, a <S>: 2, <S> a: 1}: n1=2, n2=1, Good-Turing invalid,
    # absolute discount D = 2 / (2 + 2) = 0.5, so P(<S>|a) = (2 - 0.5) / 2
    assert math.exp(m.logp(BOUNDARY, ["a"])) == pytest.approx(0.75)
    assert m.context_sum(["a"]) == pytest.approx(1.0, abs=1e-12)


def test_backoff_formula_for_unseen_context_word():
    m = random_model(0, 2)
    h = ("w0",)
    seen = {g[-1] for g in m.logprob if len(g) == 2 and g[:-1] == h}
    unseen = [w for w in m.predict_vocab if w not in seen]
    assert unseen
    w = unseen[0]
    expected = m.backoff[h] + m.logprob[(w,)]
    assert m.logp(w, h) == pytest.approx(expected, abs=1e-8)


def test_unigram_model_frequencies():
    seq = ["a", "b", "a", BOUNDARY, "a", "b"]
    m = train_ngram([seq], NgramConfig(order=1, cutoffs=ALL, min_word_count=1))
    assert m.context_sum([]) == pytest.approx(1.0)
    pa, pb = math.exp(m.logp("a", [])), math.exp(m.logp("b", []))
    assert pa > pb > 0
    assert m.logp("a", ["b"]) == m.logp("a", [])


@pytest.mark.parametrize("order", [2, 3, 4])
def test_every_context_normalized(order):
    m = random_model(order, order)
    ctxs = {g[:-1] for g in m.logprob if len(g) > 1} | {(START,), ("zzz",)}
    for h in sorted(ctxs):
        assert m.context_sum(h) == pytest.approx(1.0, abs=1e-8)


def test_good_turing_discounts_valid():
    ds = good_turing_discounts({1: 100, 2: 40, 3: 20, 4: 12, 5: 8, 6: 5}, 5)
    assert set(ds) == {1, 2, 3, 4, 5}
    assert all(0 < d <= 1 for d in ds.values())
    assert good_turing_discounts({1: 3}, 5) == {"abs": 0.5}


def test_empty_corpus_rejected():
    with pytest.raises(NgramError):
        train_ngram([[]])


def test_unknown_words_map_to_unk():
    m = random_model(1, 3)
    assert m.map_word("never-seen") == UNK
    assert math.isfinite(m.logp(UNK, ["w0"]))


def test_arpa_roundtrip(tmp_path):
    m = random_model(2, 3)
    write_arpa(m, tmp_path / "m.arpa")
    back = read_arpa(tmp_path / "m.arpa")
    assert back.order == 3
    for h in [(START,), ("w1",), ("w1", BOUNDARY)]:
        for w in m.predict_vocab:
            assert back.logp(w, h) == pytest.approx(m.logp(w, h), abs=1e-9)
    assert format_arpa(back) == format_arpa(m)


def test_length_one_sequence():
    m = random_model(0, 2)
    assert len(boundary_posteriors(m, ["w1"])) == 0
    assert viterbi_decode(m, ["w1"])[0] == []


def test_zero_boundary_probability():
    m = NgramModel(2, ("a", BOUNDARY, UNK, START),
                   {("a",): 0.0, (BOUNDARY,): -math.inf, (UNK,): -math.inf,
                    (START,): -math.inf, ("a", "a"): 0.0, (START, "a"): 0.0},
                   {("a",): -math.inf, (START,): -math.inf})
    assert boundary_posteriors(m, ["a", "a", "a"]).tolist() == [0.0, 0.0]


def test_viterbi_tie_prefers_no_boundary():
    m = NgramModel(1, ("a", BOUNDARY, START),
                   {("a",): math.log(0.5), (BOUNDARY,): math.log(0.5), (START,): -math.inf})
    # P(<S>) * P(a) vs P(a): make them equal through the extra scores
    extra = np.array([[math.log(0.5), 0.0]] * 3)
    tags, _ = viterbi_decode(m, ["a"] * 4, extra)
    assert tags == [0, 0, 0]


@pytest.mark.parametrize("order", [2, 3, 4])
@pytest.mark.parametrize("seed", range(4))
def test_forward_backward_matches_enumeration(order, seed):
    m = random_model(seed, order)
    r = np.random.default_rng(100 + seed)
    words = [f"w{i}" for i in r.integers(0, 5, 7)]
    post, total = forward_backward(m, words)
    ref_post, ref_total, scored, best = lm_enumerate(m, words)
    np.testing.assert_allclose(post, ref_post, rtol=1e-10, atol=1e-300)
    assert total == pytest.approx(ref_total, rel=1e-10)
    tags, score = viterbi_decode(m, words)
    assert score == pytest.approx(best, rel=1e-10)
    assert lm_joint(m, words, tags) == pytest.approx(best, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 1), min_size=5, max_size=5))
def test_viterbi_beats_any_tagging(seed, tags):
    m = random_model(seed % 7, 3)
    r = np.random.default_rng(seed)
    words = [f"w{i}" for i in r.integers(0, 4, 6)]
    _, best = viterbi_decode(m, words)
    assert best >= lm_joint(m, words, tags) - 1e-9
