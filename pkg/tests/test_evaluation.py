import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prososeg.evaluation import (EvaluationError, TdtConfig, align_and_score, align_words,
                                 boundary_error, format_tdt_report, relative_error, tdt_counts,
                                 tdt_cost)

labels = st.sampled_from(["none", "sentence", "topic"])


def test_identical_streams_zero():
    assert boundary_error(["none", "sentence"], ["none", "sentence"]).error == 0.0


def test_all_none_equals_boundary_rate():
    ref = ["sentence"] * 62 + ["none"] * 938
    rep = boundary_error(ref, ["none"] * 1000)
    assert rep.error == pytest.approx(0.062)
    assert rep.chance == pytest.approx(0.062)


def test_one_of_four_wrong():
    assert boundary_error(["none"] * 4, ["none"] * 3 + ["sentence"]).error == 0.25


def test_length_mismatch():
    with pytest.raises(EvaluationError):
        boundary_error(["none"], [])


def test_align_identical():
    w = list("abcdefghij")
    lab = ["none"] * 10
    assert align_and_score(w, lab, w, lab).error == 0.0
    flipped = lab[:]
    flipped[4] = "sentence"
    assert align_and_score(w, lab, w, flipped).error == pytest.approx(0.10)


def test_deleted_word_spanning_boundary():
    ref_w = ["a", "b", "c", "d", "e"]
    ref_l = ["none", "sentence", "none", "none", "sentence"]
    hyp_w = ["a", "c", "d", "e"]
    hyp_l = ["none", "none", "none", "sentence"]
    rep = align_and_score(ref_w, ref_l, hyp_w, hyp_l)
    assert rep.deleted == 1
    assert rep.lower_bound == pytest.approx(0.2)
    assert rep.error >= rep.lower_bound > 0


def test_alignment_prefers_substitution():
    assert align_words(["a", "b"], ["a", "x"]) == [(0, 0), (1, 1)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), labels, labels), max_size=30))
def test_align_reduces_to_boundary_error(items):
    if not items:
        return
    words = [w for w, _, _ in items]
    ref = [r for _, r, _ in items]
    hyp = [h for _, _, h in items]
    a = align_and_score(words, ref, words, hyp)
    b = boundary_error(ref, hyp)
    assert a.error == b.error and a.substituted == b.substituted
    assert align_and_score(words, ref, words, ref).error == 0.0


def test_tdt_all_none_costs_miss_weight():
    ref = [0] * 300
    for i in (60, 150, 220):
        ref[i] = 1
    assert tdt_cost(ref, [0] * 300) == 0.3


def test_tdt_perfect_and_everywhere():
    ref = [1 if i % 80 == 79 else 0 for i in range(400)]
    assert tdt_cost(ref, ref) == 0.0
    assert tdt_cost(ref, [1] * 400) == pytest.approx(0.7)


def test_tdt_window_clamped():
    c = tdt_counts([0, 1, 0, 0], [0, 0, 0, 0], TdtConfig(window=50))
    assert c.ref_diff + c.ref_same == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=2, max_size=200),
       st.lists(st.integers(0, 1), min_size=2, max_size=200), st.integers(1, 60))
def test_tdt_bounds(ref, hyp, window):
    n = min(len(ref), len(hyp))
    ref, hyp = ref[:n], hyp[:n]
    cfg = TdtConfig(window=window)
    c = tdt_cost(ref, hyp, cfg)
    assert 0.0 <= c <= 1.0
    if tdt_counts(ref, [0] * n, cfg).ref_diff:
        assert tdt_cost(ref, [0] * n, cfg) == 0.3


def test_relative_error_examples():
    assert relative_error(0.062, 0.062) == 1.0
    assert relative_error(0.01, 0.05, 0.01) == 0.0
    assert relative_error(3.6, 6.2, 0.0) == pytest.approx(0.58, abs=0.005)
    with pytest.raises(EvaluationError):
        relative_error(0.1, 0.1, 0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0.01, 1), st.floats(0.1, 10), st.floats(-5, 5))
def test_relative_error_affine_invariant(score, chance, a, b):
    rel = relative_error(score, chance, 0.0)
    assert relative_error(a * score + b, a * chance + b, b) == pytest.approx(rel, rel=1e-9,
                                                                            abs=1e-9)


def test_reports_have_footer():
    text = boundary_error(["none", "sentence"], ["none", "none"]).format()
    assert "error=0.5" in text and "chance=0.5" in text and "relative_error=1.0" in text
    tdt = format_tdt_report(tdt_counts([0, 1, 0, 0, 0], [0] * 5, TdtConfig(window=2)))
    assert "error=0.3" in tdt
