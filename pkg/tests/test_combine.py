import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prososeg.combine import (CombineError, CombinerConfig, check_mode, integrated_posteriors,
                              integrated_viterbi, interpolate, posterior_to_likelihood,
                              prosody_scores, read_posteriors, reprior, tune_lambda, tune_mcw,
                              write_posteriors)
from prososeg.ngram import boundary_posteriors, viterbi_decode

from oracles import lm_enumerate
from test_ngram import random_model


def test_interpolate_endpoints_and_midpoint():
    a, b = np.array([[0.8, 0.2]]), np.array([[0.4, 0.6]])
    np.testing.assert_allclose(interpolate(a, b, 1.0), a)
    np.testing.assert_allclose(interpolate(a, b, 0.0), b)
    np.testing.assert_allclose(interpolate(a, b, 0.5), [[0.6, 0.4]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.floats(0, 1), st.integers(0, 99))
def test_interpolate_valid_distribution(p, lam, seed):
    a = np.stack([1 - np.array(p), np.array(p)], axis=1)
    q = np.random.default_rng(seed).random(len(p))
    b = np.stack([1 - q, q], axis=1)
    np.testing.assert_allclose(interpolate(a, b, lam).sum(axis=1), 1.0, atol=1e-9)


def test_likelihood_ratios():
    r = posterior_to_likelihood([[0.5, 0.5]], (0.5, 0.5))[0]
    assert r[1] / r[0] == pytest.approx(1.0)
    r = posterior_to_likelihood([[0.9, 0.1]], (0.5, 0.5))[0]
    assert r[0] / r[1] == pytest.approx(9.0)
    r = posterior_to_likelihood([[0.9, 0.1]], (0.1, 0.9))[0]
    assert r[0] / r[1] == pytest.approx(81.0)
    assert np.all(posterior_to_likelihood([1.0, 0.0], (0.5, 0.5)) > 0)


def test_reprior_roundtrip():
    p = np.array([0.2, 0.5, 0.9])
    back = reprior(reprior(p, 0.5, 0.1), 0.1, 0.5)
    np.testing.assert_allclose(back, p)
    assert reprior(np.array([0.5]), 0.5, 0.1)[0] == pytest.approx(0.1)


def test_three_word_integrated_matches_enumeration():
    m = random_model(3, 3)
    words = ["w1", "w0", "w2"]
    p_dt = np.array([0.3, 0.8])
    pri = (0.6, 0.4)
    mcw = 1.7
    extra = mcw * np.log(posterior_to_likelihood(p_dt, pri))
    ref, *_ = lm_enumerate(m, words, extra)
    np.testing.assert_allclose(integrated_posteriors(m, words, p_dt, pri, mcw), ref, rtol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_mcw_zero_equals_lm(seed):
    m = random_model(seed, 3)
    r = np.random.default_rng(seed)
    words = [f"w{i}" for i in r.integers(0, 4, 9)]
    p_dt = r.random(8)
    assert integrated_viterbi(m, words, p_dt, (0.5, 0.5), 0.0) == viterbi_decode(m, words)[0]
    np.testing.assert_allclose(integrated_posteriors(m, words, p_dt, (0.5, 0.5), 0.0),
                               boundary_posteriors(m, words), rtol=1e-12)


def test_uninformative_tree_changes_nothing():
    m = random_model(1, 2)
    words = ["w0", "w1", "w2", "w3", "w1"]
    pri = (0.7, 0.3)
    p_dt = np.full(4, 0.3)
    np.testing.assert_allclose(integrated_posteriors(m, words, p_dt, pri, 2.0),
                               boundary_posteriors(m, words), atol=1e-9)


def test_tuning_picks_the_better_model():
    r = np.random.default_rng(0)
    ref = (r.random(500) < 0.3).astype(int)
    perfect = np.where(ref == 1, 0.9, 0.1)
    noise = r.random(500)
    assert tune_lambda(perfect, noise, ref)[0] == 1.0
    assert tune_lambda(noise, perfect, ref)[0] == 0.0
    assert tune_lambda(perfect, perfect, ref)[0] == 0.0
    assert tune_mcw(lambda w: perfect, ref)[0] == 0.0


def test_tuned_combination_no_worse_on_tuning_set():
    r = np.random.default_rng(1)
    ref = (r.random(400) < 0.3).astype(int)
    a = np.clip(ref * 0.6 + r.normal(0.2, 0.2, 400), 0, 1)
    b = np.clip(ref * 0.5 + r.normal(0.25, 0.25, 400), 0, 1)
    lam, (err, _) = tune_lambda(a, b, ref)
    single = min(np.mean((a > 0.5) != ref), np.mean((b > 0.5) != ref))
    assert err <= single + 1e-9


def test_topic_interpolation_rejected():
    with pytest.raises(CombineError):
        check_mode("topic", "interpolate")
    check_mode("topic", "integrated")
    with pytest.raises(CombineError):
        CombinerConfig(lam=1.5)


def test_posterior_file_roundtrip(tmp_path):
    streams = {"c1": np.array([0.1, 0.25]), "c2": np.array([1.0])}
    write_posteriors(streams, tmp_path / "p.txt")
    back = read_posteriors(tmp_path / "p.txt")
    assert list(back) == ["c1", "c2"]
    np.testing.assert_array_equal(back["c1"], streams["c1"])


def test_prosody_scores_floor():
    s = prosody_scores(np.array([0.0, 1.0]), (0.5, 0.5), 1.0)
    assert np.all(np.isfinite(s))
    assert s[0, 1] == pytest.approx(math.log(1e-6 / 0.5))
