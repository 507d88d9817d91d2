import numpy as np
import pytest
from scipy.stats import ks_2samp

from prososeg.corpus_io import load_corpus
from prososeg.features import extract_features, compute_phone_stats
from prososeg.pipeline import PipelineConfig, interior, prepare
from prososeg.synth import SynthError, SynthSpec, generate, generate_corpus, read_spec, write_spec


def _small(**kw):
    base = dict(n_channels=2, words_per_channel=400)
    base.update(kw)
    return SynthSpec(**base)


def test_same_seed_byte_identical(tmp_path):
    a = generate(_small(seed=4), tmp_path / "a")
    b = generate(_small(seed=4), tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    c = generate(_small(seed=5), tmp_path / "c")
    assert a[0].read_bytes() != c[0].read_bytes()


def test_files_pass_validation(tmp_path):
    spec = _small(seed=2, pause_multiplier=3, lengthening=1, reset_depth=0.2, lexical_cue=0.5)
    paths = generate(spec, tmp_path / "x")
    corpus = load_corpus(*paths)
    mem = generate_corpus(spec)
    assert corpus.labels == mem.labels
    assert [len(u.words) for u in corpus.utterances] == [len(u.words) for u in mem.utterances]
    assert set(corpus.labels["ch00"]) <= {"none", "sentence", "topic"}


@pytest.mark.parametrize("bad", [dict(sentence_rate=0.0), dict(pause_multiplier=0.5),
                                 dict(n_channels=0), dict(lengthening=-1.0)])
def test_invalid_spec(bad):
    with pytest.raises(SynthError):
        SynthSpec(**bad).validate()


def test_spec_file_roundtrip(tmp_path):
    spec = _small(seed=9, reset_depth=0.25)
    write_spec(spec, tmp_path / "s.ini")
    assert read_spec(tmp_path / "s.ini") == spec
    (tmp_path / "bad.ini").write_text("colour = 3\n")
    with pytest.raises(SynthError):
        read_spec(tmp_path / "bad.ini")


def _split_feature(cands, name):
    b, nb = [], []
    for c in interior(cands):
        v = c.features[name]
        if v is None:
            continue
        (b if c.label != "none" else nb).append(v)
    return np.array(b), np.array(nb)


@pytest.mark.parametrize("seed", range(5))
def test_null_generator_indistinguishable(seed):
    spec = SynthSpec(seed=seed, n_channels=4, words_per_channel=1000, turn_prob=0.0,
                     level_sd=0.0, speakers_per_channel=1)
    prep = prepare(generate_corpus(spec), PipelineConfig())
    for name in ("PAU_DUR", "AVG_NORM_RHYME_DUR", "F0s_LR_MEAN_WORD"):
        b, nb = _split_feature(prep.candidates, name)
        assert ks_2samp(b, nb).pvalue > 0.01, name


def test_pause_multiplier_measurable():
    spec = SynthSpec(seed=1, n_channels=4, words_per_channel=1500, pause_multiplier=5)
    corpus = generate_corpus(spec)
    cands = extract_features(corpus.utterances, {}, {}, compute_phone_stats(corpus.utterances),
                             corpus.labels)
    b, nb = _split_feature(cands, "PAU_DUR")
    assert b.mean() / nb.mean() >= 5 * 0.8
