import numpy as np
import pytest

from prososeg.pipeline import (PipelineConfig, PipelineError, build_dataset, interior,
                               load_config, prepare, split_channels, train_boundary_tree,
                               tree_posteriors)
from prososeg.synth import SynthSpec, generate_corpus


def test_config_sections_and_overrides(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[general]\nseed = 4\n[tree]\nmin_leaf_count = 7\n[ngram]\norder = 2\n"
                 "[topic]\npenalty_grid = 1, 2\n[combine]\nmode = interpolate\n")
    cfg = load_config(p, seed=9, threads=None)
    assert cfg.seed == 9 and cfg.threads == 1
    assert cfg.tree.min_leaf_count == 7 and cfg.selection.tree is cfg.tree
    assert cfg.selection.seed == 9
    assert cfg.ngram.order == 2 and cfg.topic.penalty_grid == (1.0, 2.0)


@pytest.mark.parametrize("text", ["[bogus]\nx = 1\n", "[tree]\nnope = 1\n",
                                  "[general]\ntask = words\n", "[tree]\nlookahead = maybe\n"])
def test_bad_config_rejected(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    with pytest.raises(PipelineError):
        load_config(p)


def test_topic_interpolation_config_rejected(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[general]\ntask = topic\n[combine]\nmode = interpolate\n")
    with pytest.raises(ValueError):
        load_config(p)


def test_split_channels_partitions_deterministically():
    chans = [f"ch{i:02d}" for i in range(10)]
    parts = split_channels(chans, (0.5, 0.25, 0.25), seed=3)
    assert sorted(sum(parts, [])) == chans
    assert [len(p) for p in parts] == [5, 3, 2]
    assert split_channels(chans, (0.5, 0.25, 0.25), seed=3) == parts
    assert split_channels(chans, (0.5, 0.25, 0.25), seed=4) != parts


def test_dataset_drops_final_candidate_and_posteriors_align():
    corpus = generate_corpus(SynthSpec(seed=1, n_channels=2, words_per_channel=200,
                                       pause_multiplier=4))
    cfg = PipelineConfig()
    prep = prepare(corpus, cfg)
    d = build_dataset(prep.candidates, "sentence")
    assert len(d) == len(interior(prep.candidates)) == 2 * 199
    assert set(np.unique(d.y)) == {0, 1}
    tree = train_boundary_tree(d, cfg)
    post = tree_posteriors(tree, prep.candidates)
    assert {ch: len(p) for ch, p in post.items()} == {ch: 199 for ch in corpus.channels}
    assert all(np.all((p >= 0) & (p <= 1)) for p in post.values())
