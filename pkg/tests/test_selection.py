import numpy as np
import pytest

from prososeg.selection import (SelectionConfig, SelectionError, SubsetScorer, exhaustive_search,
                                format_report, phase1_leave_one_out, phase2_beam_search,
                                select_features)
from prososeg.tree import Dataset, TreeTrainParams

FAST = TreeTrainParams(min_leaf_count=20, max_depth=4)


def planted(seed, n=600, n_noise=1, dup=False):
    r = np.random.default_rng(seed)
    y = (r.random(n) < 0.4).astype(int)
    cols = {"core": r.normal(0, 1, n) + 0.3 * y, "A": r.normal(0, 1, n) + 1.5 * y}
    if dup:
        cols["A2"] = cols["A"].copy()
    for j in range(n_noise):
        cols[f"n{j}"] = r.normal(0, 1, n)
    names = sorted(cols)
    rows = [{k: float(cols[k][i]) for k in names} for i in range(n)]
    groups = [f"g{i % 12}" for i in range(n)]
    return Dataset.from_rows(rows, y, names=names, groups=groups)


def _cfg(**kw):
    base = dict(core_features=("core",), tree=FAST, seed=0)
    base.update(kw)
    return SelectionConfig(**base)


@pytest.mark.parametrize("seed", range(10))
def test_noise_eliminated_phase1(seed):
    d = planted(seed)
    cfg = _cfg(core_features=())
    kept = phase1_leave_one_out(["A", "core", "n0"], SubsetScorer(d, cfg), cfg)
    assert "A" in kept


def test_noise_eliminated_majority():
    hits = 0
    for seed in range(10):
        d = planted(seed)
        cfg = _cfg(core_features=())
        kept = phase1_leave_one_out(["A", "n0"], SubsetScorer(d, cfg), cfg)
        hits += kept == ("A",)
    assert hits >= 9


def test_three_features_returns_core_plus_informative():
    res = select_features(planted(3), ["A", "core", "n0"], _cfg(), fit_tree=False)
    assert res.selected == ("A", "core")


def test_duplicates_keep_performance():
    d = planted(5, dup=True)
    cfg = _cfg()
    sc = SubsetScorer(d, cfg)
    full = sc.score(["A", "A2", "core", "n0"])
    res = select_features(d, ["A", "A2", "core", "n0"], cfg, fit_tree=False)
    assert {"A", "A2"} & set(res.selected)
    assert res.score >= full - cfg.tolerance


def test_single_feature_unchanged():
    d = planted(1)
    cfg = _cfg(core_features=())
    assert phase1_leave_one_out(["A"], SubsetScorer(d, cfg), cfg) == ("A",)


def test_core_alone_optimal():
    r = np.random.default_rng(0)
    n = 400
    y = (r.random(n) < 0.5).astype(int)
    rows = [{"core": float(y[i] + r.normal(0, 0.3)), "n0": float(r.normal())} for i in range(n)]
    d = Dataset.from_rows(rows, y, groups=[f"g{i % 8}" for i in range(n)])
    cfg = _cfg()
    res = phase2_beam_search(["core", "n0"], SubsetScorer(d, cfg), cfg)
    assert res.selected == ("core",)


@pytest.mark.parametrize("seed", range(3))
def test_beam_covering_power_set_equals_exhaustive(seed):
    d = planted(seed, n=300, n_noise=3)
    feats = list(d.names)
    cfg = _cfg(beam_width=2 ** len(feats))
    sc = SubsetScorer(d, cfg)
    beam = phase2_beam_search(feats, sc, cfg)
    ex = exhaustive_search(feats, sc, cfg)
    assert beam.selected == ex[0]


def test_report_format_and_determinism():
    d = planted(2)
    a = format_report(select_features(d, None, _cfg(), fit_tree=False))
    b = format_report(select_features(d, None, _cfg(threads=2), fit_tree=False))
    assert a == b
    assert a.splitlines()[-1].startswith("SELECTED ")
    assert a.splitlines()[0].startswith("entropy_reduction ")


def test_missing_core_rejected():
    with pytest.raises(SelectionError):
        select_features(planted(0), ["A"], _cfg())
