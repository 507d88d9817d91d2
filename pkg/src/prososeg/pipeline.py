"""End-to-end orchestration shared by the command line and the experiments."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .combine import (CombinerConfig, check_mode, decision_error, integrated_posteriors,
                      interpolate, prosody_scores, reprior, tune_lambda, tune_mcw)
from .corpus_io import Corpus, WordToken, channel_words, task_targets
from .evaluation import TdtConfig, TdtCounts, tdt_counts
from .features import (FEATURE_NAMES, BoundaryCandidate, FeatureConfig, compute_phone_stats,
                       extract_features, group_by_channel)
from .ngram import NgramConfig, NgramModel, boundary_posteriors, tagged_sequence, train_ngram
from .pitch_model import PitchConfig, fit_pitch_models
from .selection import SelectionConfig
from .topic import TopicModel, chop, segment_topics, train_topic_model
from .tree import Dataset, Tree, TreeTrainParams, downsample, predict_proba, train_pruned

TASKS = ("sentence", "topic")


class PipelineError(ValueError):
    pass


@dataclass
class TopicConfig:
    k: int = 100
    passes: int = 5
    smoothing: float = 0.01
    min_words: int = 300
    max_words: int = 3000
    chop_threshold: float = 0.65
    normalize: bool = True
    penalty: float = 5.0
    penalty_grid: tuple = (0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0)


@dataclass
class PipelineConfig:
    task: str = "sentence"
    seed: int = 0
    threads: int = 1
    features: tuple = tuple(FEATURE_NAMES)
    downsample: bool = True
    pitch: PitchConfig = field(default_factory=PitchConfig)
    extract: FeatureConfig = field(default_factory=FeatureConfig)
    tree: TreeTrainParams = field(default_factory=TreeTrainParams)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    ngram: NgramConfig = field(default_factory=NgramConfig)
    topic: TopicConfig = field(default_factory=TopicConfig)
    combine: CombinerConfig = field(default_factory=CombinerConfig)
    tdt: TdtConfig = field(default_factory=TdtConfig)

    def __post_init__(self):
        if self.task not in TASKS:
            raise PipelineError(f"unknown task {self.task!r}; expected sentence or topic")
        check_mode(self.task, self.combine.mode)


_SECTIONS = ("pitch", "extract", "tree", "selection", "ngram", "topic", "combine", "tdt")


def _coerce(raw: str, current):
    if isinstance(current, bool):
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise PipelineError(f"not a boolean: {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        items = [t.strip() for t in raw.replace(",", " ").split() if t.strip()]
        if current and isinstance(current[0], (int, float)):
            return tuple(float(t) for t in items)
        return tuple(items)
    if isinstance(current, dict):
        out = {}
        for item in raw.replace(",", " ").split():
            k, _, v = item.partition(":")
            out[int(k)] = int(v)
        return out
    return raw.strip()


def _apply(obj, items, section: str):
    names = {f.name for f in dataclasses.fields(obj)}
    for key, raw in items:
        if key not in names or key == "tree":
            raise PipelineError(f"unknown config key [{section}] {key}")
        setattr(obj, key, _coerce(raw, getattr(obj, key)))
    if hasattr(obj, "__post_init__"):
        obj.__post_init__()


def load_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Read an INI config ([general] plus one section per module); flags override."""
    cfg = PipelineConfig()
    if path is not None:
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
        if not cp.read(path):
            raise PipelineError(f"cannot read config file {path}")
        for sec in cp.sections():
            if sec == "general":
                for key, raw in cp[sec].items():
                    if key not in ("task", "seed", "threads", "features", "downsample"):
                        raise PipelineError(f"unknown config key [general] {key}")
                    setattr(cfg, key, _coerce(raw, getattr(cfg, key)))
            elif sec in _SECTIONS:
                _apply(getattr(cfg, sec), cp[sec].items(), sec)
            else:
                raise PipelineError(f"unknown config section [{sec}]")
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    cfg.selection.tree = cfg.tree
    cfg.selection.seed = cfg.seed
    cfg.selection.threads = cfg.threads
    cfg.__post_init__()
    return cfg


# -- preparation -------------------------------------------------------------------

@dataclass
class Prepared:
    corpus: Corpus
    speakers: dict
    pitch: dict
    stats: dict
    candidates: list[BoundaryCandidate]

    def by_channel(self):
        return group_by_channel(self.candidates)


def prepare(corpus: Corpus, cfg: PipelineConfig) -> Prepared:
    """Speaker pitch models, phone statistics and feature vectors for a corpus."""
    speakers, pitch = fit_pitch_models(corpus.utterances, corpus.tracks, cfg.pitch)
    stats = compute_phone_stats(corpus.utterances)
    cands = extract_features(corpus.utterances, pitch, speakers, stats, corpus.labels,
                             cfg.extract)
    return Prepared(corpus, speakers, pitch, stats, cands)


def interior(cands: Sequence[BoundaryCandidate]) -> list[BoundaryCandidate]:
    """Inter-word boundaries only (drops the end-of-stream position)."""
    return [c for c in cands if not c.is_final]


def build_dataset(cands: Sequence[BoundaryCandidate], task: str,
                  names: Sequence[str] = FEATURE_NAMES) -> Dataset:
    cands = interior(cands)
    if any(c.label is None for c in cands):
        raise PipelineError("training boundaries need reference labels")
    y = task_targets([c.label for c in cands], task)
    return Dataset.from_rows([c.features for c in cands], y, ("none", "boundary"),
                             list(names), groups=[c.channel for c in cands])


def split_channels(channels: Sequence[str], fractions: Sequence[float], seed: int
                   ) -> list[list[str]]:
    """Shuffle channels and cut them into consecutive parts by ``fractions``."""
    chans = sorted(channels)
    order = np.random.default_rng(seed).permutation(len(chans))
    shuffled = [chans[i] for i in order]
    cuts = np.round(np.cumsum(fractions) / np.sum(fractions) * len(chans)).astype(int)
    parts, lo = [], 0
    for hi in cuts:
        parts.append(sorted(shuffled[lo:hi]))
        lo = hi
    return parts


def train_boundary_tree(data: Dataset, cfg: PipelineConfig, features: Sequence[str] | None = None
                        ) -> Tree:
    """Pruned tree, trained on a class-balanced subsample when configured."""
    feats = list(features) if features is not None else [f for f in cfg.features if f in data.names]
    d = data.select(feats)
    data_prior = np.bincount(data.y, minlength=2) / len(data)
    if cfg.downsample and len(np.unique(data.y)) > 1:
        d = d.subset(downsample(d.y, cfg.seed))
    tree = train_pruned(d, cfg.tree, seed=cfg.seed)
    tree.data_prior = data_prior
    return tree


def tree_posteriors(tree: Tree, cands: Sequence[BoundaryCandidate]
                    ) -> "dict[str, np.ndarray]":
    """Raw tree P(boundary) per channel, interior boundaries only."""
    out = {}
    for ch, cs in group_by_channel(interior(cands)).items():
        d = Dataset.from_rows([c.features for c in cs], np.zeros(len(cs), dtype=int),
                              tree.classes, sorted(_tree_features(tree)))
        out[ch] = predict_proba(tree, d)[:, 1] if len(cs) else np.zeros(0)
    return out


def _tree_features(tree: Tree) -> set:
    names, stack = set(), [tree.root]
    while stack:
        n = stack.pop()
        if not n.is_leaf:
            names.add(n.feature)
            stack += [n.left, n.right]
    return names


def tree_priors(tree: Tree) -> tuple[float, float]:
    p = tree.train_prior if tree.train_prior is not None else np.array([0.5, 0.5])
    return float(p[0]), float(p[1])


def tree_only(tree: Tree, p_dt: np.ndarray) -> np.ndarray:
    """Tree posteriors moved back to the original class prior."""
    train = tree_priors(tree)[1]
    target = float(tree.data_prior[1]) if tree.data_prior is not None else train
    return reprior(p_dt, train, target)


# -- lexical models ------------------------------------------------------------------

def channel_streams(corpus: Corpus, channels: Sequence[str] | None = None
                    ) -> "dict[str, list[WordToken]]":
    streams = channel_words(corpus.utterances)
    keep = streams.keys() if channels is None else [c for c in streams if c in set(channels)]
    return {ch: [w for w, _ in streams[ch]] for ch in keep}


def train_lm(corpus: Corpus, cfg: PipelineConfig, channels: Sequence[str] | None = None
             ) -> NgramModel:
    if corpus.labels is None:
        raise PipelineError("language model training needs reference labels")
    seqs = []
    for ch, words in channel_streams(corpus, channels).items():
        flags = task_targets(corpus.labels[ch], "sentence")
        seqs.append(tagged_sequence([w.word for w in words], flags))
    return train_ngram(seqs, cfg.ngram)


def lm_posteriors(model: NgramModel, corpus: Corpus, channels: Sequence[str] | None = None
                  ) -> "dict[str, np.ndarray]":
    return {ch: boundary_posteriors(model, [w.word for w in ws])
            for ch, ws in channel_streams(corpus, channels).items()}


def topic_training_data(corpus: Corpus, cfg: PipelineConfig,
                        channels: Sequence[str] | None = None):
    """Stories (cut at reference topic boundaries) and their first/last pseudo-sentences."""
    if corpus.labels is None:
        raise PipelineError("topic model training needs reference labels")
    stories, edges = [], []
    for ch, words in channel_streams(corpus, channels).items():
        flags = task_targets(corpus.labels[ch], "topic")
        cut = [i for i, f in enumerate(flags) if f]
        sents = chop(words, cfg.topic.chop_threshold, cut)
        cur: list = []
        for s in sents:
            cur.append(s)
            if flags[s.last] or s.last == len(words) - 1:
                stories.append([w for x in cur for w in x.words])
                edges.append((list(cur[0].words), list(cur[-1].words)))
                cur = []
    return stories, edges


def train_topic(corpus: Corpus, cfg: PipelineConfig, channels: Sequence[str] | None = None
                ) -> TopicModel:
    stories, edges = topic_training_data(corpus, cfg, channels)
    t = cfg.topic
    return train_topic_model(stories, edges, t.k, t.passes, cfg.seed, t.smoothing, t.min_words,
                             t.max_words, t.penalty, t.normalize, t.chop_threshold)


def topic_word_scores(tree: Tree | None, p_dt: np.ndarray | None, mcw: float, n_words: int
                      ) -> np.ndarray | None:
    """Per-word (none, boundary) prosodic log scores, zero at the stream end."""
    if tree is None or p_dt is None or mcw == 0:
        return None
    sc = np.zeros((n_words, 2))
    sc[:len(p_dt)] = prosody_scores(p_dt, tree_priors(tree), mcw)
    return sc


def decode_topics(model: TopicModel, corpus: Corpus, channels: Sequence[str] | None = None,
                  tree: Tree | None = None, p_dt: "dict[str, np.ndarray] | None" = None,
                  mcw: float = 0.0, penalty: float | None = None) -> "dict[str, list[int]]":
    out = {}
    for ch, words in channel_streams(corpus, channels).items():
        sc = topic_word_scores(tree, None if p_dt is None else p_dt.get(ch), mcw, len(words))
        out[ch] = segment_topics(model, words, sc, penalty)
    return out


def tdt_total(ref: "dict[str, Sequence[int]]", hyp: "dict[str, Sequence[int]]",
              config: TdtConfig) -> TdtCounts:
    total = TdtCounts()
    for ch in ref:
        total = total.add(tdt_counts(ref[ch], hyp[ch], config))
    return total


def tune_topic(model: TopicModel, corpus: Corpus, cfg: PipelineConfig,
               channels: Sequence[str], tree: Tree | None = None,
               p_dt: "dict[str, np.ndarray] | None" = None) -> tuple[float, float]:
    """Grid-search switch penalty (and weight, with a tree) against the TDT cost.

    Ties go to the larger penalty, then the smaller weight.
    """
    ref = {ch: task_targets(corpus.labels[ch], "topic") for ch in channels}
    mcws = (0.0,) if tree is None else tuple(w for w in (0.0, 0.5, 1.0, 2.0, 4.0))
    best = None
    for w in mcws:
        for pen in cfg.topic.penalty_grid:
            hyp = decode_topics(model, corpus, channels, tree, p_dt, w, pen)
            cost = round(tdt_total(ref, hyp, cfg.tdt).cost(cfg.tdt), 12)
            key = (cost, -pen, w)
            if best is None or key < best[0]:
                best = (key, pen, w)
    return best[1], best[2]


# -- sentence experiment ------------------------------------------------------------

def _cat(d: "dict[str, np.ndarray]", chans: Sequence[str]) -> np.ndarray:
    parts = [np.asarray(d[c], dtype=float) for c in chans]
    return np.concatenate(parts) if parts else np.zeros(0)


@dataclass
class SentenceResult:
    errors: dict
    lam: float
    mcw: float
    chosen: str
    tree: Tree
    chance: float


def sentence_experiment(prep: Prepared, cfg: PipelineConfig,
                        split: Sequence[float] = (0.5, 0.25, 0.25)) -> SentenceResult:
    """Train on one channel split, tune on the next, report test error of every model."""
    corpus = prep.corpus
    train, dev, test = split_channels(corpus.channels, split, cfg.seed)
    if not (train and dev and test):
        raise PipelineError("need enough channels for train/dev/test splits")
    by_ch = prep.by_channel()
    tr_cands = [c for ch in train for c in by_ch[ch]]
    tree = train_boundary_tree(build_dataset(tr_cands, "sentence", cfg.features), cfg)
    lm = train_lm(corpus, cfg, train)
    ref = {ch: task_targets(corpus.labels[ch], "sentence")[:-1] for ch in dev + test}
    p_dt = tree_posteriors(tree, [c for ch in dev + test for c in by_ch[ch]])
    p_lm = lm_posteriors(lm, corpus, dev + test)
    p_tree = {ch: tree_only(tree, p_dt[ch]) for ch in dev + test}
    words = {ch: [w.word for w in ws] for ch, ws in channel_streams(corpus, dev + test).items()}
    pri = tree_priors(tree)

    def integ(w, chans):
        return _cat({ch: integrated_posteriors(lm, words[ch], p_dt[ch], pri, w)
                     for ch in chans}, chans)

    r_dev = _cat(ref, dev)
    lam, lam_score = tune_lambda(_cat(p_lm, dev), _cat(p_tree, dev), r_dev, "error",
                                 threshold=cfg.combine.threshold)
    mcw, mcw_score = tune_mcw(lambda w: integ(w, dev), r_dev, "error",
                              threshold=cfg.combine.threshold)
    chosen = "interpolate" if lam_score <= mcw_score else "integrated"
    r_test = _cat(ref, test)
    th = cfg.combine.threshold
    errors = {
        "lm": decision_error(_cat(p_lm, test), r_test, th),
        "tree": decision_error(_cat(p_tree, test), r_test, th),
        "interpolate": decision_error(interpolate(_cat(p_lm, test), _cat(p_tree, test), lam),
                                      r_test, th),
        "integrated": decision_error(integ(mcw, test), r_test, th),
    }
    errors["combined"] = errors[chosen]
    return SentenceResult(errors, lam, mcw, chosen, tree, float(np.mean(r_test)))
