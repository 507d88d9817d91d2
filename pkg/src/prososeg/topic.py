"""Topic segmentation with unigram cluster models and a topic HMM.

Training stories are grouped by multipass k-means into unigram cluster
models.  A word stream is chopped at long pauses into pseudo-sentences,
which are the HMM observations; every change of topic state (or a pass
through the shared end/start states) emits a topic boundary.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus_io import FormatError, WordToken

UNK = "<unk>"
NEG_INF = -math.inf
LN10 = math.log(10.0)


class TopicError(ValueError):
    pass


# -- chopping ---------------------------------------------------------------------

@dataclass(frozen=True)
class PseudoSentence:
    words: tuple[str, ...]
    start: float
    end: float
    first: int
    last: int


def chop(words: Sequence[WordToken], threshold: float = 0.65,
         split_after: Sequence[int] = ()) -> list[PseudoSentence]:
    """Split a channel's word stream at pauses longer than ``threshold``.

    Speaker changes also split, as does every index in ``split_after``
    (used to cut training data at reference topic boundaries).
    """
    out: list[PseudoSentence] = []
    extra = set(split_after)
    start = 0
    for i in range(len(words)):
        last = i == len(words) - 1
        cut = last or i in extra or words[i + 1].start - words[i].end > threshold \
            or words[i + 1].speaker != words[i].speaker
        if cut:
            seg = words[start:i + 1]
            out.append(PseudoSentence(tuple(w.word for w in seg), seg[0].start, seg[-1].end,
                                      start, i))
            start = i + 1
    return out


# -- cluster models -------------------------------------------------------------

@dataclass
class TopicClusters:
    vocab: tuple[str, ...]
    logprob: np.ndarray  # (k, V) natural log
    sizes: list[int]

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.vocab)}

    @property
    def k(self) -> int:
        return self.logprob.shape[0]

    def counts(self, words: Sequence[str]) -> np.ndarray:
        v = np.zeros(len(self.vocab))
        unk = self.index.get(UNK)
        for w in words:
            j = self.index.get(w, unk)
            if j is not None:
                v[j] += 1
        return v


def _unigram(counts: np.ndarray, smoothing: float) -> np.ndarray:
    p = counts + smoothing
    return np.log(p / p.sum())


def filter_stories(stories: Sequence[Sequence[str]], min_words: int = 300,
                   max_words: int = 3000) -> list[list[str]]:
    return [list(s) for s in stories if min_words <= len(s) <= max_words]


def cluster_topics(stories: Sequence[Sequence[str]], k: int = 100, passes: int = 5,
                   seed: int = 0, smoothing: float = 0.01, min_words: int = 300,
                   max_words: int = 3000) -> TopicClusters:
    """Multipass k-means over stories with unigram log-likelihood assignment."""
    docs = filter_stories(stories, min_words, max_words)
    if len(docs) < k:
        raise TopicError(f"need at least {k} stories after length filtering, got {len(docs)}")
    vocab = tuple(sorted({w for d in docs for w in d} | {UNK}))
    index = {w: i for i, w in enumerate(vocab)}
    X = np.zeros((len(docs), len(vocab)))
    for i, d in enumerate(docs):
        for w, c in Counter(d).items():
            X[i, index[w]] = c
    rng = np.random.default_rng(seed)
    seeds = np.sort(rng.choice(len(docs), size=k, replace=False))
    logp = np.array([_unigram(X[s], smoothing) for s in seeds])
    assign = None
    for _ in range(passes):
        ll = X @ logp.T
        new = np.argmax(ll, axis=1)
        # re-seed empty clusters with the worst-fit stories
        fit = ll[np.arange(len(docs)), new] / X.sum(axis=1)
        taken: set = set()
        for c in range(k):
            if np.any(new == c):
                continue
            sizes = np.bincount(new, minlength=k)
            for s in np.argsort(fit, kind="stable"):
                if s not in taken and sizes[new[s]] > 1:
                    new[s] = c
                    taken.add(int(s))
                    break
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        logp = np.array([_unigram(X[assign == c].sum(axis=0), smoothing) for c in range(k)])
    sizes = np.bincount(assign, minlength=k).tolist()
    return TopicClusters(vocab, logp, sizes)


# -- topic HMM ----------------------------------------------------------------------

@dataclass
class TopicModel:
    """Clusters plus shared start/end state models and decoding settings."""

    clusters: TopicClusters
    start_logprob: np.ndarray
    end_logprob: np.ndarray
    penalty: float = 5.0
    normalize: bool = True
    chop_threshold: float = 0.65
    start_size: int = 0
    end_size: int = 0

    @property
    def n_states(self) -> int:
        return self.clusters.k + 2

    def observation_scores(self, sents: Sequence[PseudoSentence]) -> np.ndarray:
        """(m, k+2) log scores; columns are clusters, then START, then END."""
        L = np.vstack([self.clusters.logprob, self.start_logprob, self.end_logprob])
        out = np.zeros((len(sents), L.shape[0]))
        for j, s in enumerate(sents):
            c = self.clusters.counts(s.words)
            out[j] = L @ c
            if self.normalize and len(s.words):
                out[j] /= len(s.words)
        return out


def train_topic_model(stories: Sequence[Sequence[str]], boundary_sents: Sequence[
        tuple[Sequence[str], Sequence[str]]] = (), k: int = 100, passes: int = 5,
        seed: int = 0, smoothing: float = 0.01, min_words: int = 300, max_words: int = 3000,
        penalty: float = 5.0, normalize: bool = True, chop_threshold: float = 0.65
        ) -> TopicModel:
    """Clusters from ``stories``; start/end models from (initial, final) sentence pairs."""
    clusters = cluster_topics(stories, k, passes, seed, smoothing, min_words, max_words)
    first = clusters.counts([w for a, _ in boundary_sents for w in a])
    last = clusters.counts([w for _, b in boundary_sents for w in b])
    return TopicModel(clusters, _unigram(first, smoothing), _unigram(last, smoothing),
                      penalty, normalize, chop_threshold, len(boundary_sents),
                      len(boundary_sents))


def transition_structure(k: int, penalty: float) -> tuple[np.ndarray, np.ndarray]:
    """Log transition scores and boundary flags over clusters + START + END."""
    S = k + 2
    st, en = k, k + 1
    T = np.zeros((S, S))
    B = np.zeros((S, S), dtype=bool)
    for a in range(S):
        for b in range(S):
            if a < k and b < k:
                B[a, b] = a != b
            elif a < k and b == st:
                B[a, b] = True
            elif a < k and b == en:
                B[a, b] = False
            elif a == st:
                if b == st:
                    T[a, b] = NEG_INF
            elif a == en:
                if b == en:
                    T[a, b] = NEG_INF
                else:
                    B[a, b] = True
    pen = NEG_INF if math.isinf(penalty) else -penalty
    T = np.where(B, T + pen, T)
    return T, B


def _initial(k: int) -> np.ndarray:
    init = np.zeros(k + 2)
    init[k + 1] = NEG_INF
    return init


def _ex(extra, j: int, b: bool) -> float:
    return 0.0 if extra is None else float(extra[j][1 if b else 0])


def topic_viterbi(obs: np.ndarray, T: np.ndarray, B: np.ndarray,
                  extra: np.ndarray | None = None) -> tuple[list[int], list[int], float]:
    """Best state path, junction boundary flags and score.

    ``extra[j]`` holds log scores (no boundary, boundary) for the junction
    after observation j.  Ties prefer a non-boundary predecessor, then the
    lowest state index.
    """
    m, S = obs.shape
    if m == 0:
        raise TopicError("cannot decode an empty stream")
    k = S - 2
    delta = _initial(k) + obs[0]
    back = np.zeros((m, S), dtype=int)
    for j in range(1, m):
        ex = np.where(B, _ex(extra, j - 1, True), _ex(extra, j - 1, False))
        cand = delta[:, None] + T + ex
        new = np.empty(S)
        for s in range(S):
            col = cand[:, s]
            best = col.max()
            if best == NEG_INF:
                back[j, s] = 0
                new[s] = NEG_INF
                continue
            tol = 1e-12 * max(1.0, abs(best))
            ties = np.nonzero(col >= best - tol)[0]
            nb = [p for p in ties if not B[p, s]]
            p = nb[0] if nb else ties[0]
            back[j, s] = p
            new[s] = col[p]
        delta = new + obs[j]
    best = float(delta.max())
    s = int(np.nonzero(delta >= best - 1e-12 * max(1.0, abs(best)))[0][0])
    path = [s]
    for j in range(m - 1, 0, -1):
        s = int(back[j, s])
        path.append(s)
    path.reverse()
    flags = [int(B[path[j], path[j + 1]]) for j in range(m - 1)]
    return path, flags, best


def _lse(a: np.ndarray, axis=None):
    mx = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis) if axis is not None else float(out.squeeze())


def topic_forward_backward(obs: np.ndarray, T: np.ndarray, B: np.ndarray,
                           extra: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Posterior probability of a boundary at each junction, and log total."""
    m, S = obs.shape
    if m == 0:
        raise TopicError("cannot decode an empty stream")
    k = S - 2
    trans = []
    for j in range(m - 1):
        ex = np.where(B, _ex(extra, j, True), _ex(extra, j, False))
        trans.append(T + ex)
    alpha = np.zeros((m, S))
    alpha[0] = _initial(k) + obs[0]
    for j in range(1, m):
        alpha[j] = _lse(alpha[j - 1][:, None] + trans[j - 1], axis=0) + obs[j]
    total = _lse(alpha[-1])
    beta = np.zeros((m, S))
    post = np.zeros(m - 1)
    for j in range(m - 2, -1, -1):
        joint = alpha[j][:, None] + trans[j] + (obs[j + 1] + beta[j + 1])[None, :]
        beta[j] = _lse(trans[j] + (obs[j + 1] + beta[j + 1])[None, :], axis=1)
        lb = _lse(np.where(B, joint, NEG_INF))
        post[j] = 0.0 if lb == NEG_INF else math.exp(lb - total)
    return post, total


def junction_scores(sents: Sequence[PseudoSentence], word_scores: np.ndarray) -> np.ndarray:
    """Per-junction (none, boundary) scores taken from word-level boundary scores."""
    return np.array([word_scores[s.last] for s in sents[:-1]]).reshape(-1, 2)


def segment_topics(model: TopicModel, words: Sequence[WordToken],
                   extra_word_scores: np.ndarray | None = None,
                   penalty: float | None = None) -> list[int]:
    """Word-level topic boundary flags (boundary after word i) for one channel."""
    if not words:
        raise TopicError("cannot segment an empty stream")
    sents = chop(words, model.chop_threshold)
    flags = [0] * len(words)
    if len(sents) < 2:
        return flags
    obs = model.observation_scores(sents)
    T, B = transition_structure(model.clusters.k,
                                model.penalty if penalty is None else penalty)
    extra = None if extra_word_scores is None else junction_scores(sents, extra_word_scores)
    _, jflags, _ = topic_viterbi(obs, T, B, extra)
    for s, f in zip(sents[:-1], jflags):
        flags[s.last] = f
    return flags


def topic_posteriors(model: TopicModel, words: Sequence[WordToken],
                     extra_word_scores: np.ndarray | None = None) -> np.ndarray:
    """Word-level P(topic boundary after word i); zero inside pseudo-sentences."""
    sents = chop(words, model.chop_threshold)
    post = np.zeros(len(words))
    if len(sents) < 2:
        return post
    obs = model.observation_scores(sents)
    T, B = transition_structure(model.clusters.k, model.penalty)
    extra = None if extra_word_scores is None else junction_scores(sents, extra_word_scores)
    p, _ = topic_forward_backward(obs, T, B, extra)
    for s, v in zip(sents[:-1], p):
        post[s.last] = v
    return post


# -- serialization -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(-99.0 if x == NEG_INF else float(x) / LN10)


def write_topic_model(model: TopicModel, path: str | Path) -> None:
    c = model.clusters
    lines = [f"penalty {model.penalty!r}", f"normalize {int(model.normalize)}",
             f"chop {model.chop_threshold!r}", f"vocab {len(c.vocab)}"]
    rows = [(str(i), c.sizes[i], c.logprob[i]) for i in range(c.k)]
    rows += [("START", model.start_size, model.start_logprob),
             ("END", model.end_size, model.end_logprob)]
    for name, size, lp in rows:
        lines.append(f"cluster {name} {size}")
        lines += [f"{w} {_fmt(v)}" for w, v in zip(c.vocab, lp)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_topic_model(path: str | Path) -> TopicModel:
    header: dict = {}
    blocks: list = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) == 3 and toks[0] == "cluster":
                blocks.append((toks[1], int(toks[2]), [], []))
                continue
            if len(toks) != 2:
                raise FormatError(f"expected 2 fields, got {len(toks)}", path, lineno)
            if not blocks:
                header[toks[0]] = toks[1]
                continue
            try:
                v = float(toks[1])
            except ValueError:
                raise FormatError(f"bad log-probability {toks[1]!r}", path, lineno) from None
            blocks[-1][2].append(toks[0])
            blocks[-1][3].append(NEG_INF if v <= -99.0 else v * LN10)
    named = {b[0]: b for b in blocks}
    if "START" not in named or "END" not in named:
        raise FormatError("topic model needs START and END blocks", path, 1)
    clusters = [b for b in blocks if b[0] not in ("START", "END")]
    if not clusters:
        raise FormatError("topic model has no clusters", path, 1)
    vocab = tuple(clusters[0][2])
    for b in blocks:
        if tuple(b[2]) != vocab:
            raise FormatError(f"cluster {b[0]} vocabulary differs", path, 1)
    tc = TopicClusters(vocab, np.array([b[3] for b in clusters]), [b[1] for b in clusters])
    return TopicModel(tc, np.array(named["START"][3]), np.array(named["END"][3]),
                      float(header.get("penalty", 5.0)), bool(int(header.get("normalize", 1))),
                      float(header.get("chop", 0.65)), named["START"][1], named["END"][1])


def write_topic_decisions(decisions: "dict[str, Sequence[int]]", path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ch, flags in decisions.items():
            for i, f in enumerate(flags):
                if f:
                    fh.write(f"{ch} {i} TOPIC\n")
