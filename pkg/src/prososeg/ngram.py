"""Hidden-event N-gram language model with Katz backoff.

Boundary events are pseudo-words (``<S>``) interleaved with the words of the
training text.  At test time the events are hidden; the decoder sums or
maximizes over every tagging consistent with the observed words.  All
probabilities are kept as natural logs internally and written as log10 in
the standard back-off text format.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus_io import FormatError

BOUNDARY = "<S>"
START = "<s>"
UNK = "<unk>"
NEG_INF = -math.inf
LN10 = math.log(10.0)
ARPA_NEG_INF = -99.0


class NgramError(ValueError):
    pass


@dataclass
class NgramConfig:
    order: int = 4
    gt_max: int = 5
    min_word_count: int = 2
    # n-grams of order n are kept only when their count reaches cutoffs[n]
    cutoffs: dict = field(default_factory=lambda: {1: 1, 2: 1, 3: 2, 4: 2})

    def cutoff(self, n: int) -> int:
        return int(self.cutoffs.get(n, max(self.cutoffs.values(), default=1)))


@dataclass
class NgramModel:
    """Back-off model: explicit n-gram log-probs plus context back-off weights."""

    order: int
    vocab: tuple[str, ...]
    logprob: dict = field(default_factory=dict)
    backoff: dict = field(default_factory=dict)

    def __post_init__(self):
        self._vset = frozenset(self.vocab)
        self._cache: dict = {}

    @property
    def predict_vocab(self) -> tuple[str, ...]:
        """Tokens that can be predicted (the start marker is context only)."""
        return tuple(w for w in self.vocab if w != START)

    def map_word(self, w: str) -> str:
        return w if w in self._vset else UNK

    def logp(self, word: str, context: Sequence[str]) -> float:
        """Natural-log P(word | context) by backing off through shorter contexts."""
        h = tuple(context)[max(0, len(context) - (self.order - 1)):] if self.order > 1 else ()
        key = (word, h)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        acc = 0.0
        while True:
            lp = self.logprob.get(h + (word,))
            if lp is not None:
                val = acc + lp
                break
            if not h:
                val = NEG_INF
                break
            acc += self.backoff.get(h, 0.0)
            h = h[1:]
        if len(self._cache) > 2_000_000:
            self._cache.clear()
        self._cache[key] = val
        return val

    def context_sum(self, context: Sequence[str]) -> float:
        return math.fsum(math.exp(self.logp(w, context)) for w in self.predict_vocab)


# -- training -------------------------------------------------------------------

def tagged_sequence(words: Sequence[str], boundaries: Sequence[int]) -> list[str]:
    """Interleave ``<S>`` after each word whose boundary flag is set."""
    out = []
    for w, b in zip(words, boundaries):
        out.append(w)
        if b:
            out.append(BOUNDARY)
    return out


def good_turing_discounts(count_of_counts: Counter, gt_max: int) -> dict[int, float]:
    """Katz discount ratios d_r for 1 <= r <= k.

    ``k`` is lowered from ``gt_max`` until every ratio lies in (0, 1].  When
    no ``k`` works, absolute discounting with D = n1 / (n1 + 2 n2) is
    expressed as a per-count ratio under the key ``"abs"``.
    """
    n = count_of_counts
    n1 = n.get(1, 0)
    for k in range(gt_max, 0, -1):
        if n1 == 0:
            break
        common = (k + 1) * n.get(k + 1, 0) / n1
        if 1 - common <= 0:
            continue
        ds = {}
        ok = True
        for r in range(1, k + 1):
            if n.get(r, 0) == 0:
                ok = False
                break
            d = ((r + 1) * n.get(r + 1, 0) / (r * n[r]) - common) / (1 - common)
            if not 0 < d <= 1:
                ok = False
                break
            ds[r] = d
        if ok:
            return ds
    n2 = n.get(2, 0)
    return {"abs": n1 / (n1 + 2 * n2) if n1 > 0 and n2 > 0 else 0.5}


def _discounted(c: int, ds: dict) -> float:
    if "abs" in ds:
        return max(c - ds["abs"], 0.0)
    return c * ds.get(c, 1.0)


def train_ngram(sequences: Iterable[Sequence[str]], config: NgramConfig | None = None
                ) -> NgramModel:
    """Katz back-off model from tagged token sequences (``<S>`` already inserted)."""
    cfg = config or NgramConfig()
    N = cfg.order
    if N < 1:
        raise NgramError("order must be >= 1")
    seqs = [list(s) for s in sequences if len(s)]
    if not seqs:
        raise NgramError("cannot train a language model on an empty corpus")
    wc = Counter(w for s in seqs for w in s)
    keep = {w for w, c in wc.items() if c >= cfg.min_word_count or w == BOUNDARY}
    vocab = sorted(keep | {UNK, BOUNDARY})
    vocab_full = tuple(sorted(set(vocab) | {START}))

    counts: list[Counter] = [Counter() for _ in range(N + 1)]
    ctx_tot: list[Counter] = [Counter() for _ in range(N + 1)]
    for s in seqs:
        toks = [START] + [w if w in keep else UNK for w in s]
        for j in range(1, len(toks)):
            for n in range(1, N + 1):
                if j - n + 1 < 0:
                    break
                g = tuple(toks[j - n + 1:j + 1])
                counts[n][g] += 1
                ctx_tot[n][g[:-1]] += 1

    # apply cutoffs top-down, keeping prefixes needed to hold back-off weights
    kept: list[dict] = [dict() for _ in range(N + 1)]
    needed: set = set()
    for n in range(N, 0, -1):
        cut = cfg.cutoff(n)
        kept[n] = {g: c for g, c in counts[n].items() if c >= cut or g in needed}
        needed = {g[:-1] for g in kept[n] if len(g) > 1}

    model = NgramModel(N, vocab_full)
    lp = model.logprob
    # unigrams
    total = sum(counts[1].values())
    uni_vocab = [w for w in vocab_full if w != START]
    seen = {g[0]: c for g, c in kept[1].items()}
    unseen = [w for w in uni_vocab if w not in seen]
    if unseen:
        ds = good_turing_discounts(Counter(seen.values()), cfg.gt_max)
        probs = {w: _discounted(c, ds) / total for w, c in seen.items()}
        left = 1.0 - sum(probs.values())
        for w in unseen:
            probs[w] = left / len(unseen)
    else:
        probs = {w: c / total for w, c in seen.items()}
    z = math.fsum(probs.values())
    for w in uni_vocab:
        p = probs.get(w, 0.0) / z
        lp[(w,)] = math.log(p) if p > 0 else NEG_INF
    lp[(START,)] = NEG_INF

    for n in range(2, N + 1):
        ds = good_turing_discounts(Counter(kept[n].values()), cfg.gt_max)
        by_ctx: dict = defaultdict(list)
        for g, c in kept[n].items():
            by_ctx[g[:-1]].append((g[-1], c))
        for h in sorted(by_ctx):
            items = by_ctx[h]
            tot = ctx_tot[n][h]
            pstar = {w: _discounted(c, ds) / tot for w, c in items}
            num = 1.0 - math.fsum(pstar.values())
            den = 1.0 - math.fsum(math.exp(model.logp(w, h[1:])) for w, _ in items)
            if num <= 1e-12 or den <= 1e-12:
                # nothing left to back off with: renormalize the explicit entries
                z = math.fsum(pstar.values())
                for w, p in pstar.items():
                    lp[h + (w,)] = math.log(p / z) if p > 0 else NEG_INF
                model.backoff[h] = NEG_INF
            else:
                for w, p in pstar.items():
                    lp[h + (w,)] = math.log(p) if p > 0 else NEG_INF
                model.backoff[h] = math.log(num / den)
        model._cache.clear()
    return model


# -- serialization ---------------------------------------------------------------

def _fmt_log10(x: float) -> str:
    return repr(ARPA_NEG_INF if x == NEG_INF else x / LN10)


def format_arpa(model: NgramModel) -> str:
    by_order: dict[int, list] = defaultdict(list)
    for g in model.logprob:
        by_order[len(g)].append(g)
    lines = ["\\data\\"]
    for n in range(1, model.order + 1):
        lines.append(f"ngram {n}={len(by_order[n])}")
    for n in range(1, model.order + 1):
        lines.append("")
        lines.append(f"\\{n}-grams:")
        for g in sorted(by_order[n]):
            row = f"{_fmt_log10(model.logprob[g])}\t{' '.join(g)}"
            if g in model.backoff:
                row += f"\t{_fmt_log10(model.backoff[g])}"
            lines.append(row)
    lines += ["", "\\end\\"]
    return "\n".join(lines) + "\n"


def write_arpa(model: NgramModel, path: str | Path) -> None:
    Path(path).write_text(format_arpa(model), encoding="utf-8")


def _from_log10(tok: str) -> float:
    v = float(tok)
    return NEG_INF if v <= ARPA_NEG_INF else v * LN10


def read_arpa(path: str | Path) -> NgramModel:
    order = 0
    lp: dict = {}
    bo: dict = {}
    section = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line == "\\data\\":
                continue
            if line == "\\end\\":
                break
            if line.startswith("ngram "):
                order = max(order, int(line[6:].split("=")[0]))
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:].split("-")[0])
                continue
            if section is None:
                raise FormatError(f"unexpected line {line!r}", path, lineno)
            toks = line.split()
            if len(toks) not in (section + 1, section + 2):
                raise FormatError(f"bad {section}-gram line", path, lineno)
            try:
                g = tuple(toks[1:section + 1])
                lp[g] = _from_log10(toks[0])
                if len(toks) == section + 2:
                    bo[g] = _from_log10(toks[-1])
            except ValueError:
                raise FormatError(f"bad number in {line!r}", path, lineno) from None
    if order == 0:
        raise FormatError("missing \\data\\ header", path, 1)
    vocab = tuple(sorted({g[0] for g in lp if len(g) == 1}))
    return NgramModel(order, vocab, lp, bo)


# -- hidden-event decoding -----------------------------------------------------------

def _logsumexp(vals: list[float]) -> float:
    m = max(vals)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(v - m) for v in vals))


def _hist(model: NgramModel, h: tuple, *toks: str) -> tuple:
    if model.order == 1:
        return ()
    h = h + toks
    return h[max(0, len(h) - (model.order - 1)):]


def _steps(model: NgramModel, words: Sequence[str]):
    """Yield, per boundary i, a function expanding a history into successors."""
    ws = [model.map_word(w) for w in words]

    def expand(h: tuple, i: int):
        nxt = ws[i + 1]
        # event 0: no boundary; event 1: boundary tag then the next word
        yield 0, _hist(model, h, nxt), model.logp(nxt, h)
        hb = _hist(model, h, BOUNDARY)
        yield 1, _hist(model, hb, nxt), model.logp(BOUNDARY, h) + model.logp(nxt, hb)

    return ws, expand


def _extra(extra, i: int, e: int) -> float:
    return 0.0 if extra is None else float(extra[i][e])


def forward_backward(model: NgramModel, words: Sequence[str],
                     extra: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Posterior P(boundary after word i | words) for i < n-1, and log total.

    ``extra`` optionally adds per-boundary log scores (columns: none,
    boundary) to the transition scores, e.g. scaled prosodic likelihoods.
    """
    n = len(words)
    if n == 0:
        return np.zeros(0), 0.0
    ws, expand = _steps(model, words)
    h0 = _hist(model, (START,), ws[0]) if model.order > 1 else ()
    alphas = [{h0: model.logp(ws[0], (START,))}]
    for i in range(n - 1):
        nxt: dict = {}
        for h, a in alphas[-1].items():
            for e, h2, s in expand(h, i):
                nxt.setdefault(h2, []).append(a + s + _extra(extra, i, e))
        alphas.append({h: _logsumexp(v) for h, v in nxt.items()})
    total = _logsumexp(list(alphas[-1].values()))
    beta = {h: 0.0 for h in alphas[-1]}
    post = np.zeros(n - 1)
    for i in range(n - 2, -1, -1):
        nb: dict = {}
        ev = ([], [])
        for h, a in alphas[i].items():
            for e, h2, s in expand(h, i):
                t = s + _extra(extra, i, e)
                b = beta.get(h2, NEG_INF)
                nb.setdefault(h, []).append(t + b)
                ev[e].append(a + t + b)
        lb = _logsumexp(ev[1]) if ev[1] else NEG_INF
        z = _logsumexp([lb, _logsumexp(ev[0]) if ev[0] else NEG_INF])
        post[i] = 0.0 if z == NEG_INF or lb == NEG_INF else math.exp(lb - z)
        beta = {h: _logsumexp(v) for h, v in nb.items()}
    return post, total


def boundary_posteriors(model: NgramModel, words: Sequence[str],
                        extra: np.ndarray | None = None) -> np.ndarray:
    return forward_backward(model, words, extra)[0]


def viterbi_decode(model: NgramModel, words: Sequence[str],
                   extra: np.ndarray | None = None) -> tuple[list[int], float]:
    """Most likely tagging (1 = boundary after word i) and its log score.

    Ties are resolved toward no boundary.
    """
    n = len(words)
    if n == 0:
        return [], 0.0
    ws, expand = _steps(model, words)
    h0 = _hist(model, (START,), ws[0]) if model.order > 1 else ()
    cur = {h0: model.logp(ws[0], (START,))}
    backs = []
    for i in range(n - 1):
        nxt: dict = {}
        bp: dict = {}
        for h, a in cur.items():
            for e, h2, s in expand(h, i):
                v = a + s + _extra(extra, i, e)
                if h2 not in nxt or v > nxt[h2] + 1e-12 * max(1.0, abs(v)):
                    nxt[h2] = v
                    bp[h2] = (h, e)
        backs.append(bp)
        cur = nxt
    best_h, best = None, NEG_INF
    for h, v in cur.items():
        if best_h is None or v > best + 1e-12 * max(1.0, abs(v)):
            best_h, best = h, v
    tags = [0] * (n - 1)
    h = best_h
    for i in range(n - 2, -1, -1):
        h, e = backs[i][h]
        tags[i] = e
    return tags, best


def tagging_score(model: NgramModel, words: Sequence[str], tags: Sequence[int],
                  extra: np.ndarray | None = None) -> float:
    """Joint log score of the words with an explicit tagging."""
    ws = [model.map_word(w) for w in words]
    if not ws:
        return 0.0
    h = (START,)
    total = model.logp(ws[0], h)
    h = _hist(model, h, ws[0])
    for i in range(len(ws) - 1):
        if tags[i]:
            total += model.logp(BOUNDARY, h)
            h = _hist(model, h, BOUNDARY)
        total += model.logp(ws[i + 1], h) + _extra(extra, i, int(tags[i]))
        h = _hist(model, h, ws[i + 1])
    return total
