"""Scoring of boundary hypotheses.

Boundary error counts mislabeled word boundaries.  When the hypothesis words
differ from the reference, the two word strings are aligned first and every
boundary slot attached to an inserted or deleted word counts as an error.
Topic segmentation is scored with a windowed miss/false-alarm cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

NONE_LABELS = frozenset({"none", 0, "0", None})


class EvaluationError(ValueError):
    pass


@dataclass
class ScoreReport:
    error: float
    n_ref: int
    correct: int
    substituted: int
    inserted: int
    deleted: int
    chance: float
    lower_bound: float = 0.0

    @property
    def relative_error(self) -> float | None:
        try:
            return relative_error(self.error, self.chance, self.lower_bound)
        except EvaluationError:
            return None

    def format(self, title: str = "boundary error") -> str:
        rows = [("metric", title), ("reference_slots", str(self.n_ref)),
                ("correct", str(self.correct)), ("mislabeled", str(self.substituted)),
                ("inserted", str(self.inserted)), ("deleted", str(self.deleted)),
                ("error", f"{self.error:.6f}"), ("chance", f"{self.chance:.6f}"),
                ("lower_bound", f"{self.lower_bound:.6f}")]
        width = max(len(k) for k, _ in rows)
        body = [f"{k.ljust(width)}  {v}" for k, v in rows]
        rel = self.relative_error
        body.append("")
        body.append(f"error={self.error!r}")
        body.append(f"chance={self.chance!r}")
        body.append(f"relative_error={'nan' if rel is None else repr(rel)}")
        return "\n".join(body) + "\n"


def _is_none(label) -> bool:
    return label in NONE_LABELS


def boundary_error(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> ScoreReport:
    """Fraction of boundary slots whose hypothesized class is wrong."""
    if len(ref) != len(hyp):
        raise EvaluationError(f"label streams differ in length: {len(ref)} vs {len(hyp)}")
    n = len(ref)
    wrong = sum(1 for r, h in zip(ref, hyp) if r != h)
    chance = sum(1 for r in ref if not _is_none(r)) / n if n else 0.0
    return ScoreReport(wrong / n if n else 0.0, n, n - wrong, wrong, 0, 0, chance, 0.0)


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> list[tuple[int | None, int | None]]:
    """Unit-cost Levenshtein alignment as (ref index, hyp index) pairs.

    Traceback prefers match, then substitution, deletion, insertion.
    """
    n, m = len(ref), len(hyp)
    D = np.zeros((n + 1, m + 1), dtype=np.int64)
    D[:, 0] = np.arange(n + 1)
    D[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        ri = ref[i - 1]
        for j in range(1, m + 1):
            sub = D[i - 1, j - 1] + (0 if ri == hyp[j - 1] else 1)
            D[i, j] = min(sub, D[i - 1, j] + 1, D[i, j - 1] + 1)
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            if D[i, j] == D[i - 1, j - 1] + (0 if same else 1):
                pairs.append((i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and D[i, j] == D[i - 1, j] + 1:
            pairs.append((i - 1, None))
            i -= 1
            continue
        pairs.append((None, j - 1))
        j -= 1
    pairs.reverse()
    return pairs


def align_and_score(ref_words: Sequence[str], ref_labels: Sequence[Hashable],
                    hyp_words: Sequence[str], hyp_labels: Sequence[Hashable]) -> ScoreReport:
    """Boundary error after aligning hypothesis words to reference words."""
    if len(ref_words) != len(ref_labels) or len(hyp_words) != len(hyp_labels):
        raise EvaluationError("each word needs exactly one boundary label")
    correct = sub = ins = dele = 0
    for ri, hi in align_words(ref_words, hyp_words):
        if ri is not None and hi is not None:
            if ref_labels[ri] == hyp_labels[hi]:
                correct += 1
            else:
                sub += 1
        elif ri is not None:
            dele += 1
        else:
            ins += 1
    n = len(ref_words)
    chance = sum(1 for r in ref_labels if not _is_none(r)) / n if n else 0.0
    err = (sub + ins + dele) / n if n else float(ins > 0)
    lower = (ins + dele) / n if n else 0.0
    return ScoreReport(err, n, correct, sub, ins, dele, chance, lower)


@dataclass
class TdtConfig:
    miss_weight: float = 0.3
    fa_weight: float = 0.7
    window: int = 50

    def __post_init__(self):
        if abs(self.miss_weight + self.fa_weight - 1.0) > 1e-12:
            raise EvaluationError("TDT weights must sum to 1")
        if self.window < 1:
            raise EvaluationError("TDT window must be >= 1 word")


@dataclass
class TdtCounts:
    miss: int = 0
    ref_diff: int = 0
    fa: int = 0
    ref_same: int = 0

    def add(self, other: "TdtCounts") -> "TdtCounts":
        return TdtCounts(self.miss + other.miss, self.ref_diff + other.ref_diff,
                         self.fa + other.fa, self.ref_same + other.ref_same)

    def cost(self, config: TdtConfig | None = None) -> float:
        cfg = config or TdtConfig()
        p_miss = self.miss / self.ref_diff if self.ref_diff else 0.0
        p_fa = self.fa / self.ref_same if self.ref_same else 0.0
        return cfg.miss_weight * p_miss + cfg.fa_weight * p_fa


def tdt_counts(ref: Sequence[int], hyp: Sequence[int], config: TdtConfig | None = None
               ) -> TdtCounts:
    """Window pair counts; ``ref``/``hyp`` flag a topic boundary after each word."""
    cfg = config or TdtConfig()
    if len(ref) != len(hyp):
        raise EvaluationError(f"boundary streams differ in length: {len(ref)} vs {len(hyp)}")
    n = len(ref)
    if n < 2:
        return TdtCounts()
    k = min(cfg.window, n - 1)
    seg_r = np.concatenate([[0], np.cumsum(np.asarray(ref[:-1], dtype=int) != 0)])
    seg_h = np.concatenate([[0], np.cumsum(np.asarray(hyp[:-1], dtype=int) != 0)])
    rd = seg_r[:-k] != seg_r[k:]
    hd = seg_h[:-k] != seg_h[k:]
    return TdtCounts(int(np.count_nonzero(rd & ~hd)), int(np.count_nonzero(rd)),
                     int(np.count_nonzero(~rd & hd)), int(np.count_nonzero(~rd)))


def tdt_cost(ref: Sequence[int], hyp: Sequence[int], config: TdtConfig | None = None) -> float:
    """0.3 P_miss + 0.7 P_FA over word pairs one window apart."""
    return tdt_counts(ref, hyp, config).cost(config)


def relative_error(score: float, chance: float, lower_bound: float = 0.0) -> float:
    """Share of the chance error left after modeling."""
    if not chance > lower_bound:
        raise EvaluationError("chance score must exceed the lower bound")
    return (score - lower_bound) / (chance - lower_bound)


def format_tdt_report(counts: TdtCounts, config: TdtConfig | None = None) -> str:
    cfg = config or TdtConfig()
    cost = counts.cost(cfg)
    chance = cfg.miss_weight if counts.ref_diff else 0.0
    rows = [("metric", "tdt cost"), ("window", str(cfg.window)),
            ("misses", f"{counts.miss}/{counts.ref_diff}"),
            ("false_alarms", f"{counts.fa}/{counts.ref_same}"),
            ("cost", f"{cost:.6f}"), ("chance", f"{chance:.6f}")]
    width = max(len(k) for k, _ in rows)
    body = [f"{k.ljust(width)}  {v}" for k, v in rows]
    rel = relative_error(cost, chance) if chance > 0 else None
    body += ["", f"error={cost!r}", f"chance={chance!r}",
             f"relative_error={'nan' if rel is None else repr(rel)}"]
    return "\n".join(body) + "\n"
