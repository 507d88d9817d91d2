"""Two-phase feature subset selection.

Phase 1 drops every feature whose removal does not hurt cross-validated
entropy reduction.  Phase 2 runs a beam search over subsets that grow from
a set of core features.  All subsets are scored on the same channel-level
folds so comparisons are not swamped by fold noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tree import (Dataset, Tree, TreeError, TreeTrainParams, assign_folds, entropy_reduction,
                   train_pruned, train_tree)


class SelectionError(ValueError):
    pass


@dataclass
class SelectionConfig:
    core_features: tuple[str, ...] = ("PAU_DUR",)
    beam_width: int = 4
    cv_folds: int = 4
    tolerance: float = 0.001
    seed: int = 0
    tree: TreeTrainParams = field(default_factory=TreeTrainParams)
    threads: int = 1

    def __post_init__(self):
        if self.beam_width < 1:
            raise SelectionError("beam width must be >= 1")
        if self.cv_folds < 2:
            raise SelectionError("cv_folds must be >= 2")


@dataclass
class SelectionResult:
    selected: tuple[str, ...]
    score: float
    log: list[tuple[tuple[str, ...], float]]
    tree: Tree | None = None
    phase1: tuple[str, ...] = ()


def _key(subset: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(subset))


class SubsetScorer:
    """Cross-validated entropy reduction of trees restricted to a subset."""

    def __init__(self, data: Dataset, config: SelectionConfig):
        if len(data) == 0:
            raise SelectionError("no data to select features on")
        self.data = data
        self.config = config
        groups = data.groups if data.groups is not None else np.arange(len(data)).astype(str)
        self.folds = assign_folds(list(groups), config.cv_folds, config.seed)
        self.cache: dict[tuple[str, ...], float] = {}
        self.log: list[tuple[tuple[str, ...], float]] = []

    def _compute(self, key: tuple[str, ...]) -> float:
        sub = self.data.select(key)
        total, used = 0.0, 0
        for f in sorted(set(self.folds.tolist())):
            tr = np.nonzero(self.folds != f)[0]
            te = np.nonzero(self.folds == f)[0]
            if len(te) == 0 or len(tr) == 0:
                continue
            try:
                tree = train_tree(sub.subset(tr), self.config.tree)
            except TreeError:
                continue
            total += entropy_reduction(tree, sub.subset(te))
            used += 1
        return total / used if used else 0.0

    def score_many(self, subsets: Sequence[Iterable[str]]) -> list[float]:
        keys = [_key(s) for s in subsets]
        todo = [k for k in dict.fromkeys(keys) if k not in self.cache]
        if self.config.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.config.threads) as ex:
                vals = list(ex.map(self._compute, todo))
        else:
            vals = [self._compute(k) for k in todo]
        for k, v in zip(todo, vals):
            self.cache[k] = v
            self.log.append((k, v))
        return [self.cache[k] for k in keys]

    def score(self, subset: Iterable[str]) -> float:
        return self.score_many([subset])[0]


def phase1_leave_one_out(features: Sequence[str], scorer: SubsetScorer,
                         config: SelectionConfig) -> tuple[str, ...]:
    """Drop features whose removal costs less than the tolerance.

    Removals are decided against the full set and applied together.  If the
    joint removal loses more than the tolerance (correlated features can
    each look redundant), eliminated features are re-admitted, most harmful
    removal first, until the reduced set is back within tolerance.
    """
    feats = _key(features)
    if len(feats) < 2:
        return feats
    core = set(config.core_features)
    full = scorer.score(feats)
    cands = [f for f in feats if f not in core]
    drops = scorer.score_many([[g for g in feats if g != f] for f in cands])
    removed = [(full - d, f) for f, d in zip(cands, drops) if d >= full - config.tolerance]
    kept = set(feats) - {f for _, f in removed}
    for _, f in sorted(removed, key=lambda t: (-t[0], t[1])):
        if scorer.score(kept) >= full - config.tolerance:
            break
        kept.add(f)
    return _key(kept)


def _order(item: tuple[tuple[str, ...], float]):
    key, score = item
    return (-round(score, 12), len(key), key)


def _pick(items, tolerance: float):
    """Smallest subset scoring within ``tolerance`` of the best; then score, then name."""
    top = max(score for _, score in items)
    near = [it for it in items if it[1] >= top - tolerance]
    return min(near, key=lambda it: (len(it[0]), -round(it[1], 12), it[0]))


def phase2_beam_search(features: Sequence[str], scorer: SubsetScorer,
                       config: SelectionConfig) -> SelectionResult:
    """Beam search upward from the core set.

    Every evaluated subset competes at the end; scores within the tolerance
    of the best count as ties and go to the smaller subset.
    """
    pool = _key(features)
    core = _key(f for f in config.core_features if f in pool)
    beam = [core]
    seen = [(core, scorer.score(core))]
    while True:
        cands = sorted({_key(set(b) | {f}) for b in beam for f in pool if f not in b})
        if not cands:
            break
        vals = scorer.score_many(cands)
        level = sorted(zip(cands, vals), key=_order)
        beam = [k for k, _ in level[:config.beam_width]]
        seen.extend(level)
    best = _pick(seen, config.tolerance)
    return SelectionResult(best[0], best[1], list(scorer.log))


def exhaustive_search(features: Sequence[str], scorer: SubsetScorer,
                      config: SelectionConfig) -> tuple[tuple[str, ...], float]:
    """Best superset of the core set by brute force (small pools only)."""
    pool = _key(features)
    core = set(f for f in config.core_features if f in pool)
    rest = [f for f in pool if f not in core]
    subsets = []
    for mask in range(1 << len(rest)):
        s = core | {rest[i] for i in range(len(rest)) if mask >> i & 1}
        subsets.append(_key(s))
    return _pick(list(zip(subsets, scorer.score_many(subsets))), config.tolerance)


def select_features(data: Dataset, features: Sequence[str] | None = None,
                    config: SelectionConfig | None = None, fit_tree: bool = True
                    ) -> SelectionResult:
    cfg = config or SelectionConfig()
    feats = _key(features if features is not None else data.names)
    missing_core = [f for f in cfg.core_features if f not in feats]
    if missing_core:
        raise SelectionError(f"core features not among candidates: {', '.join(missing_core)}")
    scorer = SubsetScorer(data, cfg)
    reduced = phase1_leave_one_out(feats, scorer, cfg)
    res = phase2_beam_search(reduced, scorer, cfg)
    res.phase1 = reduced
    res.log = list(scorer.log)
    if fit_tree and res.selected:
        res.tree = train_pruned(data.select(res.selected), cfg.tree, scorer.folds, cfg.seed)
    return res


def format_report(result: SelectionResult) -> str:
    lines = [f"entropy_reduction {score!r} features {','.join(key)}" for key, score in result.log]
    lines.append("SELECTED " + ",".join(result.selected))
    return "\n".join(lines) + "\n"


def write_report(result: SelectionResult, path: str | Path) -> None:
    Path(path).write_text(format_report(result), encoding="utf-8")
