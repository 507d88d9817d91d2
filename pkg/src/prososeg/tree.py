"""Probabilistic CART trees over boundary feature vectors.

Splits maximize entropy gain.  A sample whose split feature is missing is
sent down both branches, weighted by the fraction of training weight that
went left at that node, and the same rule is used at prediction time so the
output is the exact marginal over reachable leaves.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus_io import FormatError

EPS = 1e-12
PROB_FLOOR = 1e-10


class TreeError(ValueError):
    pass


# -- data ---------------------------------------------------------------------

@dataclass
class Dataset:
    """Column-major feature matrix with class labels.

    Numeric columns are float arrays with NaN for missing values.  Categorical
    columns are object arrays holding strings or ``None``.
    """

    names: list[str]
    columns: dict[str, np.ndarray]
    categorical: frozenset
    y: np.ndarray
    classes: tuple[str, ...]
    groups: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping[str, object]], y: Sequence[int],
                  classes: Sequence[str] = ("none", "boundary"),
                  names: Sequence[str] | None = None, categorical: frozenset | None = None,
                  groups: Sequence[str] | None = None) -> "Dataset":
        if names is None:
            names = sorted({k for r in rows for k in r if not k.startswith("_")})
        cols, cats = {}, set(categorical or ())
        for n in names:
            vals = [r.get(n) for r in rows]
            if n in cats or any(isinstance(v, str) for v in vals):
                cats.add(n)
                cols[n] = np.array(vals, dtype=object)
            else:
                cols[n] = np.array([np.nan if v is None else float(v) for v in vals], dtype=float)
        g = None if groups is None else np.asarray(groups, dtype=object)
        return cls(list(names), cols, frozenset(c for c in cats if c in cols),
                   np.asarray(y, dtype=int), tuple(classes), g)

    def subset(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(list(self.names), {n: c[idx] for n, c in self.columns.items()},
                       self.categorical, self.y[idx], self.classes,
                       None if self.groups is None else self.groups[idx])

    def select(self, names: Sequence[str]) -> "Dataset":
        names = [n for n in self.names if n in set(names)]
        return Dataset(names, {n: self.columns[n] for n in names},
                       frozenset(c for c in self.categorical if c in names),
                       self.y, self.classes, self.groups)

    def missing(self, name: str) -> np.ndarray:
        col = self.columns[name]
        if name in self.categorical:
            return np.array([v is None for v in col], dtype=bool)
        return np.isnan(col)

    def row(self, i: int) -> dict:
        out = {}
        for n in self.names:
            v = self.columns[n][i]
            if n in self.categorical:
                out[n] = v
            else:
                out[n] = None if math.isnan(v) else float(v)
        return out


# -- nodes --------------------------------------------------------------------

@dataclass
class TreeNode:
    """Internal node (``feature`` set) or leaf (``posterior`` used)."""

    posterior: np.ndarray
    count: float
    counts: np.ndarray | None = None
    feature: str | None = None
    threshold: float | None = None
    categories: frozenset | None = None
    missing_left: float = 0.5
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def n_leaves(self) -> int:
        return 1 if self.is_leaf else self.left.n_leaves() + self.right.n_leaves()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())

    def goes_left(self, value) -> bool | None:
        """Routing for one value; None when the value is missing."""
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return None
        if self.categories is not None:
            return str(value) in self.categories
        if isinstance(value, str):
            return None
        return float(value) <= self.threshold


@dataclass
class Tree:
    """A trained tree.

    ``train_prior`` is the class distribution the tree was fit on (uniform
    after downsampling); ``data_prior`` is the distribution before any
    downsampling.  Both are optional metadata used to rescale posteriors.
    """

    root: TreeNode
    classes: tuple[str, ...]
    train_prior: np.ndarray | None = None
    data_prior: np.ndarray | None = None

    def n_leaves(self) -> int:
        return self.root.n_leaves()


@dataclass
class TreeTrainParams:
    min_leaf_count: float = 50
    max_depth: int = 20
    cv_folds: int = 4
    smoothing: float = 0.5
    lookahead: bool = True
    lookahead_thresholds: int = 32

    def __post_init__(self):
        if self.min_leaf_count < 1:
            raise TreeError("min_leaf_count must be >= 1")
        if self.cv_folds < 2:
            raise TreeError("cv_folds must be >= 2")


def _smooth(counts: np.ndarray, alpha: float) -> np.ndarray:
    p = counts + alpha
    return p / p.sum()


def _entropy_rows(c: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of non-negative weights."""
    tot = c.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tot > 0, c / np.where(tot > 0, tot, 1), 0.0)
        h = -np.where(p > 0, p * np.log2(np.where(p > 0, p, 1)), 0.0)
    return h.sum(axis=-1)


def entropy(counts: np.ndarray) -> float:
    return float(_entropy_rows(np.asarray(counts, dtype=float)[None, :])[0])


# -- split search -------------------------------------------------------------

@dataclass
class _Split:
    gain: float
    feature: str
    threshold: float | None
    categories: frozenset | None
    missing_left: float

    def key(self):
        thr = self.threshold if self.threshold is not None else 0.0
        cats = ",".join(sorted(self.categories)) if self.categories is not None else ""
        return (self.feature, thr, cats)


def _better(a: _Split, b: _Split | None) -> bool:
    if b is None:
        return True
    if a.gain > b.gain + EPS:
        return True
    if a.gain < b.gain - EPS:
        return False
    return a.key() < b.key()


def _onehot(y: np.ndarray, w: np.ndarray, k: int) -> np.ndarray:
    m = np.zeros((len(y), k))
    m[np.arange(len(y)), y] = w
    return m


def _scan(order_vals, C_obs, M, parent_h, W, min_leaf):
    """Gains for prefix splits of the ordered observed rows.

    Returns (positions, gains, left fractions) for every admissible cut
    between consecutive distinct ordered values.
    """
    cum = np.cumsum(C_obs, axis=0)[:-1]
    if len(cum) == 0:
        return np.zeros(0, dtype=int), np.zeros(0), np.zeros(0)
    distinct = order_vals[:-1] != order_vals[1:]
    tot_obs = C_obs.sum(axis=0)
    w_obs = tot_obs.sum()
    f = cum.sum(axis=1) / w_obs
    left = cum + f[:, None] * M[None, :]
    right = (tot_obs - cum) + (1 - f)[:, None] * M[None, :]
    wl, wr = left.sum(axis=1), right.sum(axis=1)
    ok = distinct & (wl >= min_leaf - 1e-9) & (wr >= min_leaf - 1e-9)
    gains = parent_h - (wl * _entropy_rows(left) + wr * _entropy_rows(right)) / W
    pos = np.nonzero(ok)[0]
    return pos, np.maximum(gains[pos], 0.0), f[pos]


def _feature_splits(data: Dataset, name: str, idx: np.ndarray, w: np.ndarray,
                    k: int, parent_h: float, W: float, min_leaf: float,
                    limit: int | None = None) -> list[_Split]:
    col = data.columns[name][idx]
    y = data.y[idx]
    if name in data.categorical:
        obs = np.array([v is not None for v in col], dtype=bool)
    else:
        obs = ~np.isnan(col)
    if not obs.any():
        return []
    M = _onehot(y[~obs], w[~obs], k).sum(axis=0)
    if name in data.categorical:
        vals = col[obs].astype(str)
        C = _onehot(y[obs], w[obs], k)
        cats = sorted(set(vals))
        if len(cats) < 2:
            return []
        per = np.array([C[vals == c].sum(axis=0) for c in cats])
        tot = per.sum(axis=1)
        ref = 1 if k > 1 else 0
        score = (per[:, ref] + 1e-12) / (tot + 2e-12)
        order = sorted(range(len(cats)), key=lambda i: (score[i], cats[i]))
        C_obs = per[order]
        ranks = np.arange(len(cats))
        pos, gains, fr = _scan(ranks, C_obs, M, parent_h, W, min_leaf)
        sel = _limit(pos, gains, limit)
        return [_Split(float(gains[j]), name, None,
                       frozenset(cats[order[i]] for i in range(pos[j] + 1)), float(fr[j]))
                for j in sel]
    x = col[obs].astype(float)
    o = np.argsort(x, kind="stable")
    xs = x[o]
    C_obs = _onehot(y[obs][o], w[obs][o], k)
    pos, gains, fr = _scan(xs, C_obs, M, parent_h, W, min_leaf)
    sel = _limit(pos, gains, limit)
    return [_Split(float(gains[j]), name, float((xs[pos[j]] + xs[pos[j] + 1]) / 2), None,
                   float(fr[j])) for j in sel]


def _limit(pos: np.ndarray, gains: np.ndarray, limit: int | None) -> np.ndarray:
    """Candidates to materialize: the best cut only, or up to ``limit`` spread cuts."""
    if len(pos) == 0:
        return np.zeros(0, dtype=int)
    if limit is None:
        # first cut within EPS of the maximum gain, i.e. the smallest tied threshold
        return np.nonzero(gains >= gains.max() - EPS)[0][:1]
    if len(pos) <= limit:
        return np.arange(len(pos))
    return np.unique(np.linspace(0, len(pos) - 1, limit).round().astype(int))


def _best_split(data, idx, w, k, params, limit=None) -> _Split | None:
    counts = _onehot(data.y[idx], w, k).sum(axis=0)
    W = counts.sum()
    ph = entropy(counts)
    best = None
    for name in data.names:
        for s in _feature_splits(data, name, idx, w, k, ph, W, params.min_leaf_count, limit):
            if _better(s, best):
                best = s
    return best


def _route(data: Dataset, s: _Split, idx: np.ndarray, w: np.ndarray):
    col = data.columns[s.feature][idx]
    if s.categories is not None:
        miss = np.array([v is None for v in col], dtype=bool)
        left = np.array([v is not None and str(v) in s.categories for v in col], dtype=bool)
    else:
        miss = np.isnan(col)
        left = ~miss & (np.nan_to_num(col, nan=0.0) <= s.threshold)
    right = ~miss & ~left
    li = np.concatenate([idx[left], idx[miss]])
    lw = np.concatenate([w[left], w[miss] * s.missing_left])
    ri = np.concatenate([idx[right], idx[miss]])
    rw = np.concatenate([w[right], w[miss] * (1 - s.missing_left)])
    keep_l, keep_r = lw > 0, rw > 0
    return li[keep_l], lw[keep_l], ri[keep_r], rw[keep_r]


def _lookahead(data, idx, w, k, params) -> _Split | None:
    """When no single split helps, pick the split whose children split best."""
    counts = _onehot(data.y[idx], w, k).sum(axis=0)
    W = counts.sum()
    ph = entropy(counts)
    best, best_total = None, EPS
    for name in data.names:
        for s in _feature_splits(data, name, idx, w, k, ph, W, params.min_leaf_count,
                                 params.lookahead_thresholds):
            li, lw, ri, rw = _route(data, s, idx, w)
            total = s.gain
            for ci, cw in ((li, lw), (ri, rw)):
                cs = _best_split(data, ci, cw, k, params, params.lookahead_thresholds)
                if cs is not None:
                    total += cs.gain * cw.sum() / W
            if total > best_total + EPS or (best is not None and abs(total - best_total) <= EPS
                                            and s.key() < best.key()):
                best, best_total = s, total
    return best


def _grow(data: Dataset, idx, w, depth, k, params) -> TreeNode:
    counts = _onehot(data.y[idx], w, k).sum(axis=0)
    W = float(counts.sum())
    node = TreeNode(_smooth(counts, params.smoothing), W, counts)
    if (depth >= params.max_depth or W < 2 * params.min_leaf_count
            or np.count_nonzero(counts > 1e-12) < 2):
        return node
    s = _best_split(data, idx, w, k, params)
    if s is None or s.gain <= EPS:
        s = _lookahead(data, idx, w, k, params) if (
            params.lookahead and depth + 2 <= params.max_depth) else None
        if s is None:
            return node
    li, lw, ri, rw = _route(data, s, idx, w)
    node.feature, node.threshold, node.categories = s.feature, s.threshold, s.categories
    node.missing_left = s.missing_left
    node.left = _grow(data, li, lw, depth + 1, k, params)
    node.right = _grow(data, ri, rw, depth + 1, k, params)
    return node


def train_tree(data: Dataset, params: TreeTrainParams | None = None,
               weights: np.ndarray | None = None) -> Tree:
    """Greedy recursive partitioning by entropy gain."""
    params = params or TreeTrainParams()
    if len(data) == 0:
        raise TreeError("cannot train a tree on an empty dataset")
    k = len(data.classes)
    idx = np.arange(len(data))
    w = np.ones(len(data)) if weights is None else np.asarray(weights, dtype=float)
    counts = np.bincount(data.y, weights=w, minlength=k).astype(float)
    return Tree(_grow(data, idx, w, 0, k, params), tuple(data.classes), counts / counts.sum())


# -- prediction ---------------------------------------------------------------

def predict(tree: Tree, features: Mapping[str, object]) -> np.ndarray:
    """Class posterior for one feature vector, marginalizing missing values."""
    def rec(node: TreeNode) -> np.ndarray:
        if node.is_leaf:
            return node.posterior
        go = node.goes_left(features.get(node.feature))
        if go is None:
            return node.missing_left * rec(node.left) + (1 - node.missing_left) * rec(node.right)
        return rec(node.left) if go else rec(node.right)
    return np.array(rec(tree.root), dtype=float)


def _node_masks(node: TreeNode, data: Dataset):
    col = data.columns.get(node.feature)
    n = len(data)
    if col is None:
        return np.zeros(n, dtype=bool), np.ones(n, dtype=bool)
    if node.categories is not None:
        miss = np.array([v is None for v in col], dtype=bool)
        left = np.array([v is not None and str(v) in node.categories for v in col], dtype=bool)
    elif col.dtype == object:
        miss = np.array([v is None or isinstance(v, str) for v in col], dtype=bool)
        left = np.array([not m and float(v) <= node.threshold for v, m in zip(col, miss)],
                        dtype=bool)
    else:
        miss = np.isnan(col)
        left = ~miss & (np.nan_to_num(col, nan=0.0) <= node.threshold)
    return left, miss


def _walk(node: TreeNode, data: Dataset, w: np.ndarray, out: np.ndarray | None,
          usage: dict | None) -> None:
    if not w.any():
        return
    if node.is_leaf:
        if out is not None:
            out += w[:, None] * node.posterior[None, :]
        return
    if usage is not None:
        usage[node.feature] = usage.get(node.feature, 0.0) + float(w.sum())
    left, miss = _node_masks(node, data)
    right = ~left & ~miss
    wl = w * (left + miss * node.missing_left)
    wr = w * (right + miss * (1 - node.missing_left))
    _walk(node.left, data, wl, out, usage)
    _walk(node.right, data, wr, out, usage)


def predict_proba(tree: Tree, data: Dataset) -> np.ndarray:
    """Posterior matrix (samples x classes)."""
    out = np.zeros((len(data), len(tree.classes)))
    _walk(tree.root, data, np.ones(len(data)), out, None)
    return out


def entropy_reduction(tree: Tree, data: Dataset) -> float:
    """Prior entropy of the test labels minus the tree's cross-entropy, in bits."""
    if len(data) == 0:
        raise TreeError("entropy reduction needs a nonempty test set")
    k = len(tree.classes)
    prior = np.bincount(data.y, minlength=k).astype(float)
    p = predict_proba(tree, data)[np.arange(len(data)), data.y]
    return entropy(prior) - float(np.mean(-np.log2(np.maximum(p, PROB_FLOOR))))


def feature_usage(tree: Tree, data: Dataset) -> dict[str, float]:
    """Share of (fractional) feature queries made while classifying ``data``."""
    usage: dict[str, float] = {}
    if len(data) == 0:
        return usage
    _walk(tree.root, data, np.ones(len(data)), None, usage)
    total = sum(usage.values())
    return {f: usage[f] / total for f in sorted(usage)} if total > 0 else {}


# -- pruning ------------------------------------------------------------------

def _leaf_risk(node: TreeNode) -> float:
    """Training log-loss (bits) if ``node`` were a leaf."""
    if node.counts is None:
        return 0.0
    return float(-(node.counts * np.log2(np.maximum(node.posterior, PROB_FLOOR))).sum())


def _subtree_stats(node: TreeNode):
    if node.is_leaf:
        return _leaf_risk(node), 1
    rl, nl = _subtree_stats(node.left)
    rr, nr = _subtree_stats(node.right)
    return rl + rr, nl + nr


def _collapse(node: TreeNode) -> None:
    node.feature = node.threshold = node.categories = None
    node.left = node.right = None


def pruning_sequence(tree: Tree) -> list[tuple[float, Tree]]:
    """Cost-complexity pruning: (alpha, subtree) pairs from full tree to root."""
    cur = copy.deepcopy(tree)
    seq = [(0.0, copy.deepcopy(cur))]
    while not cur.root.is_leaf:
        links = []

        def visit(node, path):
            if node.is_leaf:
                return
            r, n = _subtree_stats(node)
            links.append(((_leaf_risk(node) - r) / (n - 1), path, node))
            visit(node.left, path + "L")
            visit(node.right, path + "R")

        visit(cur.root, "")
        g = min(l[0] for l in links)
        for gl, _, node in links:
            if gl <= g + 1e-9 and not node.is_leaf:
                _collapse(node)
        seq.append((max(g, 0.0), copy.deepcopy(cur)))
    return seq


def prune_cv(tree: Tree, heldout: Dataset) -> Tree:
    """Subtree in the pruning sequence with the best held-out entropy reduction."""
    if len(heldout) == 0:
        raise TreeError("held-out set is empty")
    best, best_score = None, -math.inf
    for _, sub in pruning_sequence(tree):
        score = entropy_reduction(sub, heldout)
        if best is None or score > best_score + EPS or (
                abs(score - best_score) <= EPS and sub.n_leaves() < best.n_leaves()):
            best, best_score = sub, score
    return best


def prune_to_alpha(tree: Tree, alpha: float) -> Tree:
    chosen = tree
    for a, sub in pruning_sequence(tree):
        if a <= alpha + 1e-12:
            chosen = sub
    return chosen


def assign_folds(groups: Sequence[str], n_folds: int, seed: int) -> np.ndarray:
    """Fold id per sample; all samples of one group share a fold."""
    uniq = sorted(set(groups))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(uniq))
    if len(uniq) >= n_folds:
        fold_of = {uniq[p]: i % n_folds for i, p in enumerate(perm)}
        return np.array([fold_of[g] for g in groups], dtype=int)
    # too few groups: fall back to contiguous blocks of samples
    n = len(groups)
    return (np.arange(n) * n_folds) // max(n, 1)


def train_pruned(data: Dataset, params: TreeTrainParams | None = None,
                 folds: np.ndarray | None = None, seed: int = 0) -> Tree:
    """Grow on all data and prune at the alpha chosen by cross-validation."""
    params = params or TreeTrainParams()
    full = train_tree(data, params)
    if full.root.is_leaf:
        return full
    if folds is None:
        groups = data.groups if data.groups is not None else np.arange(len(data)).astype(str)
        folds = assign_folds(list(groups), params.cv_folds, seed)
    seq = pruning_sequence(full)
    alphas = [a for a, _ in seq]
    # geometric midpoints represent each interval of the sequence
    probes = [math.sqrt(max(alphas[i], 1e-12) * max(alphas[i + 1], 1e-12))
              if i + 1 < len(alphas) else alphas[i] + 1.0 for i in range(len(alphas))]
    probes[0] = 0.0 if len(alphas) < 2 else probes[0]
    scores = np.zeros(len(probes))
    used = 0
    for f in sorted(set(folds.tolist())):
        tr, te = np.nonzero(folds != f)[0], np.nonzero(folds == f)[0]
        if len(te) == 0 or len(np.unique(data.y[tr])) < 2:
            continue
        sub = train_tree(data.subset(tr), params)
        sseq = pruning_sequence(sub)
        test = data.subset(te)
        for j, a in enumerate(probes):
            chosen = sseq[0][1]
            for sa, st in sseq:
                if sa <= a + 1e-12:
                    chosen = st
            scores[j] += entropy_reduction(chosen, test)
        used += 1
    if used == 0:
        return full
    best = max(range(len(probes)), key=lambda j: (round(scores[j] / used, 12), j))
    return seq[best][1]


# -- sampling -----------------------------------------------------------------

def downsample(y: Sequence[int], seed: int) -> np.ndarray:
    """Sorted indices with every class cut down to the minority count."""
    y = np.asarray(y, dtype=int)
    present = np.unique(y)
    if len(present) < 2:
        raise TreeError("downsampling needs at least two classes")
    m = min(int(np.count_nonzero(y == c)) for c in present)
    rng = np.random.default_rng(seed)
    keep = []
    for c in present:
        idx = np.nonzero(y == c)[0]
        keep.append(idx if len(idx) == m else np.sort(rng.choice(idx, m, replace=False)))
    return np.sort(np.concatenate(keep))


# -- serialization ------------------------------------------------------------

def format_tree(tree: Tree) -> str:
    lines = ["classes " + " ".join(tree.classes)]
    for name in ("train_prior", "data_prior"):
        v = getattr(tree, name)
        if v is not None:
            lines.append(f"# {name} " + " ".join(repr(float(x)) for x in v))

    def rec(node: TreeNode, depth: int):
        pad = "  " * depth
        if node.is_leaf:
            probs = " ".join(repr(float(p)) for p in node.posterior)
            lines.append(f"{pad}leaf {float(node.count)!r} {probs}")
            return
        if node.categories is not None:
            cond = f"in {{{','.join(sorted(node.categories))}}}"
        else:
            cond = f"<= {float(node.threshold)!r}"
        lines.append(f"{pad}split {node.feature} {cond} missing_left {float(node.missing_left)!r}")
        rec(node.left, depth + 1)
        rec(node.right, depth + 1)

    rec(tree.root, 0)
    return "\n".join(lines) + "\n"


def write_tree(tree: Tree, path: str | Path) -> None:
    Path(path).write_text(format_tree(tree), encoding="utf-8")


def parse_tree(text: str, path: str | Path = "<string>") -> Tree:
    lines = [(i + 1, l) for i, l in enumerate(text.splitlines()) if l.strip()]
    if not lines or not lines[0][1].startswith("classes "):
        raise FormatError("tree must start with a 'classes' line", path, 1)
    classes = tuple(lines[0][1].split()[1:])
    meta = {}
    while len(lines) > 1 and lines[1][1].lstrip().startswith("#"):
        toks = lines.pop(1)[1].split()
        if len(toks) >= 2:
            meta[toks[1]] = np.array([float(t) for t in toks[2:]])
    pos = 1

    def rec() -> TreeNode:
        nonlocal pos
        if pos >= len(lines):
            raise FormatError("unexpected end of tree", path, len(text.splitlines()))
        lineno, line = lines[pos]
        pos += 1
        toks = line.split()
        try:
            if toks[0] == "leaf":
                post = np.array([float(t) for t in toks[2:]])
                if len(post) != len(classes):
                    raise FormatError("leaf posterior length mismatch", path, lineno)
                return TreeNode(post, float(toks[1]))
            if toks[0] != "split" or toks[-2] != "missing_left":
                raise FormatError(f"bad node line: {line.strip()}", path, lineno)
            node = TreeNode(np.zeros(len(classes)), 0.0, feature=toks[1],
                            missing_left=float(toks[-1]))
            if toks[2] == "<=":
                node.threshold = float(toks[3])
            elif toks[2] == "in":
                body = " ".join(toks[3:-2]).strip()
                if not (body.startswith("{") and body.endswith("}")):
                    raise FormatError("category set must be braced", path, lineno)
                node.categories = frozenset(c for c in body[1:-1].split(",") if c)
            else:
                raise FormatError(f"bad split operator {toks[2]!r}", path, lineno)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"malformed node line: {line.strip()}", path, lineno) from None
        node.left = rec()
        node.right = rec()
        node.count = node.left.count + node.right.count
        node.posterior = (node.left.posterior * node.left.count
                          + node.right.posterior * node.right.count) / max(node.count, 1e-300)
        return node

    root = rec()
    if pos != len(lines):
        raise FormatError("trailing lines after tree", path, lines[pos][0])
    return Tree(root, classes, meta.get("train_prior"), meta.get("data_prior"))


def read_tree(path: str | Path) -> Tree:
    return parse_tree(Path(path).read_text(encoding="utf-8"), path)
