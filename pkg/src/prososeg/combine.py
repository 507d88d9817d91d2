"""Combining prosodic tree posteriors with the lexical models.

Two schemes are offered.  Interpolation mixes the per-boundary posteriors
of both models.  The integrated scheme turns tree posteriors into relative
likelihoods and multiplies them, raised to a model combination weight, into
the lexical HMM transitions before decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus_io import FormatError
from .ngram import NgramModel, forward_backward, viterbi_decode

LIKELIHOOD_FLOOR = 1e-6
LAMBDA_GRID = tuple(round(0.05 * i, 2) for i in range(21))
MCW_GRID = tuple(0.25 * i for i in range(17))


class CombineError(ValueError):
    pass


@dataclass
class CombinerConfig:
    lam: float = 0.5
    mcw: float = 1.0
    threshold: float = 0.5
    mode: str = "integrated"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise CombineError("lambda must lie in [0, 1]")
        if self.mcw < 0:
            raise CombineError("model combination weight must be >= 0")
        if self.mode not in ("integrated", "interpolate"):
            raise CombineError(f"unknown combination mode {self.mode!r}")


def check_mode(task: str, mode: str) -> None:
    """Topic segmentation only supports the integrated HMM."""
    if task == "topic" and mode == "interpolate":
        raise CombineError("interpolation is not available for topic segmentation; "
                           "use the integrated mode")


def interpolate(p_lm, p_dt, lam: float) -> np.ndarray:
    """lam * P_LM + (1 - lam) * P_DT, per boundary (and per class if 2-D)."""
    a, b = np.asarray(p_lm, dtype=float), np.asarray(p_dt, dtype=float)
    if a.shape != b.shape:
        raise CombineError(f"posterior streams differ in shape: {a.shape} vs {b.shape}")
    if not 0.0 <= lam <= 1.0:
        raise CombineError("lambda must lie in [0, 1]")
    return lam * a + (1.0 - lam) * b


def _two_class(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.stack([1.0 - p, p], axis=-1) if p.ndim == 1 else p


def posterior_to_likelihood(posterior, priors) -> np.ndarray:
    """Relative likelihoods P(F|T) up to a constant: floored posterior over prior."""
    pri = np.asarray(priors, dtype=float)
    if np.any(pri <= 0):
        raise CombineError("class priors must be positive")
    return np.maximum(_two_class(posterior), LIKELIHOOD_FLOOR) / pri


def reprior(p_boundary, train_prior: float, target_prior: float) -> np.ndarray:
    """Move boundary posteriors from the training prior to another prior."""
    lik = posterior_to_likelihood(p_boundary, (1 - train_prior, train_prior))
    num = lik[:, 1] * target_prior
    return num / (num + lik[:, 0] * (1 - target_prior))


def prosody_scores(p_dt, priors, mcw: float) -> np.ndarray:
    """(n, 2) log scores mcw * log P(F|T) for (none, boundary)."""
    return mcw * np.log(posterior_to_likelihood(p_dt, priors))


def integrated_posteriors(model: NgramModel, words: Sequence[str], p_dt, priors,
                          mcw: float) -> np.ndarray:
    p = np.asarray(p_dt, dtype=float)
    if len(p) != max(len(words) - 1, 0):
        raise CombineError("need one tree posterior per inter-word boundary")
    return forward_backward(model, words, prosody_scores(p, priors, mcw))[0]


def integrated_viterbi(model: NgramModel, words: Sequence[str], p_dt, priors,
                       mcw: float) -> list[int]:
    p = np.asarray(p_dt, dtype=float)
    if len(p) != max(len(words) - 1, 0):
        raise CombineError("need one tree posterior per inter-word boundary")
    return viterbi_decode(model, words, prosody_scores(p, priors, mcw))[0]


# -- tuning --------------------------------------------------------------------------

def decision_error(p, ref, threshold: float = 0.5) -> float:
    p, ref = np.asarray(p, dtype=float), np.asarray(ref, dtype=int)
    if len(ref) == 0:
        raise CombineError("empty held-out set")
    return float(np.mean((p > threshold).astype(int) != ref))


def cross_entropy(p, ref) -> float:
    p, ref = np.asarray(p, dtype=float), np.asarray(ref, dtype=int)
    if len(ref) == 0:
        raise CombineError("empty held-out set")
    q = np.clip(np.where(ref == 1, p, 1 - p), LIKELIHOOD_FLOOR, 1.0)
    return float(-np.mean(np.log2(q)))


def _objective(metric: str, threshold: float) -> Callable:
    """Metric value with cross-entropy as a secondary key."""
    if metric == "error":
        return lambda p, r: (round(decision_error(p, r, threshold), 12),
                             round(cross_entropy(p, r), 12))
    if metric == "entropy":
        return lambda p, r: (round(cross_entropy(p, r), 12), 0.0)
    raise CombineError(f"unknown tuning metric {metric!r}")


def tune_lambda(p_lm, p_dt, ref, metric: str = "error", grid=LAMBDA_GRID,
                threshold: float = 0.5) -> tuple[float, tuple]:
    """Interpolation weight minimizing the metric; ties go to the smaller weight."""
    obj = _objective(metric, threshold)
    best = None
    for lam in grid:
        score = obj(interpolate(p_lm, p_dt, lam), ref)
        if best is None or score < best[1]:
            best = (lam, score)
    return best


def tune_mcw(posterior_fn: Callable[[float], np.ndarray], ref, metric: str = "error",
             grid=MCW_GRID, threshold: float = 0.5) -> tuple[float, tuple]:
    """Combination weight minimizing the metric; ``posterior_fn(mcw)`` decodes."""
    obj = _objective(metric, threshold)
    best = None
    for w in grid:
        score = obj(posterior_fn(w), ref)
        if best is None or score < best[1]:
            best = (w, score)
    return best


# -- posterior streams -----------------------------------------------------------------

def write_posteriors(streams: "dict[str, Sequence[float]]", path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ch, ps in streams.items():
            for i, p in enumerate(ps):
                fh.write(f"{ch} {i} {float(p)!r}\n")


def read_posteriors(path: str | Path) -> "dict[str, np.ndarray]":
    data: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != 3:
                raise FormatError(f"expected 3 fields, got {len(toks)}", path, lineno)
            ch, idx = toks[0], int(toks[1])
            p = float(toks[2])
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise FormatError(f"posterior {p} outside [0, 1]", path, lineno)
            lst = data.setdefault(ch, [])
            if idx != len(lst):
                raise FormatError(f"expected boundary index {len(lst)}, got {idx}", path, lineno)
            lst.append(p)
    return {ch: np.array(v) for ch, v in data.items()}
