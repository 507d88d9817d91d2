"""F0 postprocessing: octave-error modelling, median filtering and stylization.

Per speaker, log-F0 is modelled by a lognormal tied mixture (LTM): three
Gaussian modes in the log domain at ``mu - log 2``, ``mu`` and ``mu + log 2``
with one shared standard deviation, capturing halving, modal voicing and
doubling.  Frames whose highest posterior is not the modal mode are excluded
from the piecewise-linear stylization and from F0 statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import logsumexp

from .corpus_io import F0Track, FormatError, Utterance, channel_words, fmt_float

LOG2 = math.log(2.0)
_OFFSETS = np.array([-LOG2, 0.0, LOG2])

HALVED, MODAL, DOUBLED = 0, 1, 2
UNVOICED = -1
CLASS_NAMES = {HALVED: "halved", MODAL: "modal", DOUBLED: "doubled", UNVOICED: "unvoiced"}


class PitchModelError(ValueError):
    pass


@dataclass(frozen=True)
class LtmParams:
    mu: float
    sigma: float
    weights: tuple[float, float, float]
    loglik_trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def means(self) -> np.ndarray:
        return self.mu + _OFFSETS


@dataclass(frozen=True)
class RangeParams:
    baseline: float
    topline: float
    mean_modal: float
    mean_abs_slope: float


@dataclass(frozen=True)
class SpeakerPitch:
    speaker: str
    ltm: LtmParams
    range: RangeParams


@dataclass(frozen=True)
class LinearSegment:
    """Least-squares line ``log f0 = a * t + b`` over a run of modal frames."""

    t_start: float
    t_end: float
    a: float
    b: float
    mse: float = 0.0
    n_frames: int = 0
    clamped: bool = False
    region: int = 0


@dataclass
class StylizedContour:
    channel: str
    segments: list[LinearSegment]

    def frame_values(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Stylized log-F0 and slope at each frame time (NaN outside segments)."""
        logf0 = np.full(len(times), np.nan)
        slope = np.full(len(times), np.nan)
        half = 1e-6
        for seg in self.segments:
            lo = np.searchsorted(times, seg.t_start - half, side="left")
            hi = np.searchsorted(times, seg.t_end + half, side="right")
            logf0[lo:hi] = seg.a * times[lo:hi] + seg.b
            slope[lo:hi] = seg.a
        return logf0, slope


# -- lognormal tied mixture ----------------------------------------------------

def _component_logp(x: np.ndarray, mu: float, sigma: float, weights: np.ndarray) -> np.ndarray:
    z = (x[:, None] - (mu + _OFFSETS)[None, :]) / sigma
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logw[None, :] - 0.5 * z * z - math.log(sigma) - 0.5 * math.log(2 * math.pi)


def fit_ltm(voiced_f0: Sequence[float] | np.ndarray, min_frames: int = 50,
            tol: float = 1e-6, max_iter: int = 200) -> LtmParams:
    """Fit the three-mode lognormal tied mixture to voiced F0 values (Hz) by EM.

    The log-likelihood of every iteration is kept in ``loglik_trace``.
    """
    f = np.asarray(voiced_f0, dtype=float)
    f = f[f > 0]
    if len(f) < min_frames:
        raise PitchModelError(f"too few voiced frames for LTM fit: {len(f)} < {min_frames}")
    x = np.log(f)
    if np.ptp(x) < 1e-12:
        raise PitchModelError("degenerate F0 data: all values identical")

    mu = float(np.median(x))
    sigma = 1.4826 * float(np.median(np.abs(x - mu)))
    if sigma < 1e-3:
        sigma = max(float(np.std(x)), 1e-3)
    weights = np.array([0.05, 0.9, 0.05])
    n = len(x)
    trace: list[float] = []
    for _ in range(max_iter):
        logp = _component_logp(x, mu, sigma, weights)
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        converged = bool(trace) and abs(ll - trace[-1]) < tol
        trace.append(ll)
        if converged:
            break
        resp = np.exp(logp - norm[:, None])
        weights = resp.sum(axis=0) / n
        mu = float((resp * (x[:, None] - _OFFSETS[None, :])).sum() / n)
        dev = x[:, None] - (mu + _OFFSETS)[None, :]
        sigma = max(math.sqrt(float((resp * dev * dev).sum() / n)), 1e-4)
    weights = weights / weights.sum()
    return LtmParams(mu, sigma, (float(weights[0]), float(weights[1]), float(weights[2])),
                     tuple(trace))


def frame_posteriors(f0_values: np.ndarray, ltm: LtmParams) -> np.ndarray:
    """Posterior of (halved, modal, doubled) for each positive F0 value."""
    x = np.log(np.asarray(f0_values, dtype=float))
    logp = _component_logp(x, ltm.mu, ltm.sigma, np.asarray(ltm.weights))
    return np.exp(logp - logsumexp(logp, axis=1)[:, None])


def classify_frames(track: F0Track, ltm: LtmParams, mask: np.ndarray | None = None) -> np.ndarray:
    """Label each voiced frame with its maximum-posterior mode.

    Unvoiced frames (and frames outside ``mask``) get ``UNVOICED``.  A modal
    posterior tied with the maximum wins.
    """
    labels = np.full(len(track), UNVOICED, dtype=np.int8)
    sel = track.voiced if mask is None else (track.voiced & mask)
    if not sel.any():
        return labels
    post = frame_posteriors(track.f0[sel], ltm)
    best = post.max(axis=1)
    cls = np.where(post[:, MODAL] >= best - 1e-12, MODAL,
                   np.where(post[:, HALVED] >= post[:, DOUBLED], HALVED, DOUBLED))
    labels[sel] = cls
    return labels


# -- median filter -------------------------------------------------------------

def voiced_runs(voiced: np.ndarray, groups: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Maximal ``[start, end)`` runs of voiced frames, split where ``groups`` changes."""
    v = np.asarray(voiced, dtype=bool)
    brk = np.zeros(len(v) + 1, dtype=bool)
    brk[0] = brk[-1] = True
    if len(v) > 1:
        brk[1:-1] = v[1:] != v[:-1]
        if groups is not None:
            g = np.asarray(groups)
            brk[1:-1] |= g[1:] != g[:-1]
    edges = np.flatnonzero(brk)
    return [(int(s), int(e)) for s, e in zip(edges[:-1], edges[1:]) if v[s]]


def median_filter(track: F0Track, window: int = 7, groups: np.ndarray | None = None) -> F0Track:
    """Median-filter voiced frames within each voiced run.

    The centered window (default 7 frames, i.e. +/-3) shrinks symmetrically
    near run edges but keeps a half-width of at least one frame, truncated at
    the run boundary; unvoiced gaps are never bridged.
    """
    half_max = window // 2
    src = track.f0
    out = src.copy()
    for s, e in voiced_runs(track.voiced, groups):
        vals = src[s:e]
        n = e - s
        res = vals.copy()
        if n >= window:
            res[half_max:n - half_max] = np.median(sliding_window_view(vals, window), axis=1)
            edge_pos = list(range(half_max)) + list(range(n - half_max, n))
        else:
            edge_pos = range(n)
        for p in edge_pos:
            h = max(1, min(half_max, p, n - 1 - p))
            res[p] = np.median(vals[max(0, p - h):min(n, p + h + 1)])
        out[s:e] = res
    return track.with_f0(out)


# -- piecewise linear stylization ----------------------------------------------

def _fit_line(t: np.ndarray, y: np.ndarray) -> tuple[float, float, np.ndarray]:
    if len(t) == 1:
        return 0.0, float(y[0]), np.zeros(1)
    tm = t.mean()
    ym = y.mean()
    dt = t - tm
    denom = float(dt @ dt)
    a = float(dt @ (y - ym)) / denom if denom > 0 else 0.0
    b = float(ym - a * tm)
    return a, b, y - (a * t + b)


def stylize_run(t: np.ndarray, y: np.ndarray, max_mse: float = 0.01, min_region_len: int = 5,
                region: int = 0) -> list[LinearSegment]:
    """Greedy top-down piecewise-linear fit of one run of log-F0 values.

    Starting from a single line, the segment with the largest MSE above
    ``max_mse`` is split after its point of maximum absolute deviation, as long
    as both halves keep ``min_region_len`` frames.
    """
    n = len(t)
    if n == 0:
        return []
    bounds = [(0, n)]
    fits = {(0, n): _fit_line(t, y)}
    while True:
        best = None
        for lo, hi in bounds:
            a, b, res = fits[(lo, hi)]
            mse = float(np.mean(res * res))
            if mse > max_mse and hi - lo >= 2 * min_region_len:
                if best is None or mse > best[0]:
                    best = (mse, lo, hi)
        if best is None:
            break
        _, lo, hi = best
        res = fits[(lo, hi)][2]
        first = min_region_len - 1
        last = (hi - lo) - min_region_len - 1
        k = lo + first + int(np.argmax(np.abs(res[first:last + 1])))
        i = bounds.index((lo, hi))
        bounds[i:i + 1] = [(lo, k + 1), (k + 1, hi)]
        for seg in ((lo, k + 1), (k + 1, hi)):
            fits[seg] = _fit_line(t[seg[0]:seg[1]], y[seg[0]:seg[1]])
    out = []
    for lo, hi in bounds:
        a, b, res = fits[(lo, hi)]
        mse = float(np.mean(res * res))
        clamped = mse > max_mse or (hi - lo) < min_region_len
        out.append(LinearSegment(float(t[lo]), float(t[hi - 1]), a, b, mse, hi - lo, clamped, region))
    return out


def stylize(track: F0Track, labels: np.ndarray, max_mse: float = 0.01, min_region_len: int = 5,
            groups: np.ndarray | None = None) -> StylizedContour:
    """Stylize a (median-filtered) track, fitting only modal-labelled frames.

    Each voiced run is fitted independently in the log-Hz domain.
    """
    labels = np.asarray(labels)
    segments: list[LinearSegment] = []
    voiced = labels != UNVOICED
    for region, (s, e) in enumerate(voiced_runs(voiced, groups)):
        idx = s + np.flatnonzero(labels[s:e] == MODAL)
        if len(idx) == 0:
            continue
        segments.extend(stylize_run(track.times[idx], np.log(track.f0[idx]),
                                    max_mse, min_region_len, region))
    return StylizedContour(track.channel, segments)


def speaker_range(ltm: LtmParams, modal_frames: Sequence[float] | np.ndarray,
                  segments: Iterable[LinearSegment] = ()) -> RangeParams:
    """Speaker F0 range: baseline halfway (in log) between halved and modal modes."""
    vals = np.asarray(modal_frames, dtype=float)
    vals = vals[vals > 0]
    if len(vals) == 0:
        raise PitchModelError("no modal frames for speaker range")
    slopes = [abs(s.a) for s in segments if s.n_frames != 1]
    return RangeParams(
        baseline=math.exp(ltm.mu - LOG2 / 2),
        topline=float(np.percentile(vals, 95)),
        mean_modal=float(vals.mean()),
        mean_abs_slope=float(np.mean(slopes)) if slopes else 0.0,
    )


# -- per-speaker / per-channel orchestration ---------------------------------------

@dataclass
class ChannelPitch:
    """Everything the feature extractor needs about one channel's F0."""

    channel: str
    times: np.ndarray
    f0: np.ndarray
    classes: np.ndarray
    logf0: np.ndarray
    slope: np.ndarray
    speaker: np.ndarray
    contour: StylizedContour


@dataclass
class PitchConfig:
    min_frames: int = 50
    window: int = 7
    max_mse: float = 0.01
    min_region_len: int = 5


def frame_speakers(track: F0Track, words) -> np.ndarray:
    """Speaker id for every frame inside a word span ('' elsewhere)."""
    spk = np.full(len(track), "", dtype=object)
    for w in words:
        lo = np.searchsorted(track.times, w.start, side="left")
        hi = np.searchsorted(track.times, w.end, side="left")
        spk[lo:hi] = w.speaker
    return spk


def _classify_by_speaker(track: F0Track, spk: np.ndarray, models: "dict[str, SpeakerPitch]"
                         ) -> np.ndarray:
    classes = np.full(len(track), UNVOICED, dtype=np.int8)
    for name in sorted(set(spk[spk != ""])):
        if name not in models:
            continue
        mask = spk == name
        lab = classify_frames(track, models[name].ltm, mask)
        classes[mask] = lab[mask]
    return classes


def fit_pitch_models(utterances: Sequence[Utterance], tracks: "dict[str, F0Track]",
                     config: PitchConfig | None = None
                     ) -> tuple["dict[str, SpeakerPitch]", "dict[str, ChannelPitch]"]:
    """Fit per-speaker LTM and range models (pooled over channels) and stylize every channel.

    Speakers with too few voiced frames get no model; their frames are treated
    as unvoiced downstream.
    """
    cfg = config or PitchConfig()
    streams = channel_words(utterances)
    spk_frames = {ch: frame_speakers(tracks[ch], [w for w, _ in ws])
                  for ch, ws in streams.items() if ch in tracks}

    pooled: dict[str, list[np.ndarray]] = {}
    for ch, spk in spk_frames.items():
        tr = tracks[ch]
        for name in sorted(set(spk[spk != ""])):
            sel = (spk == name) & tr.voiced
            pooled.setdefault(name, []).append(tr.f0[sel])
    ltms: dict[str, LtmParams] = {}
    for name in sorted(pooled):
        try:
            ltms[name] = fit_ltm(np.concatenate(pooled[name]), min_frames=cfg.min_frames)
        except PitchModelError:
            continue

    provisional = {n: SpeakerPitch(n, l, RangeParams(0, 0, 0, 0)) for n, l in ltms.items()}
    channels: dict[str, ChannelPitch] = {}
    seg_by_speaker: dict[str, list[LinearSegment]] = {}
    modal_by_speaker: dict[str, list[np.ndarray]] = {}
    for ch, spk in spk_frames.items():
        tr = tracks[ch]
        classes = _classify_by_speaker(tr, spk, provisional)
        groups = np.where(classes != UNVOICED, spk, "")
        masked = tr.with_f0(np.where(classes != UNVOICED, tr.f0, 0.0))
        filtered = median_filter(masked, cfg.window, groups)
        contour = stylize(filtered, classes, cfg.max_mse, cfg.min_region_len, groups)
        logf0, slope = contour.frame_values(tr.times)
        channels[ch] = ChannelPitch(ch, tr.times, filtered.f0, classes, logf0, slope, spk, contour)
        for seg in contour.segments:
            i = np.searchsorted(tr.times, seg.t_start - 1e-6)
            seg_by_speaker.setdefault(spk[i], []).append(seg)
        for name in ltms:
            sel = (spk == name) & (classes == MODAL)
            modal_by_speaker.setdefault(name, []).append(tr.f0[sel])

    models: dict[str, SpeakerPitch] = {}
    for name, ltm in ltms.items():
        modal = np.concatenate(modal_by_speaker.get(name, [np.zeros(0)]))
        try:
            rng = speaker_range(ltm, modal, seg_by_speaker.get(name, []))
        except PitchModelError:
            continue
        models[name] = SpeakerPitch(name, ltm, rng)
    return models, channels


def channel_pitch_from_models(track: F0Track, words, models: "dict[str, SpeakerPitch]",
                              contour: StylizedContour) -> ChannelPitch:
    """Rebuild per-frame pitch information from saved speaker models and a contour."""
    spk = frame_speakers(track, words)
    classes = _classify_by_speaker(track, spk, models)
    logf0, slope = contour.frame_values(track.times)
    return ChannelPitch(track.channel, track.times, track.f0, classes, logf0, slope, spk, contour)


# -- serialization ---------------------------------------------------------------

def write_speaker_models(models: "dict[str, SpeakerPitch]", path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# speaker mu sigma w_h w_m w_d baseline topline mean_modal mean_abs_slope\n")
        for name in sorted(models):
            m = models[name]
            vals = [m.ltm.mu, m.ltm.sigma, *m.ltm.weights, m.range.baseline, m.range.topline,
                    m.range.mean_modal, m.range.mean_abs_slope]
            fh.write(name + " " + " ".join(repr(float(v)) for v in vals) + "\n")


def read_speaker_models(path: str | Path) -> "dict[str, SpeakerPitch]":
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) != 10:
                raise FormatError(f"expected 10 fields, got {len(toks)}", path, lineno)
            try:
                v = [float(x) for x in toks[1:]]
            except ValueError:
                raise FormatError("bad number", path, lineno) from None
            out[toks[0]] = SpeakerPitch(toks[0], LtmParams(v[0], v[1], (v[2], v[3], v[4])),
                                        RangeParams(v[5], v[6], v[7], v[8]))
    return out


def write_contours(contours: Iterable[StylizedContour], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in contours:
            for s in c.segments:
                fh.write(f"{c.channel} {fmt_float(s.t_start)} {fmt_float(s.t_end)} "
                         f"{repr(float(s.a))} {repr(float(s.b))}\n")


def read_contours(path: str | Path) -> "dict[str, StylizedContour]":
    out: dict[str, StylizedContour] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) != 5:
                raise FormatError(f"expected 5 fields, got {len(toks)}", path, lineno)
            try:
                t0, t1, a, b = (float(x) for x in toks[1:])
            except ValueError:
                raise FormatError("bad number", path, lineno) from None
            out.setdefault(toks[0], StylizedContour(toks[0], [])).segments.append(
                LinearSegment(t0, t1, a, b))
    return out
