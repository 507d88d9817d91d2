"""Per-boundary prosodic feature vectors.

For every word boundary the extractor looks at the word before and after it,
or at 200 ms windows that extend backward from the pause start and forward
from the pause end.  Feature values are floats, category strings, or
``MISSING`` (``None``) where a feature is undefined.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus_io import FormatError, Utterance, WordToken, channel_words
from .pitch_model import HALVED, MODAL, UNVOICED, ChannelPitch, SpeakerPitch

MISSING = None

BIN_WIDTH = 0.5
BIN_LOW = -2.0
BIN_HIGH = 4.0

_STATS = ("MIN", "MAX", "MEAN", "FIRST", "LAST")
_RESET_PAIRS = [(s, s) for s in _STATS] + [("LAST", "FIRST"), ("MIN", "MAX")]
_REGIONS = ("WORD", "WIN")


def _reset_name(measure: str, a: str, b: str, region: str) -> str:
    pair = a if a == b else f"{a}_{b}"
    return f"F0s_{measure}_{pair}_{region}"


RESET_FEATURES = [_reset_name(m, a, b, r) for r in _REGIONS for a, b in _RESET_PAIRS
                  for m in ("LR", "LD")]
RANGE_FEATURES = ["F0s_LR_MEAN_KBASELN", "F0s_LR_MIN_KBASELN", "F0s_LR_MEAN_KTOPLN",
                  "F0s_LR_MIN_KTOPLN", "F0s_MEAN_RANGE_POS", "F0s_WIN_LR_MEAN_KBASELN",
                  "F0s_WIN_LR_MIN_KBASELN"]
SLOPE_FEATURES = ["F0s_SLOPE_LAST_PREV_KNORM", "F0s_SLOPE_LAST_PREV_WNORM",
                  "F0s_SLOPE_FIRST_NEXT_KNORM"]
CONTINUITY_FEATURES = ["F0s_SLOPE_DIFF", "F0s_RISEFALL"]
DURATION_FEATURES = ["AVG_NORM_RHYME_DUR", "SUM_NORM_RHYME_DUR", "MAX_NORM_PHONE_DUR",
                     "MAX_NORM_VOWEL_DUR"]
PAUSE_FEATURES = ["PAU_DUR", "PREV_PAU_DUR"]
VOICE_FEATURES = ["HALVING_ANY", "HALVING_END"]
TURN_FEATURES = ["TURN_CHANGE", "TIME_IN_TURN", "TURN_COUNT", "SPEAKER_GENDER",
                 "LISTENER_GENDER"]

FEATURE_NAMES = (PAUSE_FEATURES + DURATION_FEATURES + RESET_FEATURES + RANGE_FEATURES
                 + SLOPE_FEATURES + CONTINUITY_FEATURES + VOICE_FEATURES + TURN_FEATURES)
CATEGORICAL = frozenset({"F0s_RISEFALL", "SPEAKER_GENDER", "LISTENER_GENDER"})

FEATURE_GROUPS = {
    "pause": PAUSE_FEATURES,
    "duration": DURATION_FEATURES,
    "f0_reset": RESET_FEATURES,
    "f0_range": RANGE_FEATURES,
    "f0_slope": SLOPE_FEATURES,
    "f0_continuity": CONTINUITY_FEATURES,
    "voice_quality": VOICE_FEATURES,
    "turn": TURN_FEATURES,
}


# -- phone duration normalization ---------------------------------------------

@dataclass(frozen=True)
class PhoneStat:
    mean: float
    std: float
    count: int


def phone_key(phone) -> str:
    """Stats key; filled-pause phones are kept apart from ordinary ones."""
    return f"{phone.label}+FP" if phone.in_filled_pause else phone.label


def compute_phone_stats(utterances: Sequence[Utterance], trim_percentile: float = 99.5,
                        min_trim_count: int = 200, min_std: float = 1e-3
                        ) -> "dict[str, PhoneStat]":
    """Per-phone duration mean and standard deviation over the whole corpus.

    Durations above the ``trim_percentile`` are dropped for phones with at
    least ``min_trim_count`` tokens.  Phones left with fewer than two tokens
    get no entry.
    """
    durs: dict[str, list[float]] = {}
    for utt in utterances:
        for w in utt.words:
            for p in w.phones:
                durs.setdefault(phone_key(p), []).append(p.duration)
    stats = {}
    for key in sorted(durs):
        d = np.asarray(durs[key])
        if len(d) >= min_trim_count:
            d = d[d <= np.percentile(d, trim_percentile)]
        if len(d) < 2:
            continue
        stats[key] = PhoneStat(float(d.mean()), max(float(d.std(ddof=1)), min_std), len(d))
    return stats


def normalize_phone(duration: float, stat: PhoneStat | None) -> float | None:
    if stat is None:
        return MISSING
    return (duration - stat.mean) / stat.std


def bin_duration(z: float | None) -> float | None:
    """Lower edge of the 0.5-wide bin holding ``z``, clipped to [-2, 4]."""
    if z is None:
        return MISSING
    zc = min(max(z, BIN_LOW), BIN_HIGH)
    return math.floor(zc / BIN_WIDTH + 1e-9) * BIN_WIDTH


def bin_label(edge: float | None) -> str:
    """Interval text for a bin edge, e.g. ``[0,0.5)``; end bins are open."""
    if edge is None:
        return "?"
    if edge <= BIN_LOW:
        return f"(-inf,{BIN_LOW + BIN_WIDTH:g})"
    if edge >= BIN_HIGH:
        return f"[{BIN_HIGH:g},inf)"
    return f"[{edge:g},{edge + BIN_WIDTH:g})"


def write_phone_stats(stats: "dict[str, PhoneStat]", path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(stats):
            s = stats[key]
            fh.write(f"{key} {s.mean!r} {s.std!r} {s.count}\n")


def read_phone_stats(path: str | Path) -> "dict[str, PhoneStat]":
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            if len(toks) != 4:
                raise FormatError(f"expected 4 fields, got {len(toks)}", path, lineno)
            out[toks[0]] = PhoneStat(float(toks[1]), float(toks[2]), int(toks[3]))
    return out


# -- boundary candidates ----------------------------------------------------------

@dataclass
class BoundaryCandidate:
    """One potential boundary, after word ``index`` of ``channel``."""

    channel: str
    index: int
    features: "dict[str, object]"
    label: str | None = None
    prev_word: WordToken | None = field(default=None, repr=False)
    next_word: WordToken | None = field(default=None, repr=False)

    @property
    def is_final(self) -> bool:
        """True for the boundary after the last word of a channel."""
        return bool(self.features.get("_final", False)) or (
            self.prev_word is not None and self.next_word is None)


@dataclass
class FeatureConfig:
    window: float = 0.2
    pause_at_speaker_change: bool = True
    flat_slope: float = 0.5
    halving_min_frames: int = 3
    halving_end_frames: int = 3


@dataclass
class _Region:
    """Modal stylized F0 (Hz) and slopes inside one word or window."""

    hz: np.ndarray
    slope: np.ndarray
    times: np.ndarray

    @property
    def empty(self) -> bool:
        return len(self.hz) == 0

    def stat(self, name: str) -> float:
        if name == "MIN":
            return float(self.hz.min())
        if name == "MAX":
            return float(self.hz.max())
        if name == "MEAN":
            return float(self.hz.mean())
        if name == "FIRST":
            return float(self.hz[0])
        return float(self.hz[-1])


_EMPTY = _Region(np.zeros(0), np.zeros(0), np.zeros(0))


def _region(pitch: ChannelPitch | None, t0: float, t1: float, speaker: str) -> _Region:
    if pitch is None or t1 <= t0:
        return _EMPTY
    lo = np.searchsorted(pitch.times, t0, side="left")
    hi = np.searchsorted(pitch.times, t1, side="left")
    sl = slice(lo, hi)
    ok = ((pitch.classes[sl] == MODAL) & np.isfinite(pitch.logf0[sl])
          & (pitch.speaker[sl] == speaker))
    if not ok.any():
        return _EMPTY
    return _Region(np.exp(pitch.logf0[sl][ok]), pitch.slope[sl][ok], pitch.times[sl][ok])


def _log_diff(a: float, b: float) -> float:
    d = a - b
    return math.copysign(math.log1p(abs(d)), d)


def _slope_class(s: float, flat: float) -> str:
    if s > flat:
        return "rise"
    if s < -flat:
        return "fall"
    return "flat"


def _duration_features(word: WordToken, stats: "dict[str, PhoneStat]") -> dict:
    zs = [normalize_phone(p.duration, stats.get(phone_key(p))) for p in word.phones]
    out = dict.fromkeys(DURATION_FEATURES, MISSING)
    known = [z for z in zs if z is not None]
    if known:
        out["MAX_NORM_PHONE_DUR"] = bin_duration(max(known))
    vz = [z for z, p in zip(zs, word.phones) if p.is_vowel and z is not None]
    if vz:
        out["MAX_NORM_VOWEL_DUR"] = bin_duration(max(vz))
    vowel_pos = [i for i, p in enumerate(word.phones) if p.is_vowel]
    if vowel_pos:
        rz = [z for z in zs[vowel_pos[-1]:] if z is not None]
        if rz:
            out["SUM_NORM_RHYME_DUR"] = bin_duration(sum(rz))
            out["AVG_NORM_RHYME_DUR"] = bin_duration(sum(rz) / len(rz))
    return out


def _word_voicing(pitch: ChannelPitch | None, word: WordToken) -> np.ndarray:
    if pitch is None:
        return np.zeros(0, dtype=np.int8)
    lo = np.searchsorted(pitch.times, word.start, side="left")
    hi = np.searchsorted(pitch.times, word.end, side="left")
    cls = pitch.classes[lo:hi]
    return cls[(cls != UNVOICED) & (pitch.speaker[lo:hi] == word.speaker)]


def _pause(a: WordToken, b: WordToken, same_speaker: bool, cfg: FeatureConfig):
    if not same_speaker and not cfg.pause_at_speaker_change:
        return MISSING
    return max(0.0, b.start - a.end)


def extract_channel(channel: str, stream: "list[tuple[WordToken, Utterance]]",
                    pitch: ChannelPitch | None, speakers: "dict[str, SpeakerPitch]",
                    stats: "dict[str, PhoneStat]", labels: Sequence[str] | None = None,
                    config: FeatureConfig | None = None) -> list[BoundaryCandidate]:
    cfg = config or FeatureConfig()
    genders = {}
    for _, utt in stream:
        if utt.gender != "unknown":
            genders.setdefault(utt.speaker, utt.gender)
    channel_speakers = sorted({utt.speaker for _, utt in stream})
    out = []
    n = len(stream)
    for i, (w, utt) in enumerate(stream):
        nxt, nutt = stream[i + 1] if i + 1 < n else (None, None)
        turn_change = nutt is None or nutt.turn_index != utt.turn_index
        f: dict[str, object] = dict.fromkeys(FEATURE_NAMES, MISSING)

        if nxt is not None:
            f["PAU_DUR"] = _pause(w, nxt, not turn_change, cfg)
        if i > 0:
            pw, putt = stream[i - 1]
            f["PREV_PAU_DUR"] = _pause(pw, w, putt.turn_index == utt.turn_index, cfg)
        f.update(_duration_features(w, stats))

        model = speakers.get(w.speaker)
        nmodel = speakers.get(nxt.speaker) if nxt is not None else None
        prev_word = _region(pitch, w.start, w.end, w.speaker)
        prev_win = _region(pitch, w.end - cfg.window, w.end, w.speaker)
        if nxt is not None:
            next_word = _region(pitch, nxt.start, nxt.end, nxt.speaker)
            next_win = _region(pitch, nxt.start, nxt.start + cfg.window, nxt.speaker)
        else:
            next_word = next_win = _EMPTY

        for reg, a, b in (("WORD", prev_word, next_word), ("WIN", prev_win, next_win)):
            if turn_change or a.empty or b.empty:
                continue
            for sa, sb in _RESET_PAIRS:
                va, vb = a.stat(sa), b.stat(sb)
                f[_reset_name("LR", sa, sb, reg)] = math.log(va / vb)
                f[_reset_name("LD", sa, sb, reg)] = _log_diff(va, vb)

        if model is not None and not prev_word.empty:
            rp = model.range
            mean, low = prev_word.stat("MEAN"), prev_word.stat("MIN")
            f["F0s_LR_MEAN_KBASELN"] = math.log(mean / rp.baseline)
            f["F0s_LR_MIN_KBASELN"] = math.log(low / rp.baseline)
            f["F0s_LR_MEAN_KTOPLN"] = math.log(mean / rp.topline)
            f["F0s_LR_MIN_KTOPLN"] = math.log(low / rp.topline)
            span = math.log(rp.topline / rp.baseline)
            if span > 0:
                f["F0s_MEAN_RANGE_POS"] = math.log(mean / rp.baseline) / span
        if model is not None and not prev_win.empty:
            f["F0s_WIN_LR_MEAN_KBASELN"] = math.log(prev_win.stat("MEAN") / model.range.baseline)
            f["F0s_WIN_LR_MIN_KBASELN"] = math.log(prev_win.stat("MIN") / model.range.baseline)

        last_slope = float(prev_word.slope[-1]) if not prev_word.empty else None
        first_slope = float(next_word.slope[0]) if not next_word.empty else None
        if last_slope is not None and model is not None and model.range.mean_abs_slope > 0:
            f["F0s_SLOPE_LAST_PREV_KNORM"] = last_slope / model.range.mean_abs_slope
        if last_slope is not None:
            width = math.log(prev_word.stat("MAX") / prev_word.stat("MIN"))
            if width > 0:
                dur = float(prev_word.times[-1] - prev_word.times[0])
                f["F0s_SLOPE_LAST_PREV_WNORM"] = last_slope * dur / width
        if first_slope is not None and nmodel is not None and nmodel.range.mean_abs_slope > 0:
            f["F0s_SLOPE_FIRST_NEXT_KNORM"] = first_slope / nmodel.range.mean_abs_slope
        if not turn_change and last_slope is not None and first_slope is not None:
            f["F0s_SLOPE_DIFF"] = first_slope - last_slope
            f["F0s_RISEFALL"] = (f"{_slope_class(last_slope, cfg.flat_slope)}>"
                                 f"{_slope_class(first_slope, cfg.flat_slope)}")

        voiced = _word_voicing(pitch, w)
        if len(voiced):
            f["HALVING_ANY"] = float(np.count_nonzero(voiced == HALVED) >= cfg.halving_min_frames)
            f["HALVING_END"] = float(bool(np.any(voiced[-cfg.halving_end_frames:] == HALVED)))

        f["TURN_CHANGE"] = float(turn_change)
        f["TIME_IN_TURN"] = w.end - utt.words[0].start
        f["TURN_COUNT"] = float(utt.turn_index)
        f["SPEAKER_GENDER"] = genders.get(w.speaker, MISSING)
        if len(channel_speakers) == 2:
            other = channel_speakers[1] if channel_speakers[0] == w.speaker else channel_speakers[0]
            f["LISTENER_GENDER"] = genders.get(other, MISSING)

        label = labels[i] if labels is not None else None
        out.append(BoundaryCandidate(channel, i, f, label, w, nxt))
    return out


def extract_features(utterances: Sequence[Utterance], pitch: "dict[str, ChannelPitch]",
                     speakers: "dict[str, SpeakerPitch]", stats: "dict[str, PhoneStat]",
                     labels: "dict[str, Sequence[str]] | None" = None,
                     config: FeatureConfig | None = None) -> list[BoundaryCandidate]:
    """One candidate per word (the boundary that follows it), channel by channel."""
    out: list[BoundaryCandidate] = []
    for ch, stream in channel_words(utterances).items():
        labs = labels.get(ch) if labels is not None else None
        out.extend(extract_channel(ch, stream, pitch.get(ch), speakers, stats, labs, config))
    return out


def group_by_channel(cands: Iterable[BoundaryCandidate]) -> "OrderedDict[str, list[BoundaryCandidate]]":
    out: "OrderedDict[str, list[BoundaryCandidate]]" = OrderedDict()
    for c in cands:
        out.setdefault(c.channel, []).append(c)
    return out


# -- feature file -------------------------------------------------------------------

def _fmt_value(v) -> str:
    if v is None:
        return "?"
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_feature_file(cands: Sequence[BoundaryCandidate], path: str | Path,
                       names: Sequence[str] = FEATURE_NAMES) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("channel index label " + " ".join(names) + "\n")
        for c in cands:
            row = [c.channel, str(c.index), c.label or "?"]
            row += [_fmt_value(c.features.get(n)) for n in names]
            fh.write(" ".join(row) + "\n")


def read_feature_file(path: str | Path) -> list[BoundaryCandidate]:
    out = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if header[:3] != ["channel", "index", "label"]:
            raise FormatError("feature file must start with 'channel index label'", path, 1)
        names = header[3:]
        rows = []
        for lineno, line in enumerate(fh, start=2):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(toks)}", path, lineno)
            rows.append((lineno, toks))
    counts: dict[str, int] = {}
    for lineno, toks in rows:
        counts[toks[0]] = max(counts.get(toks[0], -1), int(toks[1]))
    for lineno, toks in rows:
        feats: dict[str, object] = {}
        for name, tok in zip(names, toks[3:]):
            if tok == "?":
                feats[name] = MISSING
            elif name in CATEGORICAL:
                feats[name] = tok
            else:
                try:
                    feats[name] = float(tok)
                except ValueError:
                    feats[name] = tok
        idx = int(toks[1])
        if idx == counts[toks[0]]:
            feats["_final"] = True
        label = None if toks[2] == "?" else toks[2]
        out.append(BoundaryCandidate(toks[0], idx, feats, label))
    return out
