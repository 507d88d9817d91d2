"""Readers and writers for the corpus file formats.

Three line-oriented formats are supported, all whitespace separated with
``#`` comments:

``.align``
    ``<channel> <speaker> <gender> <word> <start> <end> <phone:dur[,phone:dur...]>``
``.f0``
    ``<channel> <time> <f0_hz>`` (``0`` marks an unvoiced frame)
``.lab``
    ``<channel> <word_index> <none|sent|topic>`` (one label after each word)
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LABELS = ("none", "sentence", "topic")
_LABEL_FROM_TOKEN = {"none": "none", "sent": "sentence", "topic": "topic"}
_TOKEN_FROM_LABEL = {v: k for k, v in _LABEL_FROM_TOKEN.items()}

_GENDERS = {"m": "male", "male": "male", "f": "female", "female": "female",
            "u": "unknown", "unknown": "unknown", "?": "unknown"}
_GENDER_TOKEN = {"male": "m", "female": "f", "unknown": "u"}

DEFAULT_FILLED_PAUSES = frozenset(
    {"um", "uh", "uh-huh", "uhhuh", "um-hum", "mm-hmm", "mhm", "hm", "er", "ah", "eh"}
)

# ARPAbet-style vowel inventory (lowercase, stress digits stripped).
VOWELS = frozenset(
    {"aa", "ae", "ah", "ao", "aw", "ax", "axr", "ay", "eh", "er", "ey", "ih",
     "ix", "iy", "ow", "oy", "uh", "uw", "ux"}
)

DEFAULT_FRAME_STEP = 0.01
_PHONE_SUM_TOL = 1e-3
_TIME_TOL = 1e-6


class FormatError(ValueError):
    """A corpus file violates its format; carries the offending line number."""

    def __init__(self, message: str, path: str | Path | None = None, lineno: int | None = None):
        self.path = str(path) if path is not None else None
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass(frozen=True)
class PhoneToken:
    label: str
    duration: float
    is_vowel: bool = False
    in_filled_pause: bool = False


@dataclass(frozen=True)
class WordToken:
    word: str
    start: float
    end: float
    phones: tuple[PhoneToken, ...]
    speaker: str

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Utterance:
    """A maximal run of words by one speaker within a channel (a turn)."""

    channel: str
    speaker: str
    gender: str
    words: tuple[WordToken, ...]
    turn_index: int


@dataclass
class F0Track:
    """Frame-level F0 for one channel; ``f0 == 0`` marks unvoiced frames."""

    channel: str
    times: np.ndarray
    f0: np.ndarray
    step: float = DEFAULT_FRAME_STEP

    @property
    def voiced(self) -> np.ndarray:
        return self.f0 > 0

    def __len__(self) -> int:
        return len(self.times)

    def with_f0(self, f0: np.ndarray) -> "F0Track":
        return F0Track(self.channel, self.times, np.asarray(f0, dtype=float), self.step)


def fmt_float(x: float) -> str:
    """Canonical short decimal rendering used by every writer (6 decimals max)."""
    r = round(float(x), 6)
    if r == 0:
        r = 0.0
    return repr(r)


def is_vowel(label: str) -> bool:
    return label.lower().rstrip("012") in VOWELS


def _data_lines(path: str | Path) -> Iterable[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _parse_float(tok: str, what: str, path, lineno) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise FormatError(f"bad {what} {tok!r}", path, lineno) from None
    if not math.isfinite(val):
        raise FormatError(f"non-finite {what} {tok!r}", path, lineno)
    return val


def _parse_phones(field: str, in_fp: bool, path, lineno) -> tuple[PhoneToken, ...]:
    if field == "-":
        return ()
    phones = []
    for item in field.split(","):
        label, sep, dur = item.rpartition(":")
        if not sep or not label:
            raise FormatError(f"bad phone entry {item!r}", path, lineno)
        d = _parse_float(dur, "phone duration", path, lineno)
        if d <= 0:
            raise FormatError(f"non-positive phone duration in {item!r}", path, lineno)
        phones.append(PhoneToken(label, d, is_vowel(label), in_fp))
    return tuple(phones)


def parse_alignment(path: str | Path, filled_pauses: Iterable[str] = DEFAULT_FILLED_PAUSES
                    ) -> list[Utterance]:
    """Parse an ``.align`` file into turns grouped by channel.

    Channels keep their order of first appearance; a new turn starts at every
    speaker change within a channel.
    """
    fps = frozenset(w.lower() for w in filled_pauses)
    per_channel: "OrderedDict[str, list[tuple[WordToken, str]]]" = OrderedDict()
    last_end: dict[str, float] = {}
    for lineno, toks in _data_lines(path):
        if len(toks) != 7:
            raise FormatError(f"expected 7 fields, got {len(toks)}", path, lineno)
        channel, speaker, gender_tok, word, s_tok, e_tok, ph_tok = toks
        gender = _GENDERS.get(gender_tok.lower())
        if gender is None:
            raise FormatError(f"unknown gender {gender_tok!r}", path, lineno)
        start = _parse_float(s_tok, "start time", path, lineno)
        end = _parse_float(e_tok, "end time", path, lineno)
        if start < 0:
            raise FormatError("negative start time", path, lineno)
        if end <= start:
            raise FormatError(f"word end {end} not after start {start} (negative duration)",
                              path, lineno)
        prev = last_end.get(channel)
        if prev is not None and start < prev - _TIME_TOL:
            raise FormatError(f"non-monotonic times: start {start} before previous end {prev}",
                              path, lineno)
        phones = _parse_phones(ph_tok, word.lower() in fps, path, lineno)
        if sum(p.duration for p in phones) > (end - start) + _PHONE_SUM_TOL:
            raise FormatError("phone durations exceed word duration", path, lineno)
        last_end[channel] = end
        per_channel.setdefault(channel, []).append(
            (WordToken(word, start, end, phones, speaker), gender))

    utterances: list[Utterance] = []
    for channel, items in per_channel.items():
        turn = 0
        cur: list[WordToken] = []
        cur_gender = "unknown"
        for word, gender in items:
            if cur and word.speaker != cur[-1].speaker:
                utterances.append(Utterance(channel, cur[-1].speaker, cur_gender, tuple(cur), turn))
                turn += 1
                cur = []
            if not cur:
                cur_gender = gender
            cur.append(word)
        if cur:
            utterances.append(Utterance(channel, cur[-1].speaker, cur_gender, tuple(cur), turn))
    return utterances


def format_alignment(utterances: Sequence[Utterance]) -> str:
    lines = []
    for utt in utterances:
        g = _GENDER_TOKEN[utt.gender]
        for w in utt.words:
            ph = ",".join(f"{p.label}:{fmt_float(p.duration)}" for p in w.phones) or "-"
            lines.append(f"{utt.channel} {utt.speaker} {g} {w.word} "
                         f"{fmt_float(w.start)} {fmt_float(w.end)} {ph}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_alignment(utterances: Sequence[Utterance], path: str | Path) -> None:
    Path(path).write_text(format_alignment(utterances), encoding="utf-8")


def channel_words(utterances: Sequence[Utterance]) -> "OrderedDict[str, list[tuple[WordToken, Utterance]]]":
    """Flatten turns back into per-channel word streams, each word paired with its turn."""
    out: "OrderedDict[str, list[tuple[WordToken, Utterance]]]" = OrderedDict()
    for utt in utterances:
        out.setdefault(utt.channel, []).extend((w, utt) for w in utt.words)
    return out


# -- F0 frames ---------------------------------------------------------------

def parse_f0(path: str | Path) -> "OrderedDict[str, F0Track]":
    """Parse an ``.f0`` file; the frame step is inferred per channel."""
    raw: "OrderedDict[str, tuple[list[float], list[float]]]" = OrderedDict()
    for lineno, toks in _data_lines(path):
        if len(toks) != 3:
            raise FormatError(f"expected 3 fields, got {len(toks)}", path, lineno)
        channel = toks[0]
        t = _parse_float(toks[1], "time", path, lineno)
        f = _parse_float(toks[2], "f0", path, lineno)
        if f < 0:
            raise FormatError(f"negative f0 {f}", path, lineno)
        times, f0s = raw.setdefault(channel, ([], []))
        if times and t <= times[-1]:
            raise FormatError(f"non-increasing frame time {t} after {times[-1]}", path, lineno)
        times.append(t)
        f0s.append(f)
    tracks: "OrderedDict[str, F0Track]" = OrderedDict()
    for channel, (times, f0s) in raw.items():
        t = np.asarray(times, dtype=float)
        step = float(np.median(np.diff(t))) if len(t) > 1 else DEFAULT_FRAME_STEP
        tracks[channel] = F0Track(channel, t, np.asarray(f0s, dtype=float), round(step, 9))
    return tracks


def write_f0(tracks: Iterable[F0Track], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in tracks:
            for t, f in zip(tr.times, tr.f0):
                fh.write(f"{tr.channel} {fmt_float(t)} {fmt_float(f)}\n")


# -- boundary labels -----------------------------------------------------------

def parse_boundaries(path: str | Path, utterances: Sequence[Utterance]
                     ) -> "OrderedDict[str, list[str]]":
    """Read one label per word and check it against the parsed alignment.

    Returns, per channel, the label of the boundary following each word.
    """
    counts = {ch: len(ws) for ch, ws in channel_words(utterances).items()}
    got: dict[str, dict[int, str]] = {}
    last_line: dict[str, int] = {}
    lineno = 0
    for lineno, toks in _data_lines(path):
        if len(toks) != 3:
            raise FormatError(f"expected 3 fields, got {len(toks)}", path, lineno)
        channel, idx_tok, lab_tok = toks
        label = _LABEL_FROM_TOKEN.get(lab_tok)
        if label is None:
            raise FormatError(f"unknown label token {lab_tok!r}", path, lineno)
        try:
            idx = int(idx_tok)
        except ValueError:
            raise FormatError(f"bad word index {idx_tok!r}", path, lineno) from None
        if channel not in counts:
            raise FormatError(f"channel {channel!r} not in alignment", path, lineno)
        if not 0 <= idx < counts[channel]:
            raise FormatError(f"label count mismatch: word index {idx} out of range "
                              f"(channel {channel} has {counts[channel]} words)", path, lineno)
        slot = got.setdefault(channel, {})
        if idx in slot:
            raise FormatError(f"duplicate label for word {idx}", path, lineno)
        slot[idx] = label
        last_line[channel] = lineno
    out: "OrderedDict[str, list[str]]" = OrderedDict()
    for channel, n in counts.items():
        slot = got.get(channel, {})
        if len(slot) != n:
            raise FormatError(f"label count mismatch for channel {channel}: "
                              f"{len(slot)} labels for {n} words", path,
                              last_line.get(channel, lineno))
        out[channel] = [slot[i] for i in range(n)]
    return out


def write_boundaries(labels: "dict[str, Sequence[str]]", path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for channel, labs in labels.items():
            for i, lab in enumerate(labs):
                fh.write(f"{channel} {i} {_TOKEN_FROM_LABEL[lab]}\n")


def task_targets(labels: Sequence[str], task: str) -> np.ndarray:
    """Collapse three-way labels to binary targets for a segmentation task.

    Topic boundaries are also sentence boundaries, so for ``task="sentence"``
    both ``sentence`` and ``topic`` map to 1.
    """
    if task == "sentence":
        return np.array([lab != "none" for lab in labels], dtype=int)
    if task == "topic":
        return np.array([lab == "topic" for lab in labels], dtype=int)
    raise ValueError(f"unknown task {task!r}")


@dataclass
class Corpus:
    """A parsed corpus: turns, optional F0 tracks and optional reference labels."""

    utterances: list[Utterance]
    tracks: "dict[str, F0Track]"
    labels: "dict[str, list[str]] | None" = None

    @property
    def channels(self) -> list[str]:
        return list(channel_words(self.utterances))

    def words(self, channel: str) -> list[WordToken]:
        return [w for w, _ in channel_words(self.utterances)[channel]]


def load_corpus(align: str | Path, f0: str | Path | None = None,
                labels: str | Path | None = None,
                filled_pauses: Iterable[str] = DEFAULT_FILLED_PAUSES) -> Corpus:
    utts = parse_alignment(align, filled_pauses)
    tracks = parse_f0(f0) if f0 is not None else OrderedDict()
    labs = parse_boundaries(labels, utts) if labels is not None else None
    return Corpus(utts, dict(tracks), labs)
