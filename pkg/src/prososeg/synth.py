"""Synthetic corpora with planted boundary cues.

Each channel is a stream of sentences grouped into stories.  Cue strengths
control how boundaries show up: longer pauses, lengthened final rhymes,
pitch resets at sentence starts, and sentence-initial/final cue words.
Per-sentence pitch offsets (``level_sd``) and speaker turns, which only
change at sentence ends, also mark boundaries.  With all of these at zero
the boundaries are indistinguishable from other word junctions.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import zlib
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus_io import (DEFAULT_FILLED_PAUSES, DEFAULT_FRAME_STEP, Corpus, F0Track, PhoneToken,
                        Utterance, WordToken, is_vowel, write_alignment, write_boundaries,
                        write_f0)

CONSONANTS = ("p", "t", "k", "b", "d", "g", "s", "z", "m", "n", "l", "r")
VOWEL_SET = ("aa", "iy", "uw", "eh", "ah", "ow")
VOICED = frozenset(VOWEL_SET) | {"b", "d", "g", "z", "m", "n", "l", "r"}
INITIAL_CUES = ("so", "well", "now", "okay")
FINAL_CUES = ("right", "though", "again", "anyway")
GAMMA_SHAPE = 10.0


class SynthError(ValueError):
    pass


@dataclass
class SynthSpec:
    seed: int = 0
    n_channels: int = 4
    words_per_channel: int = 1500
    speakers_per_channel: int = 2
    f0_sigma: float = 0.08
    halving_prob: float = 0.01
    sentence_rate: float = 0.1
    topic_rate: float = 0.05
    turn_prob: float = 0.2
    pause_prob: float = 0.3
    pause_mean: float = 0.08
    pause_multiplier: float = 1.0
    topic_pause: float = 0.0
    lengthening: float = 0.0
    reset_depth: float = 0.0
    lexical_cue: float = 0.0
    level_sd: float = 0.05
    vocab_size: int = 200
    n_topics: int = 4
    topic_word_prob: float = 0.3
    filled_pause_prob: float = 0.01

    def validate(self) -> None:
        for name in ("sentence_rate", "topic_rate"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise SynthError(f"{name} must lie in (0, 1), got {v}")
        for name in ("turn_prob", "pause_prob", "halving_prob", "lexical_cue",
                     "topic_word_prob", "filled_pause_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1], got {v}")
        if self.pause_multiplier < 1.0:
            raise SynthError("pause_multiplier must be >= 1")
        if min(self.n_channels, self.words_per_channel, self.speakers_per_channel,
               self.vocab_size) < 1:
            raise SynthError("counts must be positive")
        if self.n_topics < 1:
            raise SynthError("n_topics must be >= 1")
        if min(self.f0_sigma, self.pause_mean) <= 0:
            raise SynthError("f0_sigma and pause_mean must be positive")
        if min(self.lengthening, self.topic_pause, self.level_sd) < 0:
            raise SynthError("lengthening, topic_pause and level_sd must be >= 0")


def read_spec(path: str | Path) -> SynthSpec:
    """Parse ``key = value`` lines into a spec; unknown keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string("[synth]\n" + Path(path).read_text(encoding="utf-8"))
    types = {f.name: f.type for f in dataclasses.fields(SynthSpec)}
    kw = {}
    for key, raw in cp["synth"].items():
        if key not in types:
            raise SynthError(f"unknown synth spec key {key!r}")
        kw[key] = int(raw) if types[key] in (int, "int") else float(raw)
    spec = SynthSpec(**kw)
    spec.validate()
    return spec


def write_spec(spec: SynthSpec, path: str | Path) -> None:
    lines = [f"{f.name} = {getattr(spec, f.name)}" for f in dataclasses.fields(spec)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _phone_mean(label: str) -> float:
    h = zlib.crc32(label.encode()) % 1000 / 1000.0
    return (0.08 + 0.05 * h) if label in VOWEL_SET else (0.04 + 0.04 * h)


def word_phones(word: str) -> tuple[str, ...]:
    """Fixed pseudo-pronunciation derived from the spelling."""
    if word in DEFAULT_FILLED_PAUSES:
        return ("ah", "m") if word.startswith("um") else ("ah",)
    rng = np.random.default_rng(zlib.crc32(word.encode()))
    out = []
    for _ in range(int(rng.integers(1, 4))):
        out.append(CONSONANTS[rng.integers(len(CONSONANTS))])
        out.append(VOWEL_SET[rng.integers(len(VOWEL_SET))])
        if rng.random() < 0.5:
            out.append(CONSONANTS[rng.integers(len(CONSONANTS))])
    return tuple(out)


def _r(x: float) -> float:
    return round(float(x), 6)


@dataclass
class _Word:
    word: str
    label: str
    speaker: int
    sentence_initial: bool
    level_offset: float


def _word_plan(spec: SynthSpec, rng: np.random.Generator) -> list[_Word]:
    """Word strings, boundary labels, speakers and pitch offsets for one channel."""
    general = [f"w{i}" for i in range(spec.vocab_size)]
    zipf = 1.0 / np.arange(1, spec.vocab_size + 1)
    zipf /= zipf.sum()
    topic_vocab = [[f"t{t}x{i}" for i in range(max(spec.vocab_size // 4, 5))]
                   for t in range(spec.n_topics)]
    words: list[_Word] = []
    topic = int(rng.integers(spec.n_topics))
    speaker = 0
    initial = True
    offset = float(rng.normal(0.0, spec.level_sd))
    while len(words) < spec.words_per_channel:
        if rng.random() < spec.filled_pause_prob:
            w = "uh" if rng.random() < 0.5 else "um"
        elif initial and rng.random() < spec.lexical_cue:
            w = INITIAL_CUES[rng.integers(len(INITIAL_CUES))]
        elif rng.random() < spec.topic_word_prob:
            tv = topic_vocab[topic]
            w = tv[rng.integers(len(tv))]
        else:
            w = general[rng.choice(spec.vocab_size, p=zipf)]
        ends = rng.random() < spec.sentence_rate or len(words) == spec.words_per_channel - 1
        if ends and rng.random() < spec.lexical_cue:
            words.append(_Word(w, "none", speaker, initial, offset))
            initial = False
            w = FINAL_CUES[rng.integers(len(FINAL_CUES))]
        label = "none"
        if ends:
            label = "topic" if rng.random() < spec.topic_rate else "sentence"
        words.append(_Word(w, label, speaker, initial, offset))
        initial = ends
        if ends:
            offset = float(rng.normal(0.0, spec.level_sd))
            if label == "topic":
                topic = (topic + 1 + int(rng.integers(max(spec.n_topics - 1, 1)))) % spec.n_topics
            if spec.speakers_per_channel > 1 and rng.random() < spec.turn_prob:
                speaker = (speaker + 1) % spec.speakers_per_channel
    return words[:spec.words_per_channel]


def generate_corpus(spec: SynthSpec) -> Corpus:
    """Build the corpus in memory (times rounded as they would be on disk)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    step = DEFAULT_FRAME_STEP
    utterances: list[Utterance] = []
    tracks: "OrderedDict[str, F0Track]" = OrderedDict()
    labels: "OrderedDict[str, list[str]]" = OrderedDict()
    for c in range(spec.n_channels):
        ch = f"ch{c:02d}"
        spk_names = [f"{ch}s{j}" for j in range(spec.speakers_per_channel)]
        genders = ["male" if (c + j) % 2 == 0 else "female"
                   for j in range(spec.speakers_per_channel)]
        mus = [math.log(110.0 if g == "male" else 200.0) + float(rng.normal(0, 0.1))
               for g in genders]
        plan = _word_plan(spec, rng)
        t = _r(rng.uniform(0.1, 0.5))
        tokens: list[WordToken] = []
        voiced_spans: list[tuple[float, float, float, float, float]] = []
        for i, pw in enumerate(plan):
            phones = word_phones(pw.word)
            final = pw.label != "none"
            vowel_idx = [k for k, p in enumerate(phones) if p in VOWEL_SET]
            rhyme_from = vowel_idx[-1] if vowel_idx else len(phones)
            durs = []
            for k, p in enumerate(phones):
                mean = _phone_mean(p) * (2.5 if pw.word in DEFAULT_FILLED_PAUSES else 1.0)
                d = rng.gamma(GAMMA_SHAPE, mean / GAMMA_SHAPE)
                if final and k >= rhyme_from:
                    d += spec.lengthening * mean / math.sqrt(GAMMA_SHAPE)
                durs.append(max(_r(d), 0.01))
            start = t
            pts = []
            pt = start
            for p, d in zip(phones, durs):
                pts.append(PhoneToken(p, d, is_vowel(p), pw.word in DEFAULT_FILLED_PAUSES))
                if p in VOICED:
                    voiced_spans.append((pt, pt + d, 0.0, 0.0, 0.0))
                pt += d
            end = _r(start + sum(durs))
            # word-level pitch: speaker mean, sentence offset, reset at sentence start
            level = mus[pw.speaker] + pw.level_offset + float(rng.normal(0, 0.02))
            if pw.sentence_initial:
                level += spec.reset_depth
            slope = float(rng.normal(0.0, 0.3))
            mid = (start + end) / 2
            n_sp = sum(1 for p in phones if p in VOICED)
            for j in range(len(voiced_spans) - n_sp, len(voiced_spans)):
                a, b, _, _, _ = voiced_spans[j]
                voiced_spans[j] = (a, b, level, slope, mid)
            tokens.append(WordToken(pw.word, start, end, tuple(pts), spk_names[pw.speaker]))
            pause = 0.0
            if rng.random() < spec.pause_prob:
                pause = rng.exponential(spec.pause_mean)
            if final:
                pause *= spec.pause_multiplier
            if pw.label == "topic":
                pause += spec.topic_pause
            t = _r(end + pause)
        n_frames = int(math.ceil((tokens[-1].end + 0.2) / step)) + 1
        times = np.round(np.arange(n_frames) * step, 6)
        f0 = np.zeros(n_frames)
        for a, b, level, slope, mid in voiced_spans:
            lo = np.searchsorted(times, a, side="left")
            hi = np.searchsorted(times, b, side="left")
            if hi <= lo:
                continue
            tt = times[lo:hi]
            lf = level + slope * (tt - mid) + rng.normal(0, spec.f0_sigma / 4, len(tt))
            f0[lo:hi] = np.exp(lf)
        voiced = np.nonzero(f0 > 0)[0]
        u = rng.random(len(voiced))
        f0[voiced[u < spec.halving_prob]] /= 2.0
        f0[voiced[(u >= spec.halving_prob) & (u < 1.5 * spec.halving_prob)]] *= 2.0
        f0 = np.round(f0, 6)
        tracks[ch] = F0Track(ch, times, f0, step)

        # group into turns
        turn = 0
        cur: list[WordToken] = []
        for k, (tok, pw) in enumerate(zip(tokens, plan)):
            if cur and tok.speaker != cur[-1].speaker:
                utterances.append(Utterance(ch, cur[-1].speaker, genders[plan[k - 1].speaker],
                                            tuple(cur), turn))
                turn += 1
                cur = []
            cur.append(tok)
        utterances.append(Utterance(ch, cur[-1].speaker, genders[plan[-1].speaker],
                                    tuple(cur), turn))
        labels[ch] = [pw.label for pw in plan]
    return Corpus(utterances, dict(tracks), dict(labels))


def write_corpus(corpus: Corpus, prefix: str | Path) -> tuple[Path, Path, Path]:
    prefix = Path(prefix)
    paths = (prefix.with_suffix(".align"), prefix.with_suffix(".f0"), prefix.with_suffix(".lab"))
    write_alignment(corpus.utterances, paths[0])
    write_f0(corpus.tracks.values(), paths[1])
    write_boundaries(corpus.labels, paths[2])
    return paths


def generate(spec: SynthSpec, prefix: str | Path) -> tuple[Path, Path, Path]:
    """Generate and write ``prefix.align``, ``prefix.f0`` and ``prefix.lab``."""
    return write_corpus(generate_corpus(spec), prefix)
