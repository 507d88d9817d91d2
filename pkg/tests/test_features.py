import math

import numpy as np
import pytest

from prososeg.corpus_io import F0Track, PhoneToken, Utterance, WordToken
from prososeg.features import (FEATURE_NAMES, PhoneStat, bin_duration, bin_label,
                               compute_phone_stats, extract_features, normalize_phone,
                               read_feature_file, read_phone_stats, write_feature_file,
                               write_phone_stats)
from prososeg.pitch_model import (MODAL, ChannelPitch, LinearSegment, LtmParams, RangeParams,
                                  SpeakerPitch, StylizedContour)

from conftest import stream, utterance, word


def _phone_utts(durs, label="aa"):
    words = [word("w", i, i + d, phones=[PhoneToken(label, d, True)]) for i, d in enumerate(durs)]
    return [utterance(words)]


def test_phone_mean_simple():
    s = compute_phone_stats(_phone_utts([0.10, 0.10]))
    assert s["aa"].mean == pytest.approx(0.10)


def test_phone_trim_outlier():
    durs = [0.1] * 999 + [5.0]
    trimmed = compute_phone_stats(_phone_utts(durs))["aa"].mean
    untrimmed = float(np.mean(durs))
    assert trimmed == pytest.approx(0.1)
    assert untrimmed > 0.104


def test_phone_single_token_excluded():
    assert "aa" not in compute_phone_stats(_phone_utts([0.1]))


def test_unseen_phone_missing():
    assert normalize_phone(0.2, None) is None


@pytest.mark.parametrize("dur,expected", [(0.10, 0.0), (0.125, 1.0), (0.15, 2.0)])
def test_normalize(dur, expected):
    assert normalize_phone(dur, PhoneStat(0.10, 0.025, 10)) == pytest.approx(expected)


@pytest.mark.parametrize("z,label", [(0.0, "[0,0.5)"), (10.0, "[4,inf)"), (-0.3, "[-0.5,0)"),
                                      (-7.0, "(-inf,-1.5)"), (0.49, "[0,0.5)"), (0.5, "[0.5,1)")])
def test_bins(z, label):
    assert bin_label(bin_duration(z)) == label


def test_bin_missing():
    assert bin_duration(None) is None


def _flat_pitch(ch, words, hz_by_word, t_end):
    """Channel pitch with a flat stylized contour at a given Hz inside each word."""
    times = np.round(np.arange(0, t_end, 0.01), 6)
    classes = np.full(len(times), -1, dtype=np.int8)
    logf0 = np.full(len(times), np.nan)
    slope = np.full(len(times), np.nan)
    spk = np.full(len(times), "", dtype=object)
    segs = []
    for w, hz in zip(words, hz_by_word):
        m = (times >= w.start) & (times < w.end)
        classes[m] = MODAL
        logf0[m] = math.log(hz)
        slope[m] = 0.0
        spk[m] = w.speaker
        segs.append(LinearSegment(w.start, w.end, 0.0, math.log(hz)))
    f0 = np.where(classes == MODAL, np.exp(np.nan_to_num(logf0)), 0.0)
    return ChannelPitch(ch, times, f0, classes, logf0, slope, spk, StylizedContour(ch, segs))


def _speakers(mu=math.log(200)):
    ltm = LtmParams(mu, 0.05, (0.0, 1.0, 0.0))
    return {"A": SpeakerPitch("A", ltm, RangeParams(math.exp(mu - math.log(2) / 2), 250, 200, 1))}


def test_pause_features_constructed_alignment():
    ws = stream(["a", "b", "c"], gaps=[0.30, 0.05])
    cands = extract_features([utterance(ws)], {}, {}, {})
    assert cands[0].features["PAU_DUR"] == pytest.approx(0.30)
    assert cands[1].features["PREV_PAU_DUR"] == pytest.approx(0.30)
    assert cands[1].features["PAU_DUR"] == pytest.approx(0.05)
    assert cands[0].features["PREV_PAU_DUR"] is None
    assert cands[2].features["PAU_DUR"] is None
    assert cands[2].is_final and not cands[0].is_final


def test_equal_f0_gives_zero_reset():
    ws = stream(["a", "b", "c"])
    pitch = {"c1": _flat_pitch("c1", ws, [180, 180, 150], 2.0)}
    f = extract_features([utterance(ws)], pitch, _speakers(), {})[0].features
    assert f["F0s_LR_MEAN_WORD"] == pytest.approx(0.0)
    assert f["F0s_LD_LAST_FIRST_WORD"] == pytest.approx(0.0)


def test_reset_sign_and_baseline():
    ws = stream(["a", "b"])
    base = 200 / math.sqrt(2)
    pitch = {"c1": _flat_pitch("c1", ws, [base, 2 * base], 1.0)}
    f = extract_features([utterance(ws)], pitch, _speakers(), {})[0].features
    assert f["F0s_LR_MEAN_KBASELN"] == pytest.approx(0.0, abs=1e-9)
    assert f["F0s_LR_MEAN_WORD"] == pytest.approx(-math.log(2))
    assert f["F0s_RISEFALL"] == "flat>flat"


def test_no_voiced_speech_gives_missing_f0():
    ws = stream(["a", "b"])
    f = extract_features([utterance(ws)], {}, _speakers(), {})[0].features
    assert all(f[n] is None for n in FEATURE_NAMES if n.startswith("F0s_"))


def test_turn_features():
    a = stream(["x", "y"], speaker="A")
    b = [word("z", 1.0, 1.3, "B")]
    utts = [Utterance("c1", "A", "female", tuple(a), 0), Utterance("c1", "B", "male", tuple(b), 1)]
    cands = extract_features(utts, {}, {}, {})
    assert [c.features["TURN_CHANGE"] for c in cands] == [0.0, 1.0, 1.0]
    assert cands[0].features["SPEAKER_GENDER"] == "female"
    assert cands[0].features["LISTENER_GENDER"] == "male"
    assert cands[2].features["TURN_COUNT"] == 1.0


def test_duration_features_rhyme():
    stats = {"t": PhoneStat(0.05, 0.01, 10), "aa": PhoneStat(0.10, 0.02, 10)}
    w = word("ta", 0.0, 0.2, phones=[PhoneToken("t", 0.05), PhoneToken("aa", 0.14, True)])
    f = extract_features([utterance([w])], {}, {}, stats)[0].features
    assert f["MAX_NORM_VOWEL_DUR"] == 2.0
    assert f["AVG_NORM_RHYME_DUR"] == 2.0
    assert f["MAX_NORM_PHONE_DUR"] == 2.0


def test_feature_file_roundtrip(tmp_path):
    ws = stream(["a", "b", "c"], gaps=[0.3, 0.1])
    cands = extract_features([utterance(ws)], {}, {}, {}, {"c1": ["none", "sentence", "none"]})
    write_feature_file(cands, tmp_path / "f.txt")
    back = read_feature_file(tmp_path / "f.txt")
    assert [c.label for c in back] == ["none", "sentence", "none"]
    assert [c.is_final for c in back] == [False, False, True]
    for a, b in zip(cands, back):
        for n in FEATURE_NAMES:
            assert a.features[n] == b.features[n]


def test_phone_stats_roundtrip(tmp_path):
    stats = {"aa": PhoneStat(0.1, 0.02, 5), "m+FP": PhoneStat(0.2, 0.05, 3)}
    write_phone_stats(stats, tmp_path / "s.txt")
    assert read_phone_stats(tmp_path / "s.txt") == stats
