"""Shared builders for small hand-made corpora."""

from __future__ import annotations

import numpy as np
import pytest

from prososeg.corpus_io import PhoneToken, Utterance, WordToken


def word(text, start, end, speaker="A", phones=None):
    if phones is None:
        phones = (PhoneToken("ah", end - start, True),)
    return WordToken(text, start, end, tuple(phones), speaker)


def stream(texts, gaps=None, dur=0.3, speaker="A"):
    """Words of fixed duration separated by the given gaps (default 0.05 s)."""
    gaps = gaps if gaps is not None else [0.05] * (len(texts) - 1)
    out, t = [], 0.0
    for i, w in enumerate(texts):
        out.append(word(w, round(t, 6), round(t + dur, 6), speaker))
        t += dur + (gaps[i] if i < len(gaps) else 0.0)
    return out


def utterance(words, channel="c1", speaker="A", gender="female", turn=0):
    return Utterance(channel, speaker, gender, tuple(words), turn)


def align_line(ch, spk, g, w, s, e, phones):
    return f"{ch} {spk} {g} {w} {s} {e} {phones}\n"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting ----------------------------------------------------------

_CRITERIA: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _CRITERIA.append((mark.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _CRITERIA:
        terminalreporter.write_line(f"{status}  {name}" + (f"  ({detail})" if detail else ""))
