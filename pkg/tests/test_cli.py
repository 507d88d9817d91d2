import re

import pytest

from prososeg.cli import _config, build_parser, main

SYNTH = ["--set", "n_channels=6", "--set", "words_per_channel=700", "--set", "pause_multiplier=4",
         "--set", "lengthening=1", "--set", "reset_depth=0.1", "--set", "lexical_cue=0.5"]


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(d, seed=3):
    """Synthesize a corpus and run every sentence-task stage; returns output paths."""
    g = ["--seed", seed]
    c = d / "c"
    assert run(*g, "synth", *SYNTH, "--out-prefix", c) == 0
    assert run(*g, "fit-pitch", "--align", f"{c}.align", "--f0", f"{c}.f0",
               "--out-models", d / "m.txt", "--out-contours", d / "k.txt") == 0
    assert run(*g, "extract", "--align", f"{c}.align", "--f0", f"{c}.f0", "--models", d / "m.txt",
               "--contours", d / "k.txt", "--labels", f"{c}.lab", "--out", d / "f.txt",
               "--out-phone-stats", d / "ps.txt") == 0
    assert run(*g, "select-features", "--features", d / "f.txt",
               "--candidates", "PAU_DUR,PREV_PAU_DUR,AVG_NORM_RHYME_DUR,F0s_LR_MEAN_WORD",
               "--out-report", d / "sel.txt", "--out-tree", d / "sel_tree.txt") == 0
    assert run(*g, "train-tree", "--features", d / "f.txt", "--out", d / "t.txt") == 0
    assert run(*g, "train-lm", "--align", f"{c}.align", "--labels", f"{c}.lab", "--order", 3,
               "--out", d / "lm.arpa") == 0
    assert run(*g, "segment", "--align", f"{c}.align", "--features", d / "f.txt",
               "--tree", d / "t.txt", "--lm", d / "lm.arpa", "--combine", "integrated",
               "--out-posteriors", d / "post.txt", "--out", d / "hyp.lab") == 0
    assert run(*g, "evaluate", "--align", f"{c}.align", "--ref", f"{c}.lab",
               "--hyp", d / "hyp.lab", "--out", d / "report.txt") == 0
    return ["c.align", "c.f0", "c.lab", "m.txt", "k.txt", "f.txt", "ps.txt", "sel.txt",
            "sel_tree.txt", "t.txt", "lm.arpa", "post.txt", "hyp.lab", "report.txt"]


def test_full_pipeline_beats_chance(tmp_path, capsys):
    pipeline(tmp_path)
    text = (tmp_path / "report.txt").read_text()
    rel = float(re.search(r"relative_error=(\S+)", text).group(1))
    assert rel < 1.0


def test_combine_and_topic_commands(tmp_path):
    pipeline(tmp_path)
    c = tmp_path / "c"
    assert run("segment", "--align", f"{c}.align", "--lm", tmp_path / "lm.arpa",
               "--out-posteriors", tmp_path / "plm.txt", "--out", tmp_path / "a.lab") == 0
    assert run("segment", "--align", f"{c}.align", "--tree", tmp_path / "t.txt",
               "--features", tmp_path / "f.txt", "--out-posteriors", tmp_path / "pdt.txt",
               "--out", tmp_path / "b.lab") == 0
    assert run("combine", "--lm-posteriors", tmp_path / "plm.txt",
               "--tree-posteriors", tmp_path / "pdt.txt", "--align", f"{c}.align",
               "--tune-labels", f"{c}.lab", "--out", tmp_path / "pc.txt",
               "--out-labels", tmp_path / "pc.lab") == 0
    (tmp_path / "topic.ini").write_text("[topic]\nk = 2\nmin_words = 20\n")
    t = ["--task", "topic", "--config", tmp_path / "topic.ini"]
    assert run(*t, "train-topic", "--align", f"{c}.align", "--labels", f"{c}.lab",
               "--out", tmp_path / "tm.txt") == 0
    assert run(*t, "segment", "--align", f"{c}.align", "--topic-model", tmp_path / "tm.txt",
               "--out", tmp_path / "tt.lab", "--out-posteriors", tmp_path / "tt.txt") == 0
    assert run(*t, "evaluate", "--align", f"{c}.align", "--ref", f"{c}.lab",
               "--hyp", tmp_path / "tt.lab", "--out", tmp_path / "tdt.txt") == 0
    assert "tdt cost" in (tmp_path / "tdt.txt").read_text()


def test_topic_interpolation_rejected(tmp_path, capsys):
    c = tmp_path / "c"
    run("synth", "--set", "n_channels=1", "--set", "words_per_channel=50", "--out-prefix", c)
    rc = run("--task", "topic", "segment", "--align", f"{c}.align", "--topic-model", "x",
             "--combine", "interpolate", "--out", tmp_path / "o.lab")
    err = capsys.readouterr().err.strip()
    assert rc != 0
    assert len(err.splitlines()) == 1 and "interpolation" in err
    rc = run("segment", "--task", "topic", "--align", f"{c}.align", "--topic-model", "x",
             "--combine", "interpolate", "--out", tmp_path / "o.lab")
    assert rc != 0


def test_evaluate_label_mismatch_reports_line(tmp_path, capsys):
    c = tmp_path / "c"
    run("synth", "--set", "n_channels=1", "--set", "words_per_channel=20", "--out-prefix", c)
    lines = (tmp_path / "c.lab").read_text().splitlines()
    (tmp_path / "short.lab").write_text("\n".join(lines[:-2]) + "\n")
    rc = run("evaluate", "--align", f"{c}.align", "--ref", f"{c}.lab",
             "--hyp", tmp_path / "short.lab")
    err = capsys.readouterr().err.strip()
    assert rc != 0
    assert len(err.splitlines()) == 1
    assert re.search(r"short\.lab:18:.*mismatch", err)


def test_missing_file_and_bad_config(tmp_path, capsys):
    assert run("train-tree", "--features", tmp_path / "none.txt", "--out", tmp_path / "t") != 0
    (tmp_path / "bad.ini").write_text("[tree]\nleaves = 3\n")
    assert run("--config", tmp_path / "bad.ini", "train-tree", "--features", "x",
               "--out", tmp_path / "t") != 0
    errs = capsys.readouterr().err.strip().splitlines()
    assert len(errs) == 2 and all(e.startswith("prososeg ") for e in errs)


def test_missing_required_flag_exits_nonzero():
    with pytest.raises(SystemExit) as e:
        main(["train-tree"])
    assert e.value.code != 0


def test_threads_env_fallback_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("PROSOSEG_THREADS", "3")
    parser = build_parser()
    assert _config(parser.parse_args(["synth", "--out-prefix", "x"])).threads == 3
    assert _config(parser.parse_args(["--threads", "2", "synth", "--out-prefix", "x"])).threads == 2
    (tmp_path / "c.ini").write_text("[general]\nseed = 7\ntask = topic\n")
    args = parser.parse_args(["--config", str(tmp_path / "c.ini"), "synth", "--seed", "9",
                              "--out-prefix", "x"])
    cfg = _config(args)
    assert cfg.seed == 9 and cfg.task == "topic"
