"""Command-line entry point: ``prososeg <command> [options]``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .combine import (CombinerConfig, check_mode, integrated_posteriors,
                      interpolate, read_posteriors, tune_lambda, write_posteriors)
from .corpus_io import load_corpus, parse_alignment, parse_f0, task_targets
from .evaluation import (ScoreReport, TdtCounts, align_and_score, boundary_error,
                         format_tdt_report, tdt_counts)
from .features import (FEATURE_NAMES, compute_phone_stats, extract_features, read_feature_file,
                       read_phone_stats, write_feature_file, write_phone_stats)
from .ngram import read_arpa, write_arpa
from .pipeline import (PipelineConfig, build_dataset, channel_streams, decode_topics,
                       load_config, lm_posteriors, train_boundary_tree, train_lm, train_topic,
                       tree_only, tree_posteriors, tree_priors, tune_topic)
from .pitch_model import (channel_pitch_from_models, fit_pitch_models, read_contours,
                          read_speaker_models, write_contours, write_speaker_models)
from .selection import format_report, select_features
from .synth import SynthSpec, generate, read_spec
from .topic import read_topic_model, write_topic_decisions, write_topic_model
from .tree import read_tree, write_tree

THREADS_ENV = "PROSOSEG_THREADS"


class CliError(Exception):
    pass


def _names(raw: str | None) -> list[str] | None:
    if raw is None:
        return None
    return [n for n in raw.replace(",", " ").split() if n]


def _config(args) -> PipelineConfig:
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        threads = int(os.environ[THREADS_ENV])
    cfg = load_config(args.config, task=args.task, seed=args.seed, threads=threads)
    return cfg


# -- commands -----------------------------------------------------------------------

def cmd_fit_pitch(args, cfg: PipelineConfig) -> None:
    utts = parse_alignment(args.align)
    tracks = parse_f0(args.f0)
    models, pitch = fit_pitch_models(utts, tracks, cfg.pitch)
    write_speaker_models(models, args.out_models)
    write_contours([pitch[ch].contour for ch in sorted(pitch)], args.out_contours)


def cmd_extract(args, cfg: PipelineConfig) -> None:
    corpus = load_corpus(args.align, args.f0, args.labels)
    models = read_speaker_models(args.models)
    contours = read_contours(args.contours)
    stats = read_phone_stats(args.phone_stats) if args.phone_stats else \
        compute_phone_stats(corpus.utterances)
    pitch = {}
    for ch, ws in channel_streams(corpus).items():
        if ch in corpus.tracks and ch in contours:
            pitch[ch] = channel_pitch_from_models(corpus.tracks[ch], ws, models, contours[ch])
    cands = extract_features(corpus.utterances, pitch, models, stats, corpus.labels, cfg.extract)
    write_feature_file(cands, args.out)
    if args.out_phone_stats:
        write_phone_stats(stats, args.out_phone_stats)


def cmd_train_tree(args, cfg: PipelineConfig) -> None:
    cands = read_feature_file(args.features)
    feats = _names(args.use) or list(cfg.features)
    if args.no_downsample:
        cfg.downsample = False
    data = build_dataset(cands, cfg.task, [f for f in FEATURE_NAMES if f in feats])
    write_tree(train_boundary_tree(data, cfg), args.out)


def cmd_select_features(args, cfg: PipelineConfig) -> None:
    cands = read_feature_file(args.features)
    feats = _names(args.candidates) or list(cfg.features)
    if args.core is not None:
        cfg.selection.core_features = tuple(_names(args.core))
    if args.beam is not None:
        cfg.selection.beam_width = args.beam
    data = build_dataset(cands, cfg.task, [f for f in FEATURE_NAMES if f in feats])
    res = select_features(data, feats, cfg.selection)
    Path(args.out_report).write_text(format_report(res), encoding="utf-8")
    if args.out_tree and res.tree is not None:
        res.tree.data_prior = np.bincount(data.y, minlength=2) / len(data)
        write_tree(res.tree, args.out_tree)


def cmd_train_lm(args, cfg: PipelineConfig) -> None:
    corpus = load_corpus(args.align, None, args.labels)
    if args.order is not None:
        cfg.ngram.order = args.order
    write_arpa(train_lm(corpus, cfg), args.out)


def cmd_train_topic(args, cfg: PipelineConfig) -> None:
    corpus = load_corpus(args.align, None, args.labels)
    model = train_topic(corpus, cfg)
    if args.tune_align:
        if not args.tune_labels:
            raise CliError("--tune-align needs --tune-labels")
        dev = load_corpus(args.tune_align, None, args.tune_labels)
        model.penalty, _ = tune_topic(model, dev, cfg, dev.channels)
    write_topic_model(model, args.out)


def _label_file(flags_by_ch: "dict[str, Sequence[int]]", token: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ch, flags in flags_by_ch.items():
            for i, f in enumerate(flags):
                fh.write(f"{ch} {i} {token if f else 'none'}\n")


def cmd_segment(args, cfg: PipelineConfig) -> None:
    mode = args.combine
    if mode != "none":
        check_mode(cfg.task, mode)
    corpus = load_corpus(args.align)
    streams = channel_streams(corpus)
    tree = read_tree(args.tree) if args.tree else None
    p_dt = None
    if tree is not None:
        if not args.features:
            raise CliError("--tree needs --features")
        p_dt = tree_posteriors(tree, read_feature_file(args.features))
        missing = [ch for ch in streams if ch not in p_dt]
        if missing:
            raise CliError(f"feature file lacks channel {missing[0]}")
    th = cfg.combine.threshold
    lam = cfg.combine.lam if args.lam is None else args.lam
    mcw = cfg.combine.mcw if args.mcw is None else args.mcw
    CombinerConfig(lam, mcw, th, "integrated" if mode == "none" else mode)

    if cfg.task == "topic":
        if not args.topic_model:
            raise CliError("topic segmentation needs --topic-model")
        model = read_topic_model(args.topic_model)
        use_tree = tree if mode == "integrated" else None
        flags = decode_topics(model, corpus, None, use_tree, p_dt, mcw if use_tree else 0.0)
        _label_file(flags, "topic", args.out)
        if args.out_posteriors:
            write_topic_decisions(flags, args.out_posteriors)
        return

    lm = read_arpa(args.lm) if args.lm else None
    if lm is None and tree is None:
        raise CliError("sentence segmentation needs --lm, --tree, or both")
    if mode != "none" and (lm is None or tree is None):
        raise CliError(f"--combine {mode} needs both --lm and --tree")
    post = {}
    for ch, ws in streams.items():
        words = [w.word for w in ws]
        if mode == "integrated":
            post[ch] = integrated_posteriors(lm, words, p_dt[ch], tree_priors(tree), mcw)
        elif mode == "interpolate":
            post[ch] = interpolate(lm_posteriors(lm, corpus, [ch])[ch],
                                   tree_only(tree, p_dt[ch]), lam)
        elif lm is not None:
            post[ch] = lm_posteriors(lm, corpus, [ch])[ch]
        else:
            post[ch] = tree_only(tree, p_dt[ch])
    if args.out_posteriors:
        write_posteriors(post, args.out_posteriors)
    flags = {ch: list((np.asarray(p) > th).astype(int)) + [1] for ch, p in post.items()}
    _label_file(flags, "sent", args.out)


def cmd_combine(args, cfg: PipelineConfig) -> None:
    check_mode(cfg.task, "interpolate")
    a = read_posteriors(args.lm_posteriors)
    b = read_posteriors(args.tree_posteriors)
    if sorted(a) != sorted(b):
        raise CliError("posterior files cover different channels")
    for ch in a:
        if len(a[ch]) != len(b[ch]):
            raise CliError(f"posterior streams differ in length for channel {ch}")
    lam = cfg.combine.lam if args.lam is None else args.lam
    if args.tune_labels:
        if not args.align:
            raise CliError("--tune-labels needs --align")
        ref_corpus = load_corpus(args.align, None, args.tune_labels)
        chans = sorted(a)
        ref = np.concatenate([task_targets(ref_corpus.labels[ch], "sentence")[:-1]
                              for ch in chans])
        lam, _ = tune_lambda(np.concatenate([a[ch] for ch in chans]),
                             np.concatenate([b[ch] for ch in chans]), ref, args.metric,
                             threshold=cfg.combine.threshold)
    out = {ch: interpolate(a[ch], b[ch], lam) for ch in a}
    write_posteriors(out, args.out)
    if args.out_labels:
        flags = {ch: list((p > cfg.combine.threshold).astype(int)) + [1] for ch, p in out.items()}
        _label_file(flags, "sent", args.out_labels)
    print(f"lambda={lam!r}")


def cmd_evaluate(args, cfg: PipelineConfig) -> None:
    ref_corpus = load_corpus(args.align, None, args.ref)
    hyp_align = args.hyp_align or args.align
    hyp_corpus = load_corpus(hyp_align, None, args.hyp)
    if cfg.task == "topic":
        total = TdtCounts()
        for ch in ref_corpus.channels:
            if ch not in hyp_corpus.labels:
                raise CliError(f"hypothesis lacks channel {ch}")
            total = total.add(tdt_counts(task_targets(ref_corpus.labels[ch], "topic"),
                                         task_targets(hyp_corpus.labels[ch], "topic"), cfg.tdt))
        text = format_tdt_report(total, cfg.tdt)
    else:
        ref_s = channel_streams(ref_corpus)
        hyp_s = channel_streams(hyp_corpus)
        agg = ScoreReport(0.0, 0, 0, 0, 0, 0, 0.0)
        n_bound = 0
        for ch, rws in ref_s.items():
            if ch not in hyp_s:
                raise CliError(f"hypothesis lacks channel {ch}")
            r = list(task_targets(ref_corpus.labels[ch], "sentence")[:-1])
            h = list(task_targets(hyp_corpus.labels[ch], "sentence")[:-1])
            if args.hyp_align:
                rep = align_and_score([w.word for w in rws][:-1], r,
                                      [w.word for w in hyp_s[ch]][:-1], h)
            else:
                rep = boundary_error(r, h)
            agg.n_ref += rep.n_ref
            agg.correct += rep.correct
            agg.substituted += rep.substituted
            agg.inserted += rep.inserted
            agg.deleted += rep.deleted
            n_bound += int(sum(r))
        n = max(agg.n_ref, 1)
        agg.error = (agg.substituted + agg.inserted + agg.deleted) / n
        agg.chance = n_bound / n
        agg.lower_bound = (agg.inserted + agg.deleted) / n
        text = agg.format("sentence boundary error")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_synth(args, cfg: PipelineConfig) -> None:
    spec = read_spec(args.spec) if args.spec else SynthSpec()
    for item in args.set or []:
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or not hasattr(spec, key):
            raise CliError(f"bad --set item {item!r}")
        cur = getattr(spec, key)
        setattr(spec, key, type(cur)(float(val)) if isinstance(cur, int) else float(val))
    if args.seed is not None:
        spec.seed = args.seed
    spec.validate()
    generate(spec, args.out_prefix)


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def shared(default):
        # Subcommands repeat the global flags without clobbering values given earlier.
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", default=default,
                       help="INI config file; flags override its values")
        g.add_argument("--task", choices=("sentence", "topic"), default=default)
        g.add_argument("--seed", type=int, default=default)
        g.add_argument("--threads", type=int, default=default,
                       help=f"worker threads (fallback: ${THREADS_ENV})")
        return g

    common = shared(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="prososeg", parents=[shared(None)],
                                description="Prosody-based sentence and topic segmentation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("fit-pitch", cmd_fit_pitch, "fit speaker F0 models and stylize contours")
    sp.add_argument("--align", required=True)
    sp.add_argument("--f0", required=True)
    sp.add_argument("--out-models", required=True)
    sp.add_argument("--out-contours", required=True)

    sp = add("extract", cmd_extract, "compute per-boundary prosodic features")
    sp.add_argument("--align", required=True)
    sp.add_argument("--f0", required=True)
    sp.add_argument("--models", required=True)
    sp.add_argument("--contours", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--phone-stats", help="use these phone statistics instead of recomputing")
    sp.add_argument("--out-phone-stats")
    sp.add_argument("--out", required=True)

    sp = add("train-tree", cmd_train_tree, "train and prune a boundary decision tree")
    sp.add_argument("--features", required=True)
    sp.add_argument("--use", help="comma-separated feature subset")
    sp.add_argument("--no-downsample", action="store_true")
    sp.add_argument("--out", required=True)

    sp = add("select-features", cmd_select_features, "two-phase feature subset selection")
    sp.add_argument("--features", required=True)
    sp.add_argument("--candidates", help="comma-separated candidate features")
    sp.add_argument("--core", help="comma-separated core features")
    sp.add_argument("--beam", type=int)
    sp.add_argument("--out-report", required=True)
    sp.add_argument("--out-tree")

    sp = add("train-lm", cmd_train_lm, "train the hidden-event N-gram model")
    sp.add_argument("--align", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--order", type=int)
    sp.add_argument("--out", required=True)

    sp = add("train-topic", cmd_train_topic, "train topic cluster models")
    sp.add_argument("--align", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--tune-align")
    sp.add_argument("--tune-labels")
    sp.add_argument("--out", required=True)

    sp = add("segment", cmd_segment, "decode boundaries for a corpus")
    sp.add_argument("--align", required=True)
    sp.add_argument("--features")
    sp.add_argument("--tree")
    sp.add_argument("--lm")
    sp.add_argument("--topic-model")
    sp.add_argument("--combine", choices=("none", "interpolate", "integrated"), default="none")
    sp.add_argument("--lam", type=float)
    sp.add_argument("--mcw", type=float)
    sp.add_argument("--out-posteriors")
    sp.add_argument("--out", required=True)

    sp = add("combine", cmd_combine, "interpolate two posterior streams")
    sp.add_argument("--lm-posteriors", required=True)
    sp.add_argument("--tree-posteriors", required=True)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--align")
    sp.add_argument("--tune-labels")
    sp.add_argument("--metric", choices=("error", "entropy"), default="error")
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-labels")

    sp = add("evaluate", cmd_evaluate, "score a hypothesis label file")
    sp.add_argument("--align", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--hyp-align", help="alignment of hypothesis words, if they differ")
    sp.add_argument("--out")

    sp = add("synth", cmd_synth, "generate a synthetic corpus")
    sp.add_argument("--spec")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.add_argument("--out-prefix", required=True)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except (OSError, ValueError, KeyError, CliError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"prososeg {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
