"""Command line entry point: ``mtlctc <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .alphabet import Alphabet
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .corpus import LANG_A, LANG_B, generate_synthetic_corpus
from .data import from_synthetic, load_dataset, prepare, write_dataset
from .experiment import render_table, run_experiment_grid, train
from .features import FeatureConfig, featurize_audio, model_inputs, read_wav
from .fileformats import write_features
from .model import TASK1
from .training import TrainConfig, adapt, decode_set, evaluate_cer

def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment config (JSON)")
    p.add_argument("--desk", action="store_true", help="start from the desk-scale preset")
    p.add_argument("--topology", choices=["single", "mtl", "pretrain"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--task2-size", choices=["large", "small"])
    p.add_argument("--task2-mode", choices=["l1", "l1l2"])
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--beam-width", type=int)
    p.add_argument("--seed", type=int, action="append", help="repeatable")
    p.add_argument("--overlap", type=float, help="accent overlap fraction of the synthetic corpus")


def _config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        raw = json.loads(args.config.read_text(encoding="utf-8"))
    if args.desk:
        raw.setdefault("preset", "desk")
    train_over = {k: v for k, v in (("lr", args.lr), ("batch_size", args.batch_size),
                                    ("max_epochs", args.max_epochs), ("patience", args.patience),
                                    ("beam_width", args.beam_width)) if v is not None}
    mtl_over = {k: v for k, v in (("lambda", args.lam), ("task2_size", args.task2_size),
                                  ("task2_mode", args.task2_mode)) if v is not None}
    raw.setdefault("train", {}).update(train_over)
    raw.setdefault("mtl", {}).update(mtl_over)
    if args.topology:
        raw["topology"] = args.topology
    if args.seed:
        raw["seeds"] = args.seed
    if args.overlap is not None:
        raw.setdefault("corpus", {})["overlap"] = args.overlap
    return ExperimentConfig.from_dict(raw)


def cmd_featurize(args) -> int:
    cfg = FeatureConfig(n_filters=args.n_filters, context=args.context, decimation=args.decimation)
    frames = featurize_audio(read_wav(args.wav), cfg)
    if args.processed:
        frames = model_inputs(frames, cfg)
    write_features(args.out, frames)
    print(f"{args.out}\tT={frames.T}\tD={frames.dim}")
    return 0


def cmd_synth_corpus(args) -> int:
    cfg = _config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    corpus = generate_synthetic_corpus(cfg.corpus, cfg.seeds[0])
    corpus.alphabets[LANG_A].save(out / "lang-A.alphabet")
    corpus.alphabets[LANG_B].save(out / "lang-B.alphabet")
    corpus.common_alphabet.save(out / "common.alphabet")
    for (lang, split), utts in sorted(corpus.splits.items()):
        alphabet = corpus.alphabets[lang]
        path = write_dataset(from_synthetic(utts, alphabet), out, f"{lang}-{split}")
        print(f"{path}\t{len(utts)}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    root = args.config.parent if args.config else Path(".")
    ckpt = train(cfg, root)
    save_checkpoint(ckpt, args.out)
    print(json.dumps(ckpt.metadata, sort_keys=True))
    return 0


def _prepared(ckpt: Checkpoint, manifest, drop=False):
    alphabet = ckpt.model.alphabet(TASK1)
    utts = load_dataset(manifest, alphabet, ckpt.features)
    return prepare(utts, alphabet, ckpt.features, ckpt.normalizer, drop)


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    report = evaluate_cer(ckpt.model, _prepared(ckpt, args.manifest), args.beam_width)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            for uid, ref, hyp, e, n in report.rows:
                f.write(f"{uid}\t{e}\t{n}\t{ref}\t{hyp}\n")
    print(f"CER {report.cer:.6f}\t({report.edits}/{report.ref_chars})")
    return 0


def cmd_decode(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    data = _prepared(ckpt, args.manifest)
    alphabet: Alphabet = data.alphabet
    for uid, labels in decode_set(ckpt.model, data, args.beam_width, method=args.method):
        sys.stdout.write(f"{uid}\t{alphabet.decode(labels)}\n")
    return 0


def cmd_adapt(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    train_set = _prepared(ckpt, args.manifest, drop=True)
    dev = _prepared(ckpt, args.dev, drop=True) if args.dev else None
    tcfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    model = adapt(ckpt.model, train_set, args.epochs, tcfg, dev=dev)
    meta = dict(ckpt.metadata, adapted_epochs=args.epochs)
    save_checkpoint(Checkpoint(model, ckpt.features, ckpt.normalizer, None, meta), args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_grid(args) -> int:
    cfg = _config(args)
    if args.systems:
        cfg.systems = args.systems.split(",")
        cfg.__post_init__()
    rows = run_experiment_grid(cfg, args.out)
    sys.stdout.write(render_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtlctc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="WAV -> log Mel filterbank feature file")
    p.add_argument("wav", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--n-filters", type=int, default=26)
    p.add_argument("--context", type=int, default=4)
    p.add_argument("--decimation", type=int, default=3)
    p.add_argument("--processed", action="store_true", help="also stack and decimate")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("synth-corpus", help="write the seeded synthetic corpus")
    _add_overrides(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("train", help="train from manifests named in the config")
    _add_overrides(p)
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="pooled CER of a checkpoint on a manifest")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--beam-width", type=int, default=100)
    p.add_argument("--report", type=Path, help="per-utterance TSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("decode", help="print <id>\\t<text> per utterance")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--beam-width", type=int, default=100)
    p.add_argument("--method", choices=["beam", "best-path"], default="beam")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("adapt", help="continue training on accented data")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--dev", type=Path)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("grid", help="run the seeded experiment grid on synthetic corpora")
    _add_overrides(p)
    p.add_argument("--systems", help="comma-separated subset of systems")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_grid)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as e:
        print(f"mtlctc: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
