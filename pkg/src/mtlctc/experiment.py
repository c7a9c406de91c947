"""Config-driven training and the baseline / pre-training / multitask / adaptation grid."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .alphabet import Alphabet
from .checkpoint import Checkpoint
from .config import ExperimentConfig
from .corpus import ACCENTED_A, LANG_A, LANG_B, generate_synthetic_corpus
from .data import fit_normalizer, from_synthetic, load_dataset, prepare
from .model import (L1_ONLY, L1_PLUS_L2, TASK1, TASK2, MtlConfig, attach_new_head, build_multitask,
                    build_single_task, truncate_for_pretraining)
from .training import TrainingError, adapt, evaluate_cer, fit

log = logging.getLogger(__name__)

RESULT_FIELDS = ("seed", "system", "task2_size", "task2_mode", "lambda", "cer_native",
                 "cer_accented", "best_epoch", "best_val_loss", "epochs_run")


def _train_cfg(config: ExperimentConfig, seed: int):
    t = config.train
    return type(t)(lr=t.lr, batch_size=t.batch_size, max_epochs=t.max_epochs, patience=t.patience,
                   seed=seed, max_norm=t.max_norm, beam_width=t.beam_width)


def _paths(entry, root: Path) -> list:
    if entry is None:
        return []
    entries = entry if isinstance(entry, list) else [entry]
    return [p if Path(p).is_absolute() else root / p for p in entries]


def _load_task(config: ExperimentConfig, task: str, root: Path):
    spec = config.data.get(task)
    if not spec:
        raise TrainingError(f"config has no data.{task} section")
    if "alphabet" in spec:
        alphabet = Alphabet.load(_paths(spec["alphabet"], root)[0])
    else:
        alphabet = Alphabet.english()
    train = [u for p in _paths(spec.get("train"), root) for u in load_dataset(p, alphabet, config.features, task)]
    dev = [u for p in _paths(spec.get("dev"), root) for u in load_dataset(p, alphabet, config.features, task)]
    return alphabet, train, dev


def train(config: ExperimentConfig, root=".") -> Checkpoint:
    """Train the configured topology on manifest data; returns the best-validation checkpoint."""
    root = Path(root)
    seed = config.seeds[0]
    tcfg = _train_cfg(config, seed)
    a1, train1, dev1 = _load_task(config, TASK1, root)
    dims = config.model
    lam = config.mtl.lam
    uses_task2 = config.topology == "pretrain" or (config.topology == "mtl" and lam > 0)
    if uses_task2 or config.topology == "mtl":
        a2, train2, dev2 = _load_task(config, TASK2, root)
    norm = fit_normalizer([train1] + ([train2] if uses_task2 else []), config.features)
    p1 = prepare(train1, a1, config.features, norm)
    d1 = prepare(dev1, a1, config.features, norm) if dev1 else None
    if config.topology == "single":
        model = build_single_task(dims, a1, seed)
        result = fit(model, p1, tcfg, dev=d1)
    elif config.topology == "pretrain":
        stage1 = build_single_task(dims, a2, seed)
        fit(stage1, prepare(train2, a2, config.features, norm), tcfg,
            dev=prepare(dev2, a2, config.features, norm) if dev2 else None)
        model = attach_new_head(truncate_for_pretraining(stage1), a1, seed, dims.init_std)
        result = fit(model, p1, tcfg, dev=d1)
    else:
        model = build_multitask(dims, {TASK1: a1, TASK2: a2}, config.mtl, seed)
        p2 = prepare(train2, a2, config.features, norm) if uses_task2 else None
        result = fit(model, p1, tcfg, dev=d1, train2=p2, lam=lam)
    meta = result.metadata()
    meta.update({"topology": config.topology, "seed": seed, "lambda": lam})
    return Checkpoint(result.model, config.features, norm, result.adam, meta)


def _system_parts(name: str):
    """'mtl-l1l2-small' -> ('l1l2', 'small')."""
    _, mode, size = name.split("-")
    return mode, size


def _run_seed(config: ExperimentConfig, seed: int) -> list:
    corpus = generate_synthetic_corpus(config.corpus, seed)
    feats, dims = config.features, config.model
    tcfg = _train_cfg(config, seed)
    A, B = corpus.alphabets[LANG_A], corpus.alphabets[LANG_B]
    common = corpus.common_alphabet

    def utts(lang, split, alphabet):
        return from_synthetic(corpus.get(lang, split), alphabet)

    trA, dvA, teA = utts(LANG_A, "train", A), utts(LANG_A, "dev", A), utts(LANG_A, "test", A)
    trB, dvB = utts(LANG_B, "train", B), utts(LANG_B, "dev", B)
    acc_tr, acc_dv, acc_te = (utts(ACCENTED_A, s, A) for s in ("train", "dev", "test"))

    trained = {}

    def evaluate(name, model, norm, result, extra):
        row = {
            "seed": seed, "system": name,
            "task2_size": extra.get("task2_size"), "task2_mode": extra.get("task2_mode"),
            "lambda": extra.get("lambda"),
            "cer_native": evaluate_cer(model, prepare(teA, A, feats, norm, False), tcfg.beam_width).cer,
            "cer_accented": evaluate_cer(model, prepare(acc_te, A, feats, norm, False), tcfg.beam_width).cer,
            "best_epoch": result.best_epoch if result else None,
            "best_val_loss": result.best_val_loss if result else None,
            "epochs_run": result.epochs_run if result else None,
        }
        log.info("seed %d %-24s native %.4f accented %.4f", seed, name, row["cer_native"], row["cer_accented"])
        return row

    def build(name):
        if name in trained:
            return trained[name]
        if name == "single":
            norm = fit_normalizer([trA], feats)
            model = build_single_task(dims, A, seed)
            result = fit(model, prepare(trA, A, feats, norm), tcfg, dev=prepare(dvA, A, feats, norm))
            extra = {}
        elif name == "pretrain":
            norm = fit_normalizer([trA, trB], feats)
            stage1 = build_single_task(dims, B, seed)
            fit(stage1, prepare(trB, B, feats, norm), tcfg, dev=prepare(dvB, B, feats, norm))
            model = attach_new_head(truncate_for_pretraining(stage1), A, seed, dims.init_std)
            result = fit(model, prepare(trA, A, feats, norm), tcfg, dev=prepare(dvA, A, feats, norm))
            extra = {}
        elif name.startswith("mtl-"):
            mode, size = _system_parts(name)
            lam = config.mtl.lam
            mcfg = MtlConfig(lam, size, mode)
            norm = fit_normalizer([trA, trB] if lam > 0 else [trA], feats)
            if mode == L1_ONLY:
                a2 = B
                task2 = prepare(trB, B, feats, norm)
            else:
                a2 = common
                task2 = prepare(utts(LANG_A, "train", common) + utts(LANG_B, "train", common),
                                common, feats, norm)
            model = build_multitask(dims, {TASK1: A, TASK2: a2}, mcfg, seed)
            result = fit(model, prepare(trA, A, feats, norm), tcfg, dev=prepare(dvA, A, feats, norm),
                         train2=task2, lam=lam)
            extra = {"task2_size": size, "task2_mode": mode, "lambda": lam}
        elif name.startswith("adapted-"):
            base_name = name[len("adapted-"):]
            base_model, norm, _, extra = build(base_name)
            model = adapt(base_model, prepare(acc_tr, A, feats, norm), config.adapt_epochs, tcfg,
                          dev=prepare(acc_dv, A, feats, norm))
            result = None
        else:
            raise ValueError(f"unknown system {name!r}")
        trained[name] = (model, norm, result, extra)
        return trained[name]

    rows = []
    for name in config.systems:
        model, norm, result, extra = build(name)
        rows.append(evaluate(name, model, norm, result, extra))
    return rows


def run_experiment_grid(config: ExperimentConfig, out_dir=None) -> list:
    """Train and evaluate every configured system for every seed.

    With ``out_dir`` the rows go to ``results.jsonl`` (one JSON object per
    line, fixed field order) and a rendered ``table.txt``.
    """
    rows = []
    for seed in config.seeds:
        rows.extend(_run_seed(config, seed))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results(rows, out / "results.jsonl")
        (out / "table.txt").write_text(render_table(rows), encoding="utf-8")
    return rows


def write_results(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps({k: row[k] for k in RESULT_FIELDS}) + "\n")


def read_results(path) -> list:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line]


_LABELS = {
    "single": ("Single Task", "None"),
    "pretrain": ("Pre-training", "None"),
    "mtl-l1-large": ("MTL, Task2: L1", "Large"),
    "mtl-l1-small": ("MTL, Task2: L1", "Small"),
    "mtl-l1l2-large": ("MTL, Task2: L1,L2", "Large"),
    "mtl-l1l2-small": ("MTL, Task2: L1,L2", "Small"),
    "adapted-single": ("Adapted Single Task", "None"),
    "adapted-mtl-l1l2-small": ("Adapted MTL, Task2: L1,L2", "Small"),
}


def summarize(rows) -> dict:
    """Per-system mean CERs and seed-wise comparisons against the baselines."""
    by = {}
    for r in rows:
        by.setdefault(r["system"], {})[r["seed"]] = r
    out = {}
    for name, seeds in by.items():
        out[name] = {
            "n": len(seeds),
            "cer_native": float(np.mean([r["cer_native"] for r in seeds.values()])),
            "cer_accented": float(np.mean([r["cer_accented"] for r in seeds.values()])),
        }
        ref = "adapted-single" if name.startswith("adapted-") else "single"
        if ref in by and name != ref:
            common = sorted(set(seeds) & set(by[ref]))
            out[name]["wins_vs_" + ref] = sum(
                seeds[s]["cer_accented"] <= by[ref][s]["cer_accented"] for s in common)
    return out


def render_table(rows) -> str:
    summary = summarize(rows)
    seeds = sorted({r["seed"] for r in rows})
    lines = [f"CER (%) on synthetic native and accented test sets, mean over {len(seeds)} seed(s)", ""]
    header = f"{'Model':<28}{'Task2 Size':<12}{'Native':>8}{'Accented':>10}"
    rule = "-" * len(header)
    sections = [[n for n in ("single", "pretrain", "mtl-l1-large", "mtl-l1-small",
                             "mtl-l1l2-large", "mtl-l1l2-small") if n in summary],
                [n for n in ("adapted-single", "adapted-mtl-l1l2-small") if n in summary]]
    lines += [header, rule]
    for names in sections:
        if not names:
            continue
        for n in names:
            model, size = _LABELS[n]
            s = summary[n]
            lines.append(f"{model:<28}{size:<12}{100 * s['cer_native']:>8.1f}{100 * s['cer_accented']:>10.1f}")
        lines.append(rule)
    return "\n".join(lines) + "\n"
