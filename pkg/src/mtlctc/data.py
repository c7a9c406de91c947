"""Utterances, TSV manifests and model-ready datasets."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alphabet import Alphabet, OutOfAlphabetError
from .ctc import min_frames
from .features import FeatureConfig, FrameMatrix, Normalizer, featurize_audio, model_inputs, read_wav
from .fileformats import read_features, write_features

log = logging.getLogger(__name__)


class ManifestError(ValueError):
    pass


@dataclass
class Utterance:
    id: str
    features: FrameMatrix
    transcript: str
    labels: tuple
    task: str = ""


@dataclass
class PreparedSet:
    """Normalised, stacked and decimated inputs ready for the network."""

    alphabet: Alphabet
    items: list = field(default_factory=list)  # (id, x (T', D'), labels)
    skipped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)

    def __add__(self, other: "PreparedSet") -> "PreparedSet":
        if other.alphabet != self.alphabet:
            raise ValueError("cannot merge datasets with different alphabets")
        return PreparedSet(self.alphabet, self.items + other.items, self.skipped + other.skipped)


def make_utterance(uid, features: FrameMatrix, transcript: str, alphabet: Alphabet, task="") -> Utterance:
    try:
        labels = tuple(alphabet.encode(transcript))
    except OutOfAlphabetError as e:
        raise OutOfAlphabetError(e.symbol, f"utterance {uid!r}") from None
    return Utterance(uid, features, transcript, labels, task)


def load_dataset(manifest, alphabet: Alphabet, features: FeatureConfig | None = None,
                 task: str = "") -> list:
    """Parse ``id<TAB>audio-or-feature-path<TAB>transcript`` lines.

    Relative paths resolve against the manifest's directory.  ``.wav`` entries
    are featurised on the fly with ``features``.
    """
    manifest = Path(manifest)
    if not manifest.exists():
        raise FileNotFoundError(f"manifest not found: {manifest}")
    cfg = features or FeatureConfig()
    out = []
    seen = set()
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ManifestError(f"{manifest}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        uid, ref, text = fields
        if uid in seen:
            raise ManifestError(f"{manifest}:{lineno}: duplicate utterance id {uid!r}")
        seen.add(uid)
        path = Path(ref)
        if not path.is_absolute():
            path = manifest.parent / path
        if path.suffix.lower() == ".wav":
            frames = featurize_audio(read_wav(path), cfg)
        else:
            frames = read_features(path, frame_period=cfg.hop_s)
        out.append(make_utterance(uid, frames, text, alphabet, task))
    return out


def write_dataset(utterances, directory, name: str) -> Path:
    """Write feature files plus ``<name>.tsv``; returns the manifest path."""
    directory = Path(directory)
    (directory / name).mkdir(parents=True, exist_ok=True)
    lines = []
    for u in utterances:
        rel = Path(name) / f"{u.id}.feat"
        write_features(directory / rel, u.features)
        lines.append(f"{u.id}\t{rel.as_posix()}\t{u.transcript}\n")
    manifest = directory / f"{name}.tsv"
    manifest.write_text("".join(lines), encoding="utf-8")
    return manifest


def prepare(utterances, alphabet: Alphabet, cfg: FeatureConfig, normalizer: Normalizer | None = None,
            drop_infeasible: bool = True) -> PreparedSet:
    """Stack, decimate and normalise; CTC-infeasible utterances are skipped with a warning."""
    out = PreparedSet(alphabet)
    for u in utterances:
        x = model_inputs(u.features, cfg)
        if normalizer is not None:
            x = normalizer(x)
        if drop_infeasible and min_frames(u.labels) > x.T:
            log.warning("skipping %s: %d labels do not fit in %d frames", u.id, len(u.labels), x.T)
            out.skipped.append(u.id)
            continue
        out.items.append((u.id, np.ascontiguousarray(x.frames), np.asarray(u.labels, dtype=np.int64)))
    if out.skipped:
        log.warning("%d utterance(s) skipped as CTC-infeasible", len(out.skipped))
    return out


def fit_normalizer(utterance_sets, cfg: FeatureConfig) -> Normalizer:
    mats = [model_inputs(u.features, cfg) for us in utterance_sets for u in us]
    return Normalizer.fit(mats)


def from_synthetic(synth_utts, alphabet: Alphabet) -> list:
    return [make_utterance(u.id, u.features, u.transcript, alphabet, u.task) for u in synth_utts]
