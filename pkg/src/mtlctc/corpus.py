"""Seeded synthetic bilingual corpus with a controllable accent.

Two "languages" share one character inventory (the analog of transliterating
both scripts into a common alphabet).  Each language renders every letter
with its own Gaussian prototype in filterbank space; the second language's
prototype for a letter is correlated with the first's (``similarity``),
standing in for related phones across L1 and L2.  Silence (space) and noise
are language-independent.

The accented set reuses lang-A words but renders each letter token with the
lang-B prototype with probability ``overlap``, so ``overlap=0`` is plain
lang-A speech and ``overlap=1`` is lang-A text spoken entirely with lang-B
phones.
"""
from __future__ import annotations

import string
from dataclasses import asdict, dataclass, field

import numpy as np

from .alphabet import Alphabet
from .features import FrameMatrix

LANG_A = "lang-A"
LANG_B = "lang-B"
ACCENTED_A = "accented-A"


class CorpusSpecError(ValueError):
    pass


@dataclass
class CorpusSpec:
    n_letters_a: int = 8
    n_letters_b: int = 8
    feature_dim: int = 26
    overlap: float = 0.5
    similarity: float = 0.7
    noise_std: float = 0.6
    proto_scale: float = 1.0
    speaker_std: float = 0.2
    min_frames: int = 6
    max_frames: int = 9
    lexicon_size: int = 24
    min_word_len: int = 2
    max_word_len: int = 4
    min_words: int = 2
    max_words: int = 3
    noise_token_prob: float = 0.05
    sizes: dict = field(default_factory=lambda: {
        "lang-A": (120, 30, 40),
        "lang-B": (120, 30, 40),
        "accented-A": (30, 30, 100),
    })

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise CorpusSpecError(f"overlap fraction must lie in [0, 1], got {self.overlap}")
        if not 0.0 <= self.similarity <= 1.0:
            raise CorpusSpecError(f"similarity must lie in [0, 1], got {self.similarity}")
        if not 1 <= self.n_letters_a <= 26 or not 1 <= self.n_letters_b <= 26:
            raise CorpusSpecError("letter counts must lie in [1, 26]")
        if self.min_frames < 1 or self.max_frames < self.min_frames:
            raise CorpusSpecError("need 1 <= min_frames <= max_frames")
        self.sizes = {k: tuple(int(n) for n in v) for k, v in self.sizes.items()}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = {k: list(v) for k, v in self.sizes.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        d = dict(d)
        if "sizes" in d:
            d["sizes"] = {k: tuple(v) for k, v in d["sizes"].items()}
        return cls(**d)

    def letters(self, lang: str) -> str:
        n = self.n_letters_b if lang == LANG_B else self.n_letters_a
        return string.ascii_lowercase[:n]


@dataclass
class SyntheticUtterance:
    id: str
    features: FrameMatrix
    transcript: str
    task: str


@dataclass
class SyntheticCorpus:
    spec: CorpusSpec
    seed: int
    alphabets: dict
    splits: dict  # (language, split) -> list[SyntheticUtterance]
    prototypes: dict = field(default_factory=dict)  # language -> token -> mean vector

    def get(self, lang: str, split: str) -> list:
        return self.splits[(lang, split)]

    @property
    def common_alphabet(self) -> Alphabet:
        letters = sorted(set(self.spec.letters(LANG_A)) | set(self.spec.letters(LANG_B)))
        return Alphabet.from_letters(letters)


def _lexicon(rng, letters, spec: CorpusSpec) -> list:
    words = set()
    while len(words) < spec.lexicon_size:
        n = int(rng.integers(spec.min_word_len, spec.max_word_len + 1))
        words.add("".join(rng.choice(list(letters), size=n)))
    return sorted(words)


def _sentence(rng, lexicon, spec: CorpusSpec, marker: str) -> str:
    n = int(rng.integers(spec.min_words, spec.max_words + 1))
    words = [lexicon[int(rng.integers(len(lexicon)))] for _ in range(n)]
    if rng.random() < spec.noise_token_prob:
        words.insert(int(rng.integers(n + 1)), marker)
    return " ".join(words)


def _render(rng, text, protos_native, protos_foreign, overlap, spec, marker):
    """Frames for ``text``; letter tokens use the foreign prototype with prob ``overlap``."""
    speaker = rng.normal(0.0, spec.speaker_std, size=spec.feature_dim)
    segments = []
    tokens = []
    i = 0
    while i < len(text):
        if text.startswith(marker, i):
            tokens.append(marker)
            i += len(marker)
        else:
            tokens.append(text[i])
            i += 1
    for tok in [" "] + tokens + [" "]:
        n = int(rng.integers(spec.min_frames, spec.max_frames + 1))
        if tok in protos_foreign and rng.random() < overlap:
            proto = protos_foreign[tok]
        else:
            proto = protos_native[tok]
        segments.append(proto + speaker + rng.normal(0.0, spec.noise_std, size=(n, spec.feature_dim)))
    return FrameMatrix(np.concatenate(segments, axis=0))


def generate_synthetic_corpus(spec: CorpusSpec | None = None, seed: int = 0) -> SyntheticCorpus:
    """Train/dev/test triples for lang-A and lang-B plus accented-A sets; deterministic per seed."""
    spec = spec or CorpusSpec()
    marker = "~"
    D = spec.feature_dim
    root = np.random.default_rng([seed, 7001])
    letters_a, letters_b = spec.letters(LANG_A), spec.letters(LANG_B)
    silence = root.normal(0.0, spec.proto_scale, size=D) * 0.3
    noise = root.normal(0.0, spec.proto_scale, size=D)
    protos_a = {ch: root.normal(0.0, spec.proto_scale, size=D) for ch in letters_a}
    protos_b = {}
    r, s = np.sqrt(spec.similarity), np.sqrt(1.0 - spec.similarity)
    for ch in letters_b:
        fresh = root.normal(0.0, spec.proto_scale, size=D)
        protos_b[ch] = r * protos_a[ch] + s * fresh if ch in protos_a else fresh
    for p in (protos_a, protos_b):
        p[" "] = silence
        p[marker] = noise
    lex_a = _lexicon(root, letters_a, spec)
    lex_b = _lexicon(root, letters_b, spec)
    alphabets = {LANG_A: Alphabet.from_letters(letters_a, noise_marker=marker),
                 LANG_B: Alphabet.from_letters(letters_b, noise_marker=marker)}
    alphabets[ACCENTED_A] = alphabets[LANG_A]

    plan = {LANG_A: (lex_a, protos_a, {}, 0.0),
            LANG_B: (lex_b, protos_b, {}, 0.0),
            ACCENTED_A: (lex_a, protos_a, {k: v for k, v in protos_b.items()
                                            if k in letters_b}, spec.overlap)}
    splits = {}
    for li, lang in enumerate((LANG_A, LANG_B, ACCENTED_A)):
        lex, native, foreign, overlap = plan[lang]
        for si, split in enumerate(("train", "dev", "test")):
            count = spec.sizes.get(lang, (0, 0, 0))[si]
            rng = np.random.default_rng([seed, 7002, li, si])
            utts = []
            for k in range(count):
                text = _sentence(rng, lex, spec, marker)
                feats = _render(rng, text, native, foreign, overlap, spec, marker)
                utts.append(SyntheticUtterance(f"{lang}-{split}-{k:04d}", feats, text, lang))
            splits[(lang, split)] = utts
    return SyntheticCorpus(spec, seed, alphabets, splits, {LANG_A: protos_a, LANG_B: protos_b})
