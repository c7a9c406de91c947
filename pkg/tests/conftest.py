import numpy as np
import pytest

from mtlctc.alphabet import Alphabet
from mtlctc.ctc import log_softmax


def random_log_matrix(rng, T, S, scale=1.0):
    """Random normalised log-probability matrix (T, S)."""
    return log_softmax(rng.normal(0.0, scale, size=(T, S)))


def random_target(rng, S, L, blank=0):
    return np.asarray(rng.integers(1, S, size=L), dtype=np.int64) if S > 1 else np.zeros(0, np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def abc():
    return Alphabet.from_letters("abc")


TINY_SIZES = {"lang-A": (12, 4, 6), "lang-B": (12, 4, 0), "accented-A": (6, 4, 6)}


@pytest.fixture(scope="session")
def tiny():
    """Prepared lang-A / lang-B / accented sets from a small seeded corpus."""
    from mtlctc.corpus import CorpusSpec, generate_synthetic_corpus
    from mtlctc.data import fit_normalizer, from_synthetic, prepare
    from mtlctc.features import FeatureConfig

    corpus = generate_synthetic_corpus(CorpusSpec(n_letters_a=4, n_letters_b=4, lexicon_size=8,
                                                  sizes=dict(TINY_SIZES)), 0)
    cfg = FeatureConfig()
    A, B = corpus.alphabets["lang-A"], corpus.alphabets["lang-B"]
    utt = {(lang, s): from_synthetic(corpus.get(lang, s), B if lang == "lang-B" else A)
           for lang, s in corpus.splits}
    norm = fit_normalizer([utt[("lang-A", "train")]], cfg)
    sets = {key: prepare(u, B if key[0] == "lang-B" else A, cfg, norm) for key, u in utt.items() if u}
    return {"A": A, "B": B, "sets": sets, "norm": norm, "features": cfg}


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
