import logging

import numpy as np
import pytest

from mtlctc.alphabet import Alphabet, OutOfAlphabetError
from mtlctc.checkpoint import (VERSION, Checkpoint, CheckpointVersionError, CorruptCheckpointError,
                               load_checkpoint, save_checkpoint)
from mtlctc.data import ManifestError, fit_normalizer, load_dataset, make_utterance, prepare, write_dataset
from mtlctc.features import AudioBuffer, FeatureConfig, FrameMatrix, Normalizer, write_wav
from mtlctc.fileformats import FeatureFileError, read_features, write_features
from mtlctc.model import TASK1, TASK2, ModelDims, MtlConfig, build_multitask
from mtlctc.nn.adam import AdamState
from mtlctc.training import TrainingError


def test_feature_file_round_trip(tmp_path, rng):
    fm = FrameMatrix(rng.normal(size=(7, 5)))
    write_features(tmp_path / "x.feat", fm)
    raw = (tmp_path / "x.feat").read_bytes()
    assert raw[:8] == b"MTLFEAT\0"
    assert read_features(tmp_path / "x.feat").frames.tobytes() == fm.frames.tobytes()


def test_feature_file_errors(tmp_path, rng):
    write_features(tmp_path / "x.feat", FrameMatrix(rng.normal(size=(3, 2))))
    data = (tmp_path / "x.feat").read_bytes()
    (tmp_path / "t.feat").write_bytes(data[:-3])
    with pytest.raises(FeatureFileError):
        read_features(tmp_path / "t.feat")
    (tmp_path / "m.feat").write_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(FeatureFileError, match="magic"):
        read_features(tmp_path / "m.feat")


def test_manifest_parsing(tmp_path, rng):
    a = Alphabet.english()
    write_features(tmp_path / "u1.feat", FrameMatrix(rng.normal(size=(30, 26))))
    write_wav(tmp_path / "u2.wav", AudioBuffer(rng.uniform(-0.1, 0.1, 4000)))
    (tmp_path / "m.tsv").write_text("u1\tu1.feat\thi there\nu2\tu2.wav\tok\n", encoding="utf-8")
    utts = load_dataset(tmp_path / "m.tsv", a)
    assert [u.id for u in utts] == ["u1", "u2"]
    assert utts[0].labels == tuple(a.encode("hi there"))
    assert utts[1].features.frames.shape == (23, 26)


def test_manifest_errors(tmp_path):
    a = Alphabet.english()
    (tmp_path / "empty.tsv").write_text("", encoding="utf-8")
    assert load_dataset(tmp_path / "empty.tsv", a) == []
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "missing.tsv", a)
    write_features(tmp_path / "ok.feat", FrameMatrix(np.zeros((5, 26))))
    (tmp_path / "two.tsv").write_text("\n".join(["a\tok.feat\tc", "only\ttwo"]), encoding="utf-8")
    with pytest.raises(ManifestError, match=":2:"):
        load_dataset(tmp_path / "two.tsv", a)
    with pytest.raises(OutOfAlphabetError, match="'#'.*'u9'"):
        make_utterance("u9", FrameMatrix(np.zeros((5, 26))), "a#b", a)


def test_write_dataset_round_trip(tmp_path, rng):
    a = Alphabet.from_letters("ab")
    utts = [make_utterance(f"u{i}", FrameMatrix(rng.normal(size=(12, 26))), "ab ba", a) for i in range(3)]
    path = write_dataset(utts, tmp_path, "set")
    back = load_dataset(path, a)
    assert [u.labels for u in back] == [u.labels for u in utts]
    assert all(x.features.frames.tobytes() == y.features.frames.tobytes() for x, y in zip(back, utts))


def test_prepare_skips_infeasible(caplog, rng):
    a = Alphabet.from_letters("ab")
    cfg = FeatureConfig()
    ok = make_utterance("ok", FrameMatrix(rng.normal(size=(30, 26))), "ab", a)
    short = make_utterance("short", FrameMatrix(rng.normal(size=(3, 26))), "abab", a)
    with caplog.at_level(logging.WARNING):
        ds = prepare([ok, short], a, cfg)
    assert [i for i, _, _ in ds.items] == ["ok"] and ds.skipped == ["short"]
    assert "short" in caplog.text and "1 utterance(s) skipped" in caplog.text
    assert ds.items[0][1].shape == (10, 234)


def _ckpt():
    dims = ModelDims(input_dim=234, ff_units=4, lstm_cells=2)
    m = build_multitask(dims, {TASK1: Alphabet.from_letters("ab"), TASK2: Alphabet.from_letters("xyz")},
                        MtlConfig(0.3, "large", "l1"), seed=3)
    params = m.parameters()
    adam = AdamState.for_params(params)
    for v in adam.m.values():
        v += 0.25
    adam.t = 7
    norm = Normalizer(np.arange(234.0), np.full(234, 2.0))
    return Checkpoint(m, FeatureConfig(), norm, adam, {"best_epoch": 4, "best_val_loss": 1.5})


def test_checkpoint_round_trip_bit_exact(tmp_path):
    ck = _ckpt()
    save_checkpoint(ck, tmp_path / "c.ckpt")
    back = load_checkpoint(tmp_path / "c.ckpt")
    p0, p1 = ck.model.parameters(), back.model.parameters()
    assert p0.keys() == p1.keys()
    assert all(p0[k].tobytes() == p1[k].tobytes() for k in p0)
    assert back.model.describe() == ck.model.describe()
    assert back.adam.t == 7 and all(back.adam.m[k].tobytes() == ck.adam.m[k].tobytes() for k in ck.adam.m)
    assert back.normalizer.mean.tobytes() == ck.normalizer.mean.tobytes()
    assert back.metadata == ck.metadata
    save_checkpoint(back, tmp_path / "d.ckpt")
    assert (tmp_path / "c.ckpt").read_bytes() == (tmp_path / "d.ckpt").read_bytes()


def test_checkpoint_truncated(tmp_path):
    save_checkpoint(_ckpt(), tmp_path / "c.ckpt")
    data = (tmp_path / "c.ckpt").read_bytes()
    for cut in (5, 40, len(data) // 2, len(data) - 2):
        (tmp_path / "t.ckpt").write_bytes(data[:cut])
        with pytest.raises(CorruptCheckpointError, match="byte"):
            load_checkpoint(tmp_path / "t.ckpt")


def test_checkpoint_bitflip_detected(tmp_path):
    save_checkpoint(_ckpt(), tmp_path / "c.ckpt")
    data = bytearray((tmp_path / "c.ckpt").read_bytes())
    data[-20] ^= 0xFF
    (tmp_path / "f.ckpt").write_bytes(bytes(data))
    with pytest.raises(CorruptCheckpointError, match="checksum"):
        load_checkpoint(tmp_path / "f.ckpt")


def test_checkpoint_version_bump(tmp_path):
    save_checkpoint(_ckpt(), tmp_path / "c.ckpt")
    data = bytearray((tmp_path / "c.ckpt").read_bytes())
    data[8:12] = (VERSION + 1).to_bytes(4, "little")
    (tmp_path / "v.ckpt").write_bytes(bytes(data))
    with pytest.raises(CheckpointVersionError, match=f"version {VERSION + 1}.*version {VERSION}"):
        load_checkpoint(tmp_path / "v.ckpt")


def test_fit_normalizer_uses_model_inputs(rng):
    a = Alphabet.from_letters("ab")
    utts = [make_utterance("u", FrameMatrix(rng.normal(5, 2, size=(30, 26))), "a", a)]
    norm = fit_normalizer([utts], FeatureConfig())
    assert norm.mean.shape == (234,)
