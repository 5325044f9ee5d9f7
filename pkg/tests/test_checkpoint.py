import struct

import numpy as np
import pytest

from ecgsynth.checkpoint import FORMAT_VERSION, MAGIC, Checkpoint, load_checkpoint, save_checkpoint
from ecgsynth.errors import ChecksumMismatch, CorruptCheckpoint, FileNotFound, VersionMismatch
from ecgsynth.models import GanConfig, build_model, generate, train


@pytest.fixture(scope="module", params=["classic", "wgan_fc", "vaegan"])
def trained(request, normal_beats):
    cfg = GanConfig(model_kind=request.param, epochs=1, seed=4, snapshot_per_epoch=0)
    return train(cfg, normal_beats)


def _state(model):
    out = []
    for name in sorted(model.nets):
        for layer in model.nets[name].layers:
            out += [p.value for p in layer.params] + list(layer.buffers())
    return out


def test_roundtrip_preserves_everything(trained, tmp_path):
    path = save_checkpoint(trained.final, tmp_path / "m.ckpt")
    back = load_checkpoint(path)
    assert back.config == trained.config and back.epoch == 1
    assert back.model_kind == trained.config.model_kind and back.seed == 4
    model = back.to_model()
    for a, b in zip(_state(model), _state(trained.model), strict=True):
        assert np.array_equal(a, b)
    assert np.array_equal(generate(model, 5, 9).beats, generate(trained.model, 5, 9).beats)
    assert np.array_equal(generate(back, 5, 9).beats, generate(trained.model, 5, 9).beats)


def test_bytes_are_deterministic(trained):
    blob = trained.final.to_bytes()
    assert blob[:8] == MAGIC
    assert Checkpoint.from_bytes(blob).to_bytes() == blob
    assert Checkpoint.from_model(trained.model, 1).to_bytes() == blob


def test_truncation_is_detected(trained):
    blob = trained.final.to_bytes()
    for cut in (len(blob) - 1, len(blob) // 2, 20):
        with pytest.raises(ChecksumMismatch):
            Checkpoint.from_bytes(blob[:cut])
    flipped = bytearray(blob)
    flipped[len(blob) // 2] ^= 0x01
    with pytest.raises(ChecksumMismatch):
        Checkpoint.from_bytes(bytes(flipped))


def test_header_errors():
    blob = Checkpoint.from_model(build_model(GanConfig(seed=0))).to_bytes()
    with pytest.raises(CorruptCheckpoint):
        Checkpoint.from_bytes(b"NOTACKPT" + blob[8:])
    future = bytearray(blob)
    struct.pack_into("<I", future, 8, FORMAT_VERSION + 1)
    with pytest.raises(VersionMismatch):
        Checkpoint.from_bytes(bytes(future))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFound):
        load_checkpoint(tmp_path / "none.ckpt")
