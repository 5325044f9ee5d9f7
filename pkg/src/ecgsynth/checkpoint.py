"""Versioned binary checkpoints.

Layout (all integers little-endian)::

    magic      8 bytes   b"ECGSYNCK"
    version    u32
    kind_len   u32, then the model kind in UTF-8
    sections   repeated: tag (4 ASCII bytes), u64 payload length, payload
                 CONF  JSON: config, epoch, seed
                 LAYR  JSON: per network, its layer specs and array shapes
                 DATA  every array as little-endian float64, in LAYR order
    crc32      u32 over every preceding byte

Nothing time- or host-dependent is stored, so the same model state always
serializes to the same bytes.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch, CorruptCheckpoint, FileNotFound, VersionMismatch
from .models import GanConfig, GanModel, architecture
from .nn import BatchNorm, LayerSpec, Sequential

MAGIC = b"ECGSYNCK"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<8sII")
_SECTION = struct.Struct("<4sQ")
_CRC = struct.Struct("<I")


def _layer_arrays(layer) -> list[np.ndarray]:
    arrays = [p.value for p in layer.params]
    return arrays + list(layer.buffers())


@dataclass
class Checkpoint:
    config: GanConfig
    # network name -> (layer specs, flat list of arrays per layer)
    networks: dict[str, tuple[list[LayerSpec], list[list[np.ndarray]]]]
    epoch: int = 0
    version: int = FORMAT_VERSION

    @property
    def model_kind(self) -> str:
        return self.config.model_kind

    @property
    def seed(self) -> int:
        return self.config.seed

    @classmethod
    def from_model(cls, model: GanModel, epoch: int = 0) -> "Checkpoint":
        nets = {}
        for name, net in model.nets.items():
            nets[name] = (net.specs, [[a.copy() for a in _layer_arrays(l)] for l in net.layers])
        return cls(model.config, nets, epoch)

    def to_model(self) -> GanModel:
        nets = {}
        for name, (specs, arrays) in self.networks.items():
            net = Sequential.from_specs(specs)
            for layer, arrs in zip(net.layers, arrays):
                n_params = len(layer.params)
                for p, a in zip(layer.params, arrs[:n_params]):
                    if p.value.shape != a.shape:
                        raise CorruptCheckpoint(f"{name}: array shape {a.shape} != {p.value.shape}")
                    p.value[...] = a
                if isinstance(layer, BatchNorm):
                    layer.set_buffers(*arrs[n_params:])
            nets[name] = net
        return GanModel(self.config, nets)

    # -- serialization -------------------------------------------------------------

    def to_bytes(self) -> bytes:
        kind = self.config.model_kind.encode("utf-8")
        conf = json.dumps(
            {"config": self.config.to_dict(), "epoch": self.epoch, "seed": self.config.seed},
            sort_keys=True,
        ).encode()
        table, chunks = [], []
        for name, (specs, arrays) in self.networks.items():
            table.append(
                {
                    "network": name,
                    "layers": [s.to_dict() for s in specs],
                    "shapes": [[list(a.shape) for a in arrs] for arrs in arrays],
                }
            )
            for arrs in arrays:
                chunks.extend(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrs)
        layr = json.dumps(table, sort_keys=True).encode()
        data = b"".join(chunks)

        out = bytearray(_HEAD.pack(MAGIC, self.version, len(kind)))
        out += kind
        for tag, payload in ((b"CONF", conf), (b"LAYR", layr), (b"DATA", data)):
            out += _SECTION.pack(tag, len(payload))
            out += payload
        out += _CRC.pack(zlib.crc32(out))
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if len(blob) < _HEAD.size + _CRC.size:
            raise ChecksumMismatch("checkpoint is truncated")
        magic, version, kind_len = _HEAD.unpack_from(blob, 0)
        if magic != MAGIC:
            raise CorruptCheckpoint("not a checkpoint file (bad magic)")
        if version > FORMAT_VERSION:
            raise VersionMismatch(f"checkpoint format {version} is newer than supported {FORMAT_VERSION}")
        body, (crc,) = blob[: -_CRC.size], _CRC.unpack_from(blob, len(blob) - _CRC.size)
        if zlib.crc32(body) != crc:
            raise ChecksumMismatch("checkpoint CRC does not match its contents")

        pos = _HEAD.size
        kind = body[pos : pos + kind_len].decode("utf-8")
        pos += kind_len
        sections = {}
        while pos < len(body):
            tag, length = _SECTION.unpack_from(body, pos)
            pos += _SECTION.size
            sections[tag] = body[pos : pos + length]
            pos += length
        try:
            conf = json.loads(sections[b"CONF"])
            table = json.loads(sections[b"LAYR"])
            data = sections[b"DATA"]
        except (KeyError, ValueError) as exc:
            raise CorruptCheckpoint(f"missing or unreadable section: {exc}") from None

        config = GanConfig.from_dict(conf["config"])
        if config.model_kind != kind:
            raise CorruptCheckpoint(f"header kind {kind!r} disagrees with config {config.model_kind!r}")
        flat = np.frombuffer(data, dtype="<f8")
        offset = 0
        networks = {}
        for entry in table:
            specs = [LayerSpec.from_dict(d) for d in entry["layers"]]
            arrays = []
            for shapes in entry["shapes"]:
                arrs = []
                for shape in shapes:
                    size = int(np.prod(shape, dtype=np.int64))
                    if offset + size > flat.size:
                        raise CorruptCheckpoint("parameter payload is shorter than the layer table")
                    arrs.append(flat[offset : offset + size].astype(np.float64).reshape(shape))
                    offset += size
                arrays.append(arrs)
            networks[entry["network"]] = (specs, arrays)
        if offset != flat.size:
            raise CorruptCheckpoint("parameter payload is longer than the layer table")
        expected = set(architecture(config))
        if set(networks) != expected:
            raise CorruptCheckpoint(f"networks {sorted(networks)} do not match {config.model_kind}")
        return cls(config, networks, int(conf.get("epoch", 0)), version)


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(ckpt.to_bytes())
    return p


def load_checkpoint(path) -> Checkpoint:
    p = Path(path)
    if not p.is_file():
        raise FileNotFound(f"no checkpoint at {p}")
    return Checkpoint.from_bytes(p.read_bytes())
