"""``hnmt-ckpt v1`` binary checkpoints.

Layout::

    hnmt-ckpt v1\\n
    key=value\\n ...          (UTF-8 config block, ends with an empty line)
    \\n
    record*                   (one per tensor)

Each record is ``u64 name length, name (UTF-8), u64 rank, u64 dims[rank],
f64 data`` (row-major), all little-endian.  The config block carries the
model configuration, the gate order, the tensor count, and the four
vocabularies as JSON token lists, so a checkpoint is self-contained.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import Vocabs
from .errors import FormatError
from .layers import GATE_ORDER
from .model import HybridModel, ModelConfig
from .tensor import Tensor
from .vocab import Vocabulary

MAGIC = "hnmt-ckpt v1"
_VOCAB_KEYS = {
    "vocab.src_word": ("src_word", "word"),
    "vocab.tgt_word": ("tgt_word", "word"),
    "vocab.src_char": ("src_char", "char"),
    "vocab.tgt_char": ("tgt_char", "char"),
}


def to_bytes(model: HybridModel) -> bytes:
    header = [MAGIC]
    cfg = model.config.to_dict()
    for k in sorted(cfg):
        header.append(f"{k}={cfg[k]}")
    header.append("gate_order=" + ",".join(GATE_ORDER))
    header.append(f"tensors={len(model.params)}")
    for key, (attr, _) in _VOCAB_KEYS.items():
        header.append(f"{key}=" + json.dumps(getattr(model.vocabs, attr).words, ensure_ascii=True))
    out = bytearray(("\n".join(header) + "\n\n").encode("utf-8"))
    for name, t in model.params.items():
        raw = name.encode("utf-8")
        out += struct.pack("<Q", len(raw)) + raw
        out += struct.pack("<Q", t.data.ndim)
        out += struct.pack(f"<{t.data.ndim}Q", *t.shape)
        out += np.ascontiguousarray(t.data, dtype="<f8").tobytes()
    return bytes(out)


def save_checkpoint(model: HybridModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


class _Reader:
    def __init__(self, buf: bytes, pos: int):
        self.buf, self.pos = buf, pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError("checkpoint is truncated")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def from_bytes(buf: bytes) -> HybridModel:
    first = buf.find(b"\n")
    if first < 0 or buf[:first].decode("ascii", "replace") != MAGIC:
        got = buf[: max(first, 0)][:40].decode("ascii", "replace")
        raise FormatError(f"not an {MAGIC} checkpoint (header {got!r})")
    end = buf.find(b"\n\n", first)
    if end < 0:
        raise FormatError("checkpoint is truncated inside the config block")
    try:
        lines = buf[first + 1 : end].decode("utf-8").split("\n")
    except UnicodeDecodeError as e:
        raise FormatError(f"config block is not UTF-8: {e}") from None
    conf = {}
    for line in lines:
        if "=" not in line:
            raise FormatError(f"bad config line {line!r}")
        k, v = line.split("=", 1)
        conf[k] = v
    if conf.get("gate_order") != ",".join(GATE_ORDER):
        raise FormatError(f"unsupported gate order {conf.get('gate_order')!r}")
    try:
        vocabs = Vocabs(**{
            attr: Vocabulary(json.loads(conf[key]), kind) for key, (attr, kind) in _VOCAB_KEYS.items()
        })
        n_tensors = int(conf["tensors"])
        config = ModelConfig.from_dict(conf)
    except (KeyError, ValueError) as e:
        raise FormatError(f"incomplete checkpoint config: {e}") from None

    r = _Reader(buf, end + 2)
    params: dict[str, Tensor] = {}
    for _ in range(n_tensors):
        name = r.take(r.u64()).decode("utf-8")
        rank = r.u64()
        if rank > 8:
            raise FormatError(f"implausible rank {rank} for {name}")
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank))
        count = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(dims)
        params[name] = Tensor(data, requires_grad=True, name=name)
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after the last tensor")
    return HybridModel(config, vocabs, params)


def load_checkpoint(path) -> HybridModel:
    return from_bytes(Path(path).read_bytes())
