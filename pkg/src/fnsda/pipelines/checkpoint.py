"""Checkpoint file format and parameter digests.

Layout (little-endian):

    magic "FNSC" | u32 version | u32 config_len | config utf-8 text |
    32-byte sha256 of the config text | u32 n_blobs, then per blob:
    u16 name_len, utf-8 name, u8 rank, u32 dims[rank], f64 data

Blob names: model parameters under their parameter names, per-train-
environment contexts under ``ctx.{env_id}.{c,beta}``, their training
means under ``ctx_mean.{c,beta}``, scalar metadata under ``meta.*``.
Writes are atomic (temp file + rename); a round-trip reproduces every
parameter bitwise.
"""

from __future__ import annotations

import ast
import hashlib
import os
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from ..engine import Tensor
from ..errors import DataFormatError
from ..model import EnvContext, ModelConfig

MAGIC = b"FNSC"
VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    contexts: dict = field(default_factory=dict)  # env_id -> EnvContext
    mean_context: EnvContext | None = None
    meta: dict = field(default_factory=dict)

    def trainable_params(self):
        return {k: v for k, v in self.params.items()}


def config_text(config):
    return "".join(f"{k} = {v!r}\n" for k, v in sorted(asdict(config).items()))


def config_digest(config):
    return hashlib.sha256(config_text(config).encode()).hexdigest()


def params_digest(params):
    """Order-independent sha256 over parameter names and payloads."""
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name].data, dtype="<f8").tobytes())
    return h.hexdigest()


def _blob_items(ckpt):
    items = [(name, p.data) for name, p in sorted(ckpt.params.items())]
    for env_id in sorted(ckpt.contexts):
        ctx = ckpt.contexts[env_id]
        items.append((f"ctx.{env_id}.c", ctx.c.data))
        items.append((f"ctx.{env_id}.beta", ctx.beta.data))
    if ckpt.mean_context is not None:
        items.append(("ctx_mean.c", ckpt.mean_context.c.data))
        items.append(("ctx_mean.beta", ckpt.mean_context.beta.data))
    for key in sorted(ckpt.meta):
        items.append((f"meta.{key}", np.atleast_1d(np.asarray(ckpt.meta[key], dtype=np.float64))))
    return items


def save_checkpoint(ckpt, path):
    text = config_text(ckpt.config).encode()
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(text)), text]
    chunks.append(hashlib.sha256(text).digest())
    items = _blob_items(ckpt)
    chunks.append(struct.pack("<I", len(items)))
    for name, data in items:
        raw = name.encode()
        arr = np.ascontiguousarray(data, dtype="<f8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    payload = b"".join(chunks)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)
    return hashlib.sha256(payload).hexdigest()


def _parse_config(text):
    fields = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, raw = line.partition(" = ")
        fields[key.strip()] = ast.literal_eval(raw)
    return ModelConfig(**fields)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise DataFormatError(f"{path}: bad magic, not a checkpoint")
    pos = 4
    (version,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
    (clen,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    text = buf[pos : pos + clen].decode()
    pos += clen
    digest = buf[pos : pos + 32]
    pos += 32
    if hashlib.sha256(text.encode()).digest() != digest:
        raise DataFormatError(f"{path}: config digest mismatch")
    config = _parse_config(text)
    (n_blobs,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    blobs = {}
    for _ in range(n_blobs):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + nlen].decode()
        pos += nlen
        (rank,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        dims = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(dims)
        pos += count * 8
        blobs[name] = np.array(arr)
    if pos != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - pos} trailing bytes")
    ckpt = Checkpoint(config=config, params={}, meta={})
    ctx_parts = {}
    for name, arr in blobs.items():
        if name.startswith("ctx_mean."):
            ctx_parts.setdefault("mean", {})[name.split(".", 1)[1]] = arr
        elif name.startswith("ctx."):
            _, env_id, part = name.split(".")
            ctx_parts.setdefault(int(env_id), {})[part] = arr
        elif name.startswith("meta."):
            val = arr.reshape(-1)
            ckpt.meta[name.split(".", 1)[1]] = float(val[0]) if val.size == 1 else val
        else:
            ckpt.params[name] = Tensor(arr, requires_grad=True)
    for key, parts in ctx_parts.items():
        ctx = EnvContext(c=Tensor(parts["c"]), beta=Tensor(parts["beta"]))
        if key == "mean":
            ckpt.mean_context = ctx
        else:
            ctx.env_id = key
            ckpt.contexts[key] = ctx
    return ckpt
