"""Binary model checkpoints.

Layout (all integers little-endian):

    magic               4 bytes  b"MVCK"
    version             u32      currently 1
    rng_seed            u64      seed the parameters were initialized from
    layer_count         u32
    per layer:          u8 kind code, u8 dim count, dims as u32 each
                        (codes: 0 input, 1 conv, 2 relu, 3 pool, 4 flatten,
                         5 dense; dims as in LayerSpec)
    parameters          float32 row-major weights then bias for every
                        conv/dense layer, in architecture order
    class_count         u32
    per class:          u32 byte length + UTF-8 name

Round-trips are bit-exact: load(save(ckpt)) re-encodes to identical bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import write_bytes_atomic
from .exceptions import DataError
from .layers import LayerParams
from .network import LayerSpec, Network, validate_architecture

MAGIC = b"MVCK"
VERSION = 1

_KIND_CODES = {"input": 0, "conv": 1, "relu": 2, "pool": 3, "flatten": 4, "dense": 5}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass
class ModelCheckpoint:
    """Serialized model: architecture, parameters, and label set."""

    version: int
    architecture: list[LayerSpec]
    params: list[LayerParams]
    rng_seed: int
    class_names: list[str]

    def validate(self) -> None:
        width = validate_architecture(self.architecture)
        if len(self.class_names) != width:
            raise DataError(
                f"checkpoint lists {len(self.class_names)} classes but the final "
                f"dense layer is {width} wide"
            )
        n_param_layers = sum(1 for s in self.architecture if s.kind in ("conv", "dense"))
        if len(self.params) != n_param_layers:
            raise DataError(
                f"checkpoint holds {len(self.params)} parameter sets for "
                f"{n_param_layers} parametric layers"
            )

    def to_network(self) -> Network:
        return Network(self.architecture, self.params)

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.architecture[0].dims


def _param_shapes(spec: LayerSpec) -> tuple[tuple[int, ...], int]:
    if spec.kind == "conv":
        return spec.dims[:4], spec.dims[0]
    return spec.dims, spec.dims[0]


def encode_checkpoint(ckpt: ModelCheckpoint) -> bytes:
    ckpt.validate()
    out = bytearray()
    out += MAGIC
    out += struct.pack("<IQ", ckpt.version, ckpt.rng_seed & (2**64 - 1))
    out += struct.pack("<I", len(ckpt.architecture))
    for spec in ckpt.architecture:
        out += struct.pack("<BB", _KIND_CODES[spec.kind], len(spec.dims))
        out += struct.pack(f"<{len(spec.dims)}I", *spec.dims)
    pi = 0
    for spec in ckpt.architecture:
        if spec.kind not in ("conv", "dense"):
            continue
        p = ckpt.params[pi]
        pi += 1
        wshape, blen = _param_shapes(spec)
        if p.weights.shape != wshape or p.bias.shape != (blen,):
            raise DataError(
                f"parameter shapes {p.weights.shape}/{p.bias.shape} do not match "
                f"descriptor {spec.dims}"
            )
        out += np.ascontiguousarray(p.weights, dtype="<f4").tobytes()
        out += np.ascontiguousarray(p.bias, dtype="<f4").tobytes()
    out += struct.pack("<I", len(ckpt.class_names))
    for name in ckpt.class_names:
        raw = name.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise DataError(
                f"{self.source}: truncated checkpoint at byte {self.pos} "
                f"(need {n} more bytes for {what})"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> ModelCheckpoint:
    r = _Reader(data, source)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise DataError(f"{source}: not a model checkpoint (magic {magic!r} at byte 0)")
    version, rng_seed = r.unpack("<IQ", "header")
    if version != VERSION:
        raise DataError(f"{source}: unsupported checkpoint version {version}")
    (n_layers,) = r.unpack("<I", "layer count")
    arch = []
    for i in range(n_layers):
        code, ndims = r.unpack("<BB", f"layer {i} descriptor")
        if code not in _CODE_KINDS:
            raise DataError(f"{source}: unknown layer code {code} in descriptor {i}")
        dims = r.unpack(f"<{ndims}I", f"layer {i} dims") if ndims else ()
        arch.append(LayerSpec(_CODE_KINDS[code], tuple(int(d) for d in dims)))
    params = []
    for spec in arch:
        if spec.kind not in ("conv", "dense"):
            continue
        wshape, blen = _param_shapes(spec)
        wcount = int(np.prod(wshape))
        raw = r.take(4 * (wcount + blen), f"{spec.kind} parameters")
        flat = np.frombuffer(raw, dtype="<f4")
        params.append(
            LayerParams(spec.kind, flat[:wcount].reshape(wshape).copy(), flat[wcount:].copy())
        )
    (n_classes,) = r.unpack("<I", "class count")
    class_names = []
    for i in range(n_classes):
        (nbytes,) = r.unpack("<I", f"class name {i} length")
        class_names.append(r.take(nbytes, f"class name {i}").decode("utf-8"))
    if r.pos != len(data):
        raise DataError(f"{source}: {len(data) - r.pos} trailing bytes after byte {r.pos}")
    ckpt = ModelCheckpoint(version, arch, params, rng_seed, class_names)
    ckpt.validate()
    return ckpt


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> Path:
    return write_bytes_atomic(path, encode_checkpoint(ckpt))


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint file not found: {path}")
    return decode_checkpoint(path.read_bytes(), source=str(path))
