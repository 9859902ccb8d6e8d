"""Binary weights container.

Little-endian layout:

    magic   8 bytes  "MVFIWGT1"
    count   u32      number of tensors
    per tensor:
        name_len u16, name (UTF-8)
        dtype    u8   0 = float32, 1 = int8, 2 = int32
        rank     u8
        dims     u32 * rank
        data     raw bytes, C order

Tensor names are '<node>.weight', '<node>.bias', '<node>.bn_gamma',
'<node>.bn_beta', '<node>.bn_mean', '<node>.bn_var'.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import BadMagicError, ShapeError, TruncatedStreamError
from .graph import Graph

MAGIC = b"MVFIWGT1"

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("i1"), 2: np.dtype("<i4")}
_CODES = {np.dtype("float32"): 0, np.dtype("int8"): 1, np.dtype("int32"): 2}


def save_weights(g: Graph) -> bytes:
    """Serialize the graph's tensors in node order."""
    parts = [MAGIC]
    names = g.weight_names()
    parts.append(struct.pack("<I", len(names)))
    for name in names:
        t = np.ascontiguousarray(g.weights[name])
        if t.dtype not in _CODES:
            t = t.astype(np.float32)
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BB", _CODES[t.dtype], t.ndim))
        parts.append(struct.pack(f"<{t.ndim}I", *t.shape))
        parts.append(t.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedStreamError(
                f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def load_weights(data: bytes, g: Graph) -> Graph:
    """Parse a container and return a new graph carrying its tensors.

    Names and shapes must match the graph exactly; ShapeError names the
    first offending tensor.
    """
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise BadMagicError("not a weights container (bad magic)")
    (count,) = struct.unpack("<I", r.take(4))
    loaded: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", r.take(2))
        name = r.take(name_len).decode("utf-8")
        code, rank = struct.unpack("<BB", r.take(2))
        if code not in _DTYPES:
            raise ShapeError(f"{name}: unknown dtype code {code}")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank))
        dt = _DTYPES[code]
        n_bytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
        arr = np.frombuffer(r.take(n_bytes), dtype=dt).reshape(dims)
        loaded[name] = arr
    expected = g.weight_names()
    for name in expected:
        if name not in loaded:
            raise ShapeError(f"{name}: missing from container")
        if loaded[name].shape != g.weights[name].shape:
            raise ShapeError(
                f"{name}: stored shape {loaded[name].shape} != "
                f"graph shape {g.weights[name].shape}")
    extra = set(loaded) - set(expected)
    if extra:
        raise ShapeError(f"{sorted(extra)[0]}: not a tensor of this graph")
    return Graph(nodes=list(g.nodes), weights=loaded, output=g.output,
                 input_name=g.input_name, input_channels=g.input_channels)
