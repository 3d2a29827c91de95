"""Model checkpoint container.

::

    b"CGUC" | u32 json_len | config JSON (utf-8) | u32 n_params
    n_params x ( u16 name_len | name | u8 ndim | u32 dims[ndim] | f32 data )

Little-endian throughout.
"""

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .model import CGUNet, CGUNetConfig

MAGIC = b"CGUC"


def encode_checkpoint(model, extra=None):
    meta = {"config": model.config.to_dict()}
    if extra:
        meta.update(extra)
    js = json.dumps(meta, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<I", len(js)), js, struct.pack("<I", len(model.params))]
    for name, p in model.params.items():
        nb = name.encode()
        arr = np.ascontiguousarray(p.data, dtype="<f4")
        parts.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def decode_checkpoint(data, dtype=np.float32):
    if len(data) < 8 or data[:4] != MAGIC:
        raise FormatError("not a CGUC checkpoint (bad magic)")
    try:
        (jl,) = struct.unpack_from("<I", data, 4)
        meta = json.loads(data[8 : 8 + jl].decode())
        off = 8 + jl
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        state = {}
        for _ in range(n):
            (nl,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off : off + nl].decode()
            off += nl
            (nd,) = struct.unpack_from("<B", data, off)
            off += 1
            shape = struct.unpack_from(f"<{nd}I", data, off)
            off += 4 * nd
            count = int(np.prod(shape)) if nd else 1
            state[name] = np.frombuffer(data, dtype="<f4", count=count, offset=off).reshape(shape).copy()
            off += 4 * count
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise FormatError(f"corrupt checkpoint: {e}") from e
    if off != len(data):
        raise FormatError("trailing bytes in checkpoint")
    model = CGUNet(CGUNetConfig(**meta["config"]), dtype=dtype)
    model.load_state_dict(state)
    return model, meta


def save_checkpoint(path, model, extra=None):
    Path(path).write_bytes(encode_checkpoint(model, extra))


def load_checkpoint(path, dtype=np.float32):
    return decode_checkpoint(Path(path).read_bytes(), dtype)
