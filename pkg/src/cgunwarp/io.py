"""Binary grid/flow containers and image files.

CGUG (grids)::

    b"CGUG" | u8 kind (2 or 3) | u32 rows | u32 cols | rows*cols*kind f32

CGUF (flows)::

    b"CGUF" | u32 width | u32 height | height*width*2 f32 (dx, dy)

All integers and floats are little-endian, payloads row-major.
"""

import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import FormatError
from .grid import GridMesh3D, UnwarpGrid2D

GRID_MAGIC = b"CGUG"
FLOW_MAGIC = b"CGUF"


def encode_grid(grid):
    if isinstance(grid, UnwarpGrid2D):
        arr, kind = grid.coords, 2
    elif isinstance(grid, GridMesh3D):
        arr, kind = grid.points, 3
    else:
        arr = np.asarray(grid)
        kind = arr.shape[-1]
        if arr.ndim != 3 or kind not in (2, 3):
            raise FormatError(f"cannot encode array of shape {arr.shape} as a grid")
    rows, cols = arr.shape[:2]
    header = GRID_MAGIC + struct.pack("<BII", kind, rows, cols)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_grid(data):
    if len(data) < 13 or data[:4] != GRID_MAGIC:
        raise FormatError("not a CGUG grid (bad magic)")
    kind, rows, cols = struct.unpack_from("<BII", data, 4)
    if kind not in (2, 3):
        raise FormatError(f"unknown grid kind {kind}")
    n = rows * cols * kind
    if len(data) != 13 + 4 * n:
        raise FormatError(f"CGUG payload size mismatch: expected {4 * n} bytes, got {len(data) - 13}")
    arr = np.frombuffer(data, dtype="<f4", count=n, offset=13).astype(np.float64).reshape(rows, cols, kind)
    return UnwarpGrid2D(arr) if kind == 2 else GridMesh3D(arr)


def write_grid(path, grid):
    Path(path).write_bytes(encode_grid(grid))


def read_grid(path):
    return decode_grid(Path(path).read_bytes())


def write_flow(path, flow):
    """``flow`` is (height, width, 2) pixel displacements."""
    f = np.asarray(flow)
    h, w = f.shape[:2]
    Path(path).write_bytes(FLOW_MAGIC + struct.pack("<II", w, h) + np.ascontiguousarray(f, dtype="<f4").tobytes())


def read_flow(path):
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != FLOW_MAGIC:
        raise FormatError(f"{path}: not a CGUF flow (bad magic)")
    w, h = struct.unpack_from("<II", data, 4)
    if len(data) != 12 + 8 * w * h:
        raise FormatError(f"{path}: CGUF payload size mismatch")
    return np.frombuffer(data, dtype="<f4", offset=12).astype(np.float64).reshape(h, w, 2)


def read_image(path, gray=False):
    """Load PNG/PPM/PGM as float64 in [0, 1]; (h, w) for gray, (h, w, 3) otherwise."""
    with PILImage.open(path) as im:
        if gray:
            im = im.convert("L")
        elif im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return arr


def to_uint8(img):
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path, img):
    a = to_uint8(img)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    PILImage.fromarray(a).save(path)
