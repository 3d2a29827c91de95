"""Document unwarping from coupled 2D/3D grid regression."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AlgorithmError,
    CgunwarpError,
    DepthError,
    DimensionError,
    FormatError,
    GenerationError,
    OrderingError,
)
from .grid import (  # noqa: E402
    CameraIntrinsics,
    DenseBackwardMap,
    GridMesh3D,
    UnwarpGrid2D,
    densify,
    resample,
    unwarp,
)

__all__ = [
    "AlgorithmError",
    "CameraIntrinsics",
    "CgunwarpError",
    "DenseBackwardMap",
    "DepthError",
    "DimensionError",
    "FormatError",
    "GenerationError",
    "GridMesh3D",
    "OrderingError",
    "UnwarpGrid2D",
    "densify",
    "resample",
    "unwarp",
]
