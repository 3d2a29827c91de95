"""Exception hierarchy. CLI maps :class:`AlgorithmError` to exit code 2."""


class CgunwarpError(Exception):
    pass


class FormatError(CgunwarpError, ValueError):
    """Malformed or foreign binary file."""


class AlgorithmError(CgunwarpError):
    """A numerical procedure could not produce a trustworthy result."""


class DimensionError(CgunwarpError, ValueError):
    pass


class DepthError(AlgorithmError):
    pass


class OrderingError(AlgorithmError):
    """Grid recovery failed; ``step`` names the pipeline stage."""

    def __init__(self, step, message, where=None):
        self.step = step
        self.where = where
        loc = f" at {where}" if where is not None else ""
        super().__init__(f"[{step}] {message}{loc}")


class GenerationError(AlgorithmError):
    pass
