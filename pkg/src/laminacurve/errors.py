class DatasetError(ValueError):
    """Input data is missing, malformed or violates a dataset invariant."""

    def __init__(self, message, frame=None):
        if frame is not None:
            message = f"frame {frame}: {message}"
        super().__init__(message)
        self.frame = frame


class PipelineError(RuntimeError):
    """A processing stage could not produce a result (e.g. no key frame)."""

    def __init__(self, message, side=None):
        if side is not None:
            message = f"{side} side: {message}"
        super().__init__(message)
        self.side = side
