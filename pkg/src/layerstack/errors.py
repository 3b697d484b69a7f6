"""Exception hierarchy shared across the engine."""


class LayerstackError(Exception):
    """Base class for all engine errors."""


class InvariantError(LayerstackError):
    """A data-model invariant was violated."""


class AnnotationError(LayerstackError):
    """Annotation document is malformed or inconsistent.

    ``field`` names the offending entry, e.g. ``instances[2].instance_alpha``.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class BackendError(LayerstackError):
    """A model backend failed or returned a malformed response."""

    def __init__(self, message, backend=None, request_id=None):
        super().__init__(message)
        self.backend = backend
        self.request_id = request_id


class DepthConventionError(BackendError):
    """Depth response violates the larger-is-farther, nonnegative convention."""


class TruncatedInstanceError(LayerstackError):
    """Trimap erosion emptied the mask (the 'truncated instances' failure)."""
