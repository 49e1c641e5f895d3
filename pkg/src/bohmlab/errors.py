"""Exception types.

Every error carries a short machine-readable ``category`` that the command
line front-end reports alongside a nonzero exit status.
"""


class BohmLabError(Exception):
    category = "runtime"


class GridError(BohmLabError, ValueError):
    """Invalid grid definition (``code`` is ``invalid-extent`` or ``invalid-points``)."""

    category = "validation"

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class StateError(BohmLabError, ValueError):
    """Invalid wave-function construction (``support-overflow``, ``empty-spec-list``, ...)."""

    category = "validation"

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class OutOfExtentError(BohmLabError, ValueError):
    category = "validation"


class StabilityError(BohmLabError):
    """Time step violates the potential phase guard."""


class NonFiniteError(BohmLabError, FloatingPointError):
    pass


class ConvergenceError(BohmLabError):
    pass


class TargetMismatchError(BohmLabError, ValueError):
    category = "validation"


class NodeSingularityError(BohmLabError):
    """Density at the query point is below the node threshold."""


class SamplingError(BohmLabError):
    pass


class TooFewSamplesError(BohmLabError, ValueError):
    category = "validation"


class TimeBaseMismatchError(BohmLabError, ValueError):
    category = "validation"


class LineageError(BohmLabError, KeyError):
    pass


class ValidationError(BohmLabError, ValueError):
    """A configuration or run-time physics guard failed.

    ``field`` names the offending configuration key when there is one.
    """

    category = "validation"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigParseError(BohmLabError, ValueError):
    category = "parse"

    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field


class MissingArtifactsError(BohmLabError, FileNotFoundError):
    category = "missing-artifacts"
