"""Exception hierarchy shared across the package."""


class OligoIcpError(Exception):
    """Base class for all package-specific errors."""


# --- sequence handling ---

class SequenceError(OligoIcpError, ValueError):
    pass


class InvalidSymbolError(SequenceError):
    pass


class TooShortError(SequenceError):
    """siRNA shorter than the 19-nt minimum."""


class AmbiguousLongError(SequenceError):
    """siRNA longer than 19 nt without a leading U; no trim rule applies."""


class BindingOutOfRangeError(SequenceError):
    """Binding region not fully contained in the transcript."""


# --- datasets ---

class DatasetError(OligoIcpError):
    pass


class DatasetParseError(DatasetError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyDatasetError(DatasetError):
    pass


# --- backends / wire protocol ---

class BackendError(OligoIcpError):
    pass


class BackendUnavailableError(BackendError):
    """External backend process/socket could not be started or has died."""


class BackendTimeoutError(BackendError):
    pass


class BackendReplyError(BackendError):
    """Well-formed reply with ok=false; carries the backend's error string."""


class ProtocolError(BackendError):
    """Malformed or invariant-violating reply from an external backend."""


class DimensionMismatchError(OligoIcpError, ValueError):
    pass


# --- metrics / evaluation ---

class MetricError(OligoIcpError, ValueError):
    pass


class LengthMismatchError(MetricError):
    pass


class ConstantInputError(MetricError):
    """Pearson correlation is undefined for constant input vectors."""


class TooFewPointsError(MetricError):
    pass


# --- ensembles ---

class EnsembleError(OligoIcpError):
    pass


class EmptyPoolError(EnsembleError):
    pass


class EmptyResultsError(EnsembleError):
    pass


class MissingTruthError(EnsembleError):
    """Truth labels required (oracle selection, metric computation) but absent."""


class ModelRunError(EnsembleError):
    """Backend failure during an ensemble run, annotated with the model index."""

    def __init__(self, model_index: int, cause: Exception):
        super().__init__(f"model {model_index}: {cause}")
        self.model_index = model_index
        self.cause = cause
