"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, DataError
subclasses exit 2, ClientError subclasses exit 3.
"""


class TextgroundError(Exception):
    pass


class DataError(TextgroundError):
    """Malformed or inconsistent input data."""


class CorpusError(DataError):
    """A corpus file failed to parse or verify."""


class SchemaVersionError(CorpusError):
    """A corpus manifest declares an unsupported schema version."""


class TargetParseError(DataError):
    """A token sequence violated the span block grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at token position {position})")
        self.position = position


class VocabError(DataError):
    """Text that cannot be encoded with the configured vocabulary."""


class NotBenchmarkable(DataError):
    """A sample has no grounded text and cannot be difficulty-classified."""


class ClientError(TextgroundError):
    """An external-service client failed."""


class ClientTransportError(ClientError):
    """The transport to an external-service client failed after retries."""


class TrainingDiverged(TextgroundError):
    """The toy training loop produced a non-finite loss."""
