"""Exception hierarchy shared across the engine."""


class TroubleshooterError(Exception):
    """Base class for all engine errors."""


class IngestError(TroubleshooterError):
    """Fatal ingest failure: unreadable stream, empty corpus, duplicate ids."""


class ConfigurationError(TroubleshooterError):
    """Invalid parameter or configuration value."""


class UnknownLabelError(TroubleshooterError):
    """A label is not part of the named categorical domain."""

    def __init__(self, variable: str, label: str, known: list[str] | None = None):
        self.variable = variable
        self.label = label
        self.known = known
        detail = f"unknown label {label!r} for variable {variable!r}"
        if known is not None:
            detail += f" (known: {', '.join(known)})"
        super().__init__(detail)


class ModelFormatError(TroubleshooterError):
    """Artifact cannot be parsed or has an unsupported schema version."""


class TransportClientError(TroubleshooterError):
    """A remote endpoint (embedder or generator) could not be reached.

    Retryable: the failure is transient network/service trouble, not a
    malformed request.
    """

    def __init__(self, endpoint: str, detail: str):
        self.endpoint = endpoint
        super().__init__(f"endpoint {endpoint} unreachable ({detail}); retry may succeed")


class OracleRefusedError(TroubleshooterError):
    """A brute-force test oracle refused to run above its size guard."""
