"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input violates gridworld preconditions (bad cell, action, or trajectory)."""


class ContractError(TypeError):
    """A query/response pair is ill-typed or the response is outside the query's support."""


class EmptySupportError(ValueError):
    """A query has no responses to choose from."""


class DegenerateEvidenceError(RuntimeError):
    """Evidence assigned zero likelihood to every particle; the belief was left unchanged."""


class StateConsistencyError(ValueError):
    """A transition references dataset content that is not present."""


class NoCandidatesError(ValueError):
    """Query selection was invoked with an empty candidate list."""


class ConfigError(ValueError):
    """Invalid configuration; ``field`` holds the offending path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class TranscriptError(ValueError):
    """A transcript line cannot be parsed; ``line_no`` is 1-based."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ReplayDivergenceError(RuntimeError):
    """A replayed transition disagrees with what the transcript recorded."""
