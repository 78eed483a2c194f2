"""Exception types shared across the toolkit."""


class RttlabError(Exception):
    """Base class for all toolkit errors."""


class TraceParseError(RttlabError):
    """A trace document is syntactically malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyInputError(RttlabError):
    """A trace document contains no samples."""


class TraceValidationError(RttlabError):
    """Parsed values violate trace invariants (non-positive, non-finite, unordered)."""


class DegenerateInputError(RttlabError):
    """Input has no usable variation (constant series, zero-magnitude pair)."""


class NumericError(RttlabError):
    """A non-finite value appeared where finite arithmetic was required."""


class ModelFormatError(RttlabError):
    """A model or library document is unreadable, corrupt, or inconsistent."""


class GenerationDivergedError(RttlabError):
    """Autoregressive generation produced a non-finite value."""

    def __init__(self, step):
        super().__init__(f"generation diverged to a non-finite value at step {step}")
        self.step = step
