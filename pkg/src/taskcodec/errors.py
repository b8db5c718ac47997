"""Exception types shared across the package.

Every error raised at a public API boundary derives from TaskCodecError so
callers (and the CLI) can tell usage problems apart from genuine bugs.
"""


class TaskCodecError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(TaskCodecError):
    """A model/spec/config combination that can never be valid."""


class SequencingError(TaskCodecError):
    """An operation was invoked out of its required order."""


class DecodeError(TaskCodecError):
    """A byte stream could not be decoded (corruption, truncation, bad header)."""


class EvaluationError(TaskCodecError):
    """An evaluation request is unsatisfiable (e.g. curves that never overlap)."""


class FittingError(TaskCodecError):
    """A curve fit was requested with insufficient or degenerate data."""
