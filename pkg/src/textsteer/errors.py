"""Exception hierarchy shared across the package."""


class TextsteerError(Exception):
    """Base class for all package errors."""


class SpecSyntaxError(TextsteerError):
    """Input document is not well-formed JSON."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class SpecValidationError(TextsteerError):
    """A parsed value violates a structural invariant."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.rule = message


class UnknownKindError(TextsteerError):
    """Document kind discriminator is not recognized."""


class SchemaParseError(TextsteerError):
    """Schema text does not match the schema grammar."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class GatewayError(TextsteerError):
    """Transport-level completion failure after retries."""


class FixtureMissError(GatewayError):
    """Replay mode was asked for a request that was never recorded."""

    def __init__(self, tag, digest):
        super().__init__(f"fixture miss for tag={tag!r} hash={digest}")
        self.tag = tag
        self.digest = digest


class ExtractionError(TextsteerError):
    """Model output could not be parsed into the expected structure."""


class SearchComplete(TextsteerError):
    """No expandable node remains in the tree."""


class ExpansionError(TextsteerError):
    """Expansion failed; the tree is unchanged."""


class StoreError(TextsteerError):
    """Corpus store invariant violation (missing key, schema mismatch, ...)."""


class CompileError(TextsteerError):
    """Primitive-task compilation failed."""


class ExecutionError(TextsteerError):
    """Primitive-task execution failed."""


class TransformError(TextsteerError):
    """Transform plan step or expression error."""


class EvaluationError(TextsteerError):
    """Evaluator generation or run failure."""
