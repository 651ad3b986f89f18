"""Exception hierarchy.

Anything deriving from :class:`UserInputError` is caused by bad input files or
arguments; the CLI maps it to exit status 2.  Everything else is a bug.
"""

from __future__ import annotations


class UserInputError(ValueError):
    """Input could not be accepted.  Optionally carries a source location."""

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None,
                 source: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(self._render())

    def _render(self) -> str:
        where = []
        if self.source:
            where.append(str(self.source))
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        return f"{', '.join(where)}: {self.message}" if where else self.message


class CorpusFormatError(UserInputError):
    pass


class ResourceError(UserInputError):
    pass


class CorefError(UserInputError):
    pass


class RuleError(UserInputError):
    pass


class TrainingError(UserInputError):
    pass


class ManifestMismatchError(UserInputError):
    """Feature vector does not match the model's feature manifest."""


class ModelFormatError(UserInputError):
    pass


class ModelCorruptError(ModelFormatError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class StoreError(UserInputError):
    pass


class AnnotationError(UserInputError):
    pass


class SamplingError(UserInputError):
    pass
