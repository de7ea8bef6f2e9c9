"""Exception hierarchy shared by every module.

The CLI maps :class:`Url2GraphError` subclasses to exit code 2.
"""


class Url2GraphError(Exception):
    pass


class DataFormatError(Url2GraphError):
    """Malformed CSV / vocab / graph / checkpoint contents."""


class LabelError(Url2GraphError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: unmapped label {value!r}")
        self.row = row
        self.value = value


class EmptyDatasetError(Url2GraphError):
    pass


class SpecError(Url2GraphError):
    """Invalid configuration (fractions, sizes, ratios)."""


class ArtifactError(Url2GraphError):
    """Vocabulary, graphs and checkpoint do not agree with each other."""


class DomainError(Url2GraphError, ValueError):
    pass


class ShapeError(Url2GraphError, ValueError):
    pass
