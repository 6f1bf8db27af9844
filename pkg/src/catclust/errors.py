"""Exception hierarchy shared by all modules."""


class CatClustError(Exception):
    """Base class for every error raised by catclust."""


class SchemaError(CatClustError):
    """Schema file is malformed or does not match the data header."""


class DataValidationError(CatClustError):
    """A data cell holds a code the variable's schema does not allow."""

    def __init__(self, message, row=None, column=None, code=None):
        super().__init__(message)
        self.row = row
        self.column = column
        self.code = code


class EmptyDatasetError(CatClustError):
    pass


class DegenerateTableError(CatClustError):
    """Table (or one of its profiles) has zero mass where mass is required."""


class UsageError(CatClustError):
    pass


class ConsistencyError(CatClustError):
    """Two structures that must agree (e.g. dendrogram scales) do not."""


class InfeasibleClusterCountError(CatClustError):
    """Requested number of clusters cannot be reached under the constraints."""


class UnsupportedScaleError(CatClustError):
    pass


class TreeFormatError(CatClustError):
    """A serialized tree is malformed; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
