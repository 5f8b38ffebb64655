"""Exception types raised across the weldnet package."""


class WeldnetError(Exception):
    """Base class for all weldnet errors."""


# --- dataset ---

class MissingHeader(WeldnetError):
    """CSV file has no header row (empty file or a numeric first line)."""


class UnprefixedColumn(WeldnetError):
    """CSV header column lacks the iwp:/dwp: prefix."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} is not prefixed with 'iwp:' or 'dwp:'")


class ParseError(WeldnetError):
    """A CSV body cell failed to parse as a decimal number."""

    def __init__(self, row, col, text=""):
        self.row = row
        self.col = col
        super().__init__(f"cannot parse cell at data row {row}, column {col}: {text!r}")


class EmptyDataset(WeldnetError):
    """File or dataset carries no usable rows/columns."""


class ConstantColumn(WeldnetError):
    """A feature column has zero sample standard deviation."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"feature column {index} is constant; cannot standardize")


class DegreeOutOfRange(WeldnetError):
    """Polynomial expansion degree outside [0, 6]."""


class TooFewRows(WeldnetError):
    """Not enough rows to perform the requested split."""


class SchemaMismatch(WeldnetError):
    """Datasets to combine do not share identical column names."""


# --- linear algebra / training ---

class DimensionMismatch(WeldnetError):
    """Matrix dimensions incompatible with the block's weights."""


class LengthMismatch(WeldnetError):
    """Paired vectors have different lengths."""


class ShapeMismatch(WeldnetError):
    """Optimizer state, weights, and gradient shapes disagree."""


class Diverged(WeldnetError):
    """Training produced a non-finite weight or cost."""

    def __init__(self, iteration, trace=None, target=None):
        self.iteration = iteration
        self.trace = trace
        self.target = target
        where = f" in block {target!r}" if target else ""
        super().__init__(f"training diverged at iteration {iteration}{where}")


# --- metrics ---

class EmptyInput(WeldnetError):
    """Metric invoked on zero-length vectors."""


class AllTargetsZero(WeldnetError):
    """Every target value is zero; prediction error is undefined."""


class TooFewSamples(WeldnetError):
    """Statistic requires more samples than were given."""


class ConstantInput(WeldnetError):
    """Statistic undefined for a constant vector."""


# --- persistence / CLI ---

class IoError(WeldnetError):
    """File could not be read or written."""


class FormatError(WeldnetError):
    """Model file has an unknown version tag or malformed structure."""

    def __init__(self, version, detail=""):
        self.version = version
        msg = f"unsupported model file version: {version!r}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class ConfigError(WeldnetError):
    """Experiment configuration is invalid or incomplete."""
