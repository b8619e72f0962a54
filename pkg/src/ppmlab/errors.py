"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: config problems exit 2, data problems
exit 3, numeric failures exit 4.
"""


class PpmLabError(Exception):
    exit_code = 1


class ConfigError(PpmLabError):
    """Invalid configuration, model spec, or API contract misuse."""

    exit_code = 2


class ContractError(ConfigError):
    """A call violated a documented precondition."""


class DataError(PpmLabError):
    """Problems with input data."""

    exit_code = 3


class ParseError(DataError):
    """Malformed input file content."""


class SchemaError(DataError):
    """Schema does not match the data."""


class IntegrityError(DataError):
    """Data violates a cross-row consistency rule."""


class ValidityError(DataError):
    """A value is outside its valid domain."""


class AlignmentError(DataError):
    """Two aligned structures disagree on shape."""


class NumericError(PpmLabError):
    """Non-finite values or numerical breakdown."""

    exit_code = 4


class TrainingDiverged(NumericError):
    """Loss became non-finite during training."""

    def __init__(self, message, *, epoch=None, batch=None, lr=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
