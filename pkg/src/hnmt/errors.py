"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """An operation's precondition is violated."""


class NumericError(FloatingPointError):
    """Non-finite values where finite ones are required."""


class VocabularyError(IndexError):
    """A token id is outside its vocabulary."""


class DataError(ValueError):
    """Malformed or inconsistent corpus / evaluation data."""


class FormatError(ValueError):
    """A vocabulary or checkpoint file does not parse."""


class ConfigError(ValueError):
    """Inconsistent model or run configuration."""
