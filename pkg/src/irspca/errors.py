"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericError -> 3,
OSError -> 4. ContractError signals a violated call contract and maps to 2.
"""


class ContractError(ValueError):
    """An argument violates the operation's contract."""


class DegenerateInputError(ContractError):
    """Input is structurally degenerate (zero vector, all-zero observations)."""


class ConfigError(ValueError):
    """A configuration file or experiment spec is invalid."""


class NumericError(RuntimeError):
    """An iterative numeric routine failed to converge."""
