class ConfigurationError(KeyError):
    """Exception raised for configuration errors.

    Attributes:
        setting (str): The name of the missing or invalid setting.
    """

    def __init__(self, setting: str) -> None:
        self.setting: str = setting

    def __str__(self) -> str:
        return f"Missing or invalid configuration value(s): {self.setting}"


class MremError(Exception):
    """Base class for every error raised by the mrem package."""


class ParseError(MremError):
    """Exception raised when an input file cannot be parsed.

    Attributes:
        line_number (int): 1-based line of the offending input.
        reason (str): What was wrong with the line.
    """

    def __init__(self, line_number: int, reason: str) -> None:
        self.line_number: int = line_number
        self.reason: str = reason

    def __str__(self) -> str:
        return f"line {self.line_number}: {self.reason}"


class DimensionError(MremError):
    """Exception raised when register widths or indices do not agree.

    Attributes:
        expected (int): The width or bound that was required.
        actual (int): The width or index that was given.
    """

    def __init__(self, expected: int, actual: int, what: str = "qubits") -> None:
        self.expected: int = expected
        self.actual: int = actual
        self.what: str = what

    def __str__(self) -> str:
        return f"Dimension mismatch for {self.what}: expected {self.expected}, got {self.actual}"


class CapacityError(MremError):
    """Exception raised when a register exceeds a dense-representation ceiling."""

    def __init__(self, n_qubits: int, limit: int) -> None:
        self.n_qubits: int = n_qubits
        self.limit: int = limit

    def __str__(self) -> str:
        return f"{self.n_qubits} qubits exceeds the limit of {self.limit}"


class ContractError(MremError):
    """Exception raised when an operation's precondition does not hold."""

    def __init__(self, message: str) -> None:
        self.message: str = message

    def __str__(self) -> str:
        return self.message


class NumericalContractError(ContractError):
    """Exception raised when a computed quantity leaves its allowed range."""


class SectorError(MremError):
    """Exception raised when a determinant does not fix a symmetry sector.

    Attributes:
        determinant (int): The offending basis bitstring.
        message (str): Description of the failure.
    """

    def __init__(self, determinant: int, message: str) -> None:
        self.determinant: int = determinant
        self.message: str = message

    def __str__(self) -> str:
        return f"determinant {self.determinant:b}: {self.message}"


class TaperingError(MremError):
    """Exception raised when the tapering Clifford fails its consistency checks."""

    def __init__(self, message: str) -> None:
        self.message: str = message

    def __str__(self) -> str:
        return self.message


class SolverError(MremError):
    """Exception raised when the angle solver does not converge.

    Attributes:
        residual (float): Residual norm at the last iterate.
        iterations (int): Number of iterations performed.
    """

    def __init__(self, residual: float, iterations: int) -> None:
        self.residual: float = residual
        self.iterations: int = iterations

    def __str__(self) -> str:
        return (
            f"Angle solver did not converge after {self.iterations} iterations "
            f"(residual {self.residual:.3e})"
        )


class TemplateMismatchError(MremError):
    """Exception raised when a template cannot reach part of a target.

    Attributes:
        bitstrings (list[str]): Target bitstrings with no path from the reference.
    """

    def __init__(self, bitstrings: list[str]) -> None:
        self.bitstrings: list[str] = bitstrings

    def __str__(self) -> str:
        return f"Template cannot reach target bitstring(s): {', '.join(self.bitstrings)}"
