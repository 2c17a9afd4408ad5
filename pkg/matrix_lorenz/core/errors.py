"""
Exception hierarchy for the matrix Lorenz toolkit
"""

from typing import Optional, Sequence, Tuple


class MatrixLorenzError(Exception):
    """Base class for every error raised by this package"""


class BasisError(MatrixLorenzError, ValueError):
    """A generator set that does not form a valid algebra basis"""

    def __init__(self, message: str, index: Optional[int] = None,
                 pair: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.index = index
        self.pair = pair


class ParameterError(MatrixLorenzError, ValueError):
    """Invalid physical parameters or mismatched dimensions"""


class ConfigError(MatrixLorenzError, ValueError):
    """Invalid run configuration"""


class IntegrationError(MatrixLorenzError, ArithmeticError):
    """Time stepping produced a non-finite or diverging state"""

    def __init__(self, message: str, time: float, step: Optional[int] = None,
                 members: Optional[Sequence[int]] = None):
        super().__init__(message)
        self.time = time
        self.step = step
        self.members = list(members) if members is not None else None


class LyapunovError(IntegrationError):
    """Tangent vector left the representable range between renormalizations"""


class EnsembleError(MatrixLorenzError):
    """An ensemble member failed"""

    def __init__(self, message: str, sample: int, seed: int):
        super().__init__(message)
        self.sample = sample
        self.seed = seed


class TransitionNotFound(MatrixLorenzError):
    """No chaos transition could be located in a phase diagram"""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason
