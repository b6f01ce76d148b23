"""
Exception hierarchy for the active learning system
"""

from typing import Any, Dict, Optional


class ALRLError(Exception):
    """Base class for all errors raised by rl_active_learning"""


class ConfigurationError(ALRLError, ValueError):
    """Invalid configuration, shape mismatch or unsatisfiable precondition"""


class NumericError(ALRLError, ArithmeticError):
    """Non-finite values appeared during a forward pass or parameter update"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"


class IDXParseError(ALRLError, ValueError):
    """Malformed IDX container"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class PoolExhaustedError(ALRLError, RuntimeError):
    """Not enough unlabeled datapoints left to satisfy a request"""


class PoolStateError(ALRLError, KeyError):
    """Datapoint id is not where the operation expects it to be"""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable
        return str(self.args[0]) if self.args else ""


class DistributionError(ALRLError, ValueError):
    """Input is not a valid probability distribution"""
