"""
Error types for magickit
Every failure carries a short kebab-case code and the CLI exit status it maps to
"""

from typing import Any, Dict, Optional


class MagicError(Exception):
    """Base class for all domain and numerical failures"""

    code = "magic-error"
    exit_code = 1

    def __init__(self, message: str = "", payload: Optional[Dict[str, Any]] = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.payload = payload or {}

    def to_dict(self) -> Dict[str, Any]:
        data = {"error": self.code, "message": self.message}
        data.update(self.payload)
        return data


class NumericalFailure(MagicError):
    code = "numerical-failure"
    exit_code = 3


class NoConvergence(MagicError):
    code = "no-convergence"
    exit_code = 3


class NotCptpResidual(MagicError):
    code = "not-cptp-residual"
    exit_code = 3


class NotHermitian(MagicError):
    code = "not-hermitian"


class NotAState(MagicError):
    code = "not-a-state"


class UnsupportedDimension(MagicError):
    code = "unsupported-dimension"


class DimensionMismatch(MagicError):
    code = "dimension-mismatch"


class NotTracePreserving(MagicError):
    code = "not-trace-preserving"


class FreeResourceState(MagicError):
    code = "free-resource-state"


class MissingFixture(MagicError):
    code = "missing-fixture"


class FixtureRejected(MissingFixture):
    """A fixture loaded but failed its acceptance check"""

    code = "fixture-rejected"


class SchemaError(MagicError):
    """JSON input that does not match the expected shape; position is a JSON pointer"""

    code = "schema-error"

    def __init__(self, message: str, position: str = ""):
        super().__init__(f"{position or '/'}: {message}", {"position": position or "/"})
        self.position = position or "/"


class InvalidSuperchannel(MagicError):
    """Superchannel Choi matrix that violates positivity or its marginal conditions"""

    code = "invalid-superchannel"
