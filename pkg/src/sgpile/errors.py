"""Exception types shared across the package."""


class SgpileError(Exception):
    """Base class for package errors."""


class UsageError(SgpileError):
    """Invalid arguments or mismatched objects (CLI exit code 1)."""


class CapacityError(SgpileError):
    """Requested size exceeds the configured capacity (CLI exit code 2)."""


class VerificationError(SgpileError):
    """A verification suite found a failing identity (CLI exit code 3)."""


class NonterminationError(SgpileError):
    """Stabilization exceeded its toppling budget (sink-free misuse guard)."""
