"""Exception hierarchy for the ntkln package.

Numerical failures are distinguished from configuration errors so the CLI
can map them onto distinct exit codes.
"""


class NtklnError(Exception):
    """Base class for all package errors."""


class ConfigError(NtklnError):
    """Invalid configuration (bad architecture, bad flags, unknown keys)."""


class NumericalError(NtklnError):
    """Base class for numerical failures."""


class NotPositiveDefinite(NumericalError):
    """Cholesky pivot <= 0 after jitter; Gram matrix is degenerate."""


class NonFinite(NumericalError):
    """NaN or Inf encountered in an input matrix."""


class OrderOutOfRange(ConfigError):
    """Quadrature or expansion order outside the supported range."""


class RhoOutOfRange(ConfigError):
    """Correlation outside [-1, 1] beyond clamping tolerance."""


class DegenerateActivation(NumericalError):
    """Activation has vanishing second moment; normalisation undefined."""


class DimensionMismatch(ConfigError):
    """Input vector length does not match the architecture."""


class NonFiniteState(NumericalError):
    """Kernel recursion overflowed to NaN/Inf."""


class ZeroVariance(NumericalError):
    """Layer-norm step applied to a state with (numerically) zero variance."""


class ContractViolation(NumericalError):
    """A debug-mode invariant check failed."""


class ZeroDenominator(NumericalError):
    """Soft-cosine denominator vanished (zero input with sigma^2 = 0)."""


class LNZeroSigma(NumericalError):
    """Finite-width layer norm saw a constant pre-activation vector."""


class Diverged(NumericalError):
    """Training loss became non-finite."""


class DegenerateGram(NumericalError):
    """Gram matrix minimum eigenvalue is not safely positive."""


class DuplicateInputs(ConfigError):
    """Training inputs contain repeated rows."""


class UnboundedKernel(NumericalError):
    """Bound certificate requested for an architecture without Layer Norm."""
