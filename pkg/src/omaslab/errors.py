"""Exception taxonomy shared across the toolkit.

Exit-code mapping lives in the CLI: ConfigError/SchemaError terminate with 2,
AssumptionViolation and CertificateError (including UnboundedCertificate)
with 3, divergence under --strict with 4.
"""


class ConfigError(ValueError):
    """Inconsistent or infeasible configuration supplied by the caller."""


class SchemaError(ConfigError):
    """Scenario document violates the expected schema.

    Messages carry a dotted field path (e.g. ``modes[2].L``) so the offending
    entry can be located without a stack trace.
    """


class AssumptionViolation(RuntimeError):
    """A structural assumption required by the certification theory is unmet.

    Raised when no positive spanning mode exists, when a negative-minority
    mode is present, or when aggregates are requested for an empty class.
    """


class CertificateError(RuntimeError):
    """Lyapunov certificate synthesis failed or its preconditions do not hold."""


class UnboundedCertificate(CertificateError):
    """The geometric tail of the ultimate bound diverges (contraction >= 0)."""


class NumericalError(RuntimeError):
    """A numerical kernel (eigensolver, Lyapunov solve) did not converge."""
