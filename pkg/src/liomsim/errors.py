"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """A parameter or argument violates a documented precondition."""


class FeasibilityError(DomainError):
    """The requested computation exceeds a hard resource guard (system size,
    intermediate tensor size) and no exact fallback exists."""


class StructuralError(DomainError):
    """A tensor network or contraction request is malformed (unknown legs,
    double pairing, network not closed)."""


class NumericalIntegrityError(RuntimeError):
    """A numerical self-check failed (imaginary residue too large,
    non-convergence of an iterative method)."""


class InfeasibilityError(DomainError):
    """The gate-count evaluator cannot certify its error ledger for the
    requested localization length."""


class SaturationWarning(UserWarning):
    """Radius search hit its cap before reaching the requested accuracy;
    the achieved bound is attached to the warning."""
