"""Shared exception types for the exact-series pipeline."""


class KPError(Exception):
    """Base class for errors raised by this package."""


class NonUnitLeadingTerm(KPError):
    """Series operation required a unit series (constant term 1)."""


class WindowUnderflow(KPError):
    """A product monomial fell below the configured low exponent window."""


class CancellationFailure(KPError):
    """Monomials that must cancel identically survived the summation."""


class ExponentNotDivisible(KPError):
    """A 2^(1/3) bookkeeping exponent failed to fold on a nonzero value."""


class NotComputed(KPError):
    """Requested coefficient lies outside the computed/valid range."""


class ResonanceUnhandled(KPError):
    """Hypergeometric residue branch hit for an unsupported (a, b) pair."""


class QuadratureNoConverge(KPError):
    """Adaptive quadrature failed to reach the requested tail accuracy."""


class NonRealResult(KPError):
    """A quantity that must be real came back with a large imaginary part."""


class FixtureMissing(KPError):
    """A regression fixture file or table is absent."""
