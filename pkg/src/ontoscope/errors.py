"""Exception hierarchy shared by every module."""


class OntoscopeError(Exception):
    """Base class for all errors raised by ontoscope."""


class DomainError(OntoscopeError, ValueError):
    pass


class SubsystemOverflow(OntoscopeError, OverflowError):
    pass


class UnsupportedPair(OntoscopeError, ValueError):
    pass


class DimensionMismatch(OntoscopeError, ValueError):
    pass


class LabelMismatch(OntoscopeError, ValueError):
    pass


class InvalidModel(OntoscopeError, ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SpaceMismatch(OntoscopeError, ValueError):
    pass


class ArityMismatch(OntoscopeError, ValueError):
    pass


class ShapeMismatch(OntoscopeError, ValueError):
    pass


class IllDefinedMarginal(OntoscopeError, ValueError):
    """A single-site (or subset) marginal depends on preparations elsewhere.

    ``contexts`` holds the two conflicting joint preparations.
    """

    def __init__(self, message, site=None, contexts=None, discrepancy=None):
        super().__init__(message)
        self.site = site
        self.contexts = contexts
        self.discrepancy = discrepancy


class SearchSpaceTooLarge(OntoscopeError, ValueError):
    pass


class NotProductForm(OntoscopeError, ValueError):
    pass


class PreconditionFailed(OntoscopeError, ValueError):
    def __init__(self, check, message=None):
        super().__init__(message or f"precondition failed: {check}")
        self.check = check


class NotSymmetric(OntoscopeError, ValueError):
    pass


class NumericalBreakdown(OntoscopeError, ArithmeticError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Infeasible(OntoscopeError):
    """No point satisfies the constraints; ``solution`` carries the Farkas certificate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ParameterDependence(OntoscopeError, ValueError):
    def __init__(self, message, contexts=None):
        super().__init__(message)
        self.contexts = contexts


class UndefinedPosterior(OntoscopeError, ValueError):
    pass


class SchemaViolation(OntoscopeError, ValueError):
    """Input document does not match its JSON schema."""
