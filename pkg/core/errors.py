"""
Errors
Exception hierarchy for the moment propagation engine
"""


class MomentsError(Exception):
    """
    Base class for all engine errors

    Subclasses set ``category``; the CLI maps it to an exit code.
    """

    category = 'internal'


class ConfigError(MomentsError):
    """Malformed or inconsistent job configuration"""

    category = 'config'


class ParseError(MomentsError):
    """
    Expression source could not be parsed

    Args:
        message: Human readable reason
        offset: Byte offset in the UTF-8 source where parsing failed
        expected: Set of token kinds that would have been accepted
    """

    category = 'parse'

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = message
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(f"{detail} at offset {offset}")


class ModelValidationError(MomentsError):
    """Stochastic model or density matrix failed validation"""

    category = 'config'


class NotPSDError(ModelValidationError):
    """
    Covariance is not positive semidefinite

    Args:
        pivot: Most negative Cholesky pivot encountered
        min_eigenvalue: Smallest eigenvalue of the symmetrized matrix
    """

    def __init__(self, pivot, min_eigenvalue):
        self.pivot = pivot
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"matrix is not positive semidefinite "
            f"(pivot {pivot!r}, smallest eigenvalue {min_eigenvalue!r})"
        )


class DimensionMismatchError(ModelValidationError):
    """Vector and matrix shapes disagree"""


class FamilyConstraintError(ModelValidationError):
    """Sampling family cannot realise the requested covariance"""


class NotSymmetricError(ModelValidationError):
    """Matrix asymmetry exceeds the tolerance"""


class DensityError(ModelValidationError):
    """Density analog is not unit trace"""


class InsufficientSamplesError(MomentsError):
    """Too few samples for the requested statistic"""

    category = 'config'


class DomainError(MomentsError):
    """
    Function evaluated outside its domain

    Args:
        message: Reason (e.g. 'log of a non-positive value')
        index: Offending sample index, if the failure came from a batch
        point: Offending point, if known
    """

    category = 'domain'

    def __init__(self, message, index=None, point=None):
        self.reason = message
        self.index = index
        self.point = None if point is None else tuple(float(v) for v in point)
        detail = message
        if index is not None:
            detail += f" at sample {index}"
        if self.point is not None:
            detail += f" (point {list(self.point)})"
        super().__init__(detail)


class NonFiniteError(DomainError):
    """Derivative propagation produced an infinite or NaN part"""


class PreconditionViolation(MomentsError):
    """
    Operation precondition does not hold

    Args:
        conditions: Names of the failed conditions, e.g. ['m_x = 0', 'f(0) = 0']
    """

    category = 'precondition'

    def __init__(self, conditions, detail=None):
        self.conditions = list(conditions)
        message = f"precondition failed: {', '.join(self.conditions)}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


EXIT_CODES = {
    'config': 2,
    'parse': 2,
    'domain': 3,
    'precondition': 4,
}


def exit_code_for(error):
    """
    Map an exception to the CLI exit status

    Args:
        error: Exception instance

    Returns:
        Integer exit code (1 for anything outside the hierarchy)
    """
    return EXIT_CODES.get(getattr(error, 'category', None), 1)
