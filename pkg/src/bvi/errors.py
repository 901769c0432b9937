"""Exception types shared across the package."""


class BviError(Exception):
    """Base class for all package errors."""


class InvalidInput(BviError):
    """Malformed or out-of-contract argument."""


class NotPositiveDefinite(BviError):
    """Cholesky factorization failed; the matrix is not positive definite."""


class DomainViolation(BviError):
    """Natural parameters fall outside the interior of the family domain."""


class DualDomainViolation(BviError):
    """Mean parameters have no preimage: the second-moment block minus the
    outer product of the mean block is not positive definite."""


class UnsupportedRegularizer(BviError):
    """Regularizer/family pairing with no closed-form proximal map."""


class OracleFailure(BviError):
    """Quadrature oracle hit a non-finite integrand."""
