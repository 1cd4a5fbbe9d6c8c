"""Exception hierarchy shared by every module of the package."""


class BCHError(Exception):
    """Base class for all package errors."""


class InputError(BCHError, ValueError):
    """Malformed or out-of-range input (caps, shapes, schema)."""


class SingularityError(BCHError, ArithmeticError):
    """A sinh/coth argument sits within ``delta`` of a zero of sinh.

    ``index`` is the 1-based position of the offending argument in the
    argument list handed to the failing function.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateTupleError(SingularityError):
    """An eigenvalue tuple hits a removable singularity of the order-N coefficient."""


class DecompositionError(BCHError):
    """Eigendecomposition is defective, ill conditioned or inaccurate."""


class BranchError(BCHError):
    """The principal matrix logarithm is undefined or unreliable."""
