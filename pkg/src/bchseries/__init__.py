"""Baker-Campbell-Hausdorff logarithm as an exact power series in one matrix.

``log(e^A e^{2B} e^A)`` is expanded in powers of ``B`` with every power of
``A`` retained; ``log(e^X e^Y)`` is reached through :func:`convert_form`.
"""

from .coeffs import (
    CoeffTable,
    F_factor,
    a_coeff,
    compositions,
    f_via_a,
    f_via_t,
    g_coefficient,
    tanh_taylor,
)
from .errors import (
    BCHError,
    BranchError,
    DecompositionError,
    DegenerateTupleError,
    InputError,
    SingularityError,
)
from .matops import (
    BCHForm,
    FallbackPolicy,
    MatrixPair,
    Spectrum,
    TruncationReport,
    apply_string_function,
    bch_first_order_standard,
    bch_truncated,
    convert_form,
    eigendecompose,
    hadamard_conjugate,
    mat_exp,
    mat_log_principal,
)
from .oracle import SweepGrid, convergence_slope, direct_Z, series_coefficient

__version__ = "0.1.0"
