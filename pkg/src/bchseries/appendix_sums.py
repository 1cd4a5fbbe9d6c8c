"""The constrained lattice sum behind the power series of ``M^m``.

    S_N(L_1..L_N) = 2^N  sum_{-(m-1)/2 <= n_1 < ... < n_N <= (m-1)/2}  prod_k exp(2 n_k L_k)

is computed both by enumeration and in closed form (one term per vertex of
the constraint simplex), and the coefficient ``F_N`` of ``B_1...B_N`` in
``M^m`` is assembled from it by summing over splittings of the string
``L_1 + ... + L_N``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .coeffs import DEFAULT_DELTA, CoeffTable, F_factor, compositions
from .errors import InputError, SingularityError

BRUTE_CAP = 10**7


@dataclass(frozen=True)
class SumSpec:
    """``N`` summation variables, lattice size ``m``, and the arguments ``L``."""

    m: int
    L: tuple[complex, ...]

    def __post_init__(self):
        L = tuple(complex(x) for x in np.atleast_1d(self.L))
        object.__setattr__(self, "L", L)
        if len(L) < 1:
            raise InputError("SumSpec needs at least one argument")
        if not isinstance(self.m, (int, np.integer)) or self.m < 0:
            raise InputError(f"m must be a nonnegative integer, got {self.m!r}")

    @property
    def N(self) -> int:
        return len(self.L)


def _sinh_checked(x: complex, delta: float, what: str, index: int) -> complex:
    s = np.sinh(x)
    if abs(s) < delta:
        raise SingularityError(f"{what}: sinh argument {index} within delta={delta:g} of a zero",
                               index=index)
    return complex(s)


def s_product(args, delta: float = DEFAULT_DELTA) -> complex:
    """``prod_j (coth(x_j) - 1)``; the empty product is 1."""
    out = 1.0 + 0j
    for i, x in enumerate(np.atleast_1d(np.asarray(args, dtype=complex)), start=1):
        out *= np.cosh(x) / _sinh_checked(x, delta, "s_product", i) - 1.0
    return complex(out)


def vertex_factor(args, delta: float = DEFAULT_DELTA) -> complex:
    """``s_{r-1}(x_1..x_{r-1}) / sinh(x_r)``; equal to 1 for ``r = 0``."""
    x = np.atleast_1d(np.asarray(args, dtype=complex))
    if x.size == 0:
        return 1.0 + 0j
    return s_product(x[:-1], delta) / _sinh_checked(x[-1], delta, "vertex_factor", len(x))


def _left_args(L: np.ndarray, r: int) -> np.ndarray:
    # (-L_r, -L_{r-1} - L_r, ..., -L_1 - ... - L_r)
    return -np.cumsum(L[:r][::-1])


def _right_args(L: np.ndarray, r: int) -> np.ndarray:
    # (L_{r+1}, L_{r+1} + L_{r+2}, ..., L_{r+1} + ... + L_N)
    return np.cumsum(L[r:])


def _vertex_exponent(L: np.ndarray, r: int, m: int) -> complex:
    return np.exp(m * (L[r:].sum() - L[:r].sum()))


def S_closed(spec: SumSpec, delta: float = DEFAULT_DELTA) -> complex:
    """Closed form: ``N + 1`` vertex terms, each a product of two vertex factors."""
    L = np.asarray(spec.L, dtype=complex)
    total = 0j
    for r in range(spec.N + 1):
        try:
            left = vertex_factor(_left_args(L, r), delta)
            right = vertex_factor(_right_args(L, r), delta)
        except SingularityError as exc:
            raise SingularityError(f"S_closed term r={r}: {exc}", index=r) from exc
        total += left * right * _vertex_exponent(L, r, spec.m)
    return complex(total)


def S_brute(spec: SumSpec) -> complex:
    """Direct enumeration of the strictly increasing lattice tuples.

    Lattice points are ``n = k - (m-1)/2`` for ``k = 0..m-1``; the code works
    with the integers ``2n`` so even ``m`` (half-integer points) is exact.
    """
    N, m = spec.N, spec.m
    count = math.comb(m, N) if m >= N else 0
    if count > BRUTE_CAP:
        raise InputError(f"enumeration of {count} tuples exceeds cap {BRUTE_CAP}")
    if count == 0:
        return 0j
    L = np.asarray(spec.L, dtype=complex)
    two_n = np.arange(m) * 2 - (m - 1)
    # exp(2 n_k L_k) for every lattice point and every position
    table = np.exp(np.outer(two_n, L))
    total = 0j
    for combo in itertools.combinations(range(m), N):
        total += np.prod(table[combo, np.arange(N)])
    return complex(2**N * total)


def _substring_sums(L: np.ndarray, parts: tuple[int, ...]) -> np.ndarray:
    edges = np.cumsum((0,) + parts)
    return np.array([L[edges[i]:edges[i + 1]].sum() for i in range(len(parts))])


def _split_weight(parts: tuple[int, ...]) -> float:
    return math.prod(2 ** (k - 1) / math.factorial(k) for k in parts)


def F_hat_from_partitions(spec: SumSpec, delta: float = DEFAULT_DELTA,
                          brute: bool = False) -> complex:
    """Coefficient of ``B_1...B_N`` in ``M^m`` (stripped of the outer ``e^{mA}``).

    Every splitting of ``L_1 + ... + L_N`` into consecutive substrings of
    lengths ``k_1..k_j`` contributes ``S_j(substring sums)`` times
    ``prod 2^(k-1)/k!``.  ``brute=True`` uses :func:`S_brute` for each ``S_j``.
    """
    if spec.N > 6:
        raise InputError("F_hat_from_partitions supports N <= 6")
    L = np.asarray(spec.L, dtype=complex)
    total = 0j
    for parts in compositions(spec.N):
        sub = SumSpec(m=spec.m, L=tuple(_substring_sums(L, parts)))
        S = S_brute(sub) if brute else S_closed(sub, delta)
        total += _split_weight(parts) * S
    return complex(total)


def F_hat_assembled(spec: SumSpec, table: CoeffTable | None = None,
                    delta: float = DEFAULT_DELTA) -> complex:
    """The same coefficient from the factorised form ``sum_r F_r F_{N-r} e^{m(...)}``."""
    L = np.asarray(spec.L, dtype=complex)
    total = 0j
    for r in range(spec.N + 1):
        left = F_factor(_left_args(L, r), table, delta)
        right = F_factor(_right_args(L, r), table, delta)
        total += left * right * _vertex_exponent(L, r, spec.m)
    return complex(total)


def lower_tail_sum(x: complex, two_n_max: int, tol: float = 1e-16,
                   max_terms: int = 100_000) -> complex:
    """``sum_{n <= n_max} exp(2 n x)`` by partial summation, ``n`` in steps of 1.

    ``n_max = two_n_max / 2`` may be a half-integer.  Needs ``Re(x) > 0``;
    stops once a term falls below ``tol`` times the running sum.
    """
    x = complex(x)
    if x.real <= 0:
        raise InputError("lower_tail_sum needs Re(x) > 0 for convergence")
    total = 0j
    k = two_n_max
    for _ in range(max_terms):
        term = np.exp(k * x)
        total += term
        if abs(term) < tol * max(abs(total), 1e-300):
            return complex(total)
        k -= 2
    raise InputError("lower_tail_sum did not converge")
