"""Scalar coefficient objects of the one-sided BCH series.

Exact rationals (``t_r`` from tanh, ``a_r = 2**(r-1)/r!``) are computed once
and cached; the hyperbolic functions ``f``, ``F`` and the order-N
coefficient ``G_N`` are evaluated in floating point.

Every evaluator accepts array-like arguments whose *last* axis indexes the
argument list, so a single call can evaluate many tuples at once.  Scalar
tuples give back a Python ``complex``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegenerateTupleError, InputError, SingularityError

MAX_ORDER = 32
COMPOSITION_CAP = 20
DEFAULT_DELTA = 1e-6


@functools.lru_cache(maxsize=None)
def tanh_taylor(k_max: int) -> tuple[Fraction, ...]:
    """Return the exact Taylor coefficients ``t_0..t_k_max`` of tanh at 0.

    Computed by dividing the sinh series by the cosh series.
    """
    if not isinstance(k_max, int) or k_max < 1:
        raise InputError(f"k_max must be a positive integer, got {k_max!r}")
    if k_max > MAX_ORDER:
        raise InputError(f"k_max={k_max} exceeds the cap {MAX_ORDER}")
    sinh = [Fraction(k % 2, math.factorial(k)) for k in range(k_max + 1)]
    cosh = [Fraction((k + 1) % 2, math.factorial(k)) for k in range(k_max + 1)]
    t: list[Fraction] = []
    for n in range(k_max + 1):
        acc = sinh[n] - sum((cosh[k] * t[n - k] for k in range(1, n + 1)), Fraction(0))
        t.append(acc / cosh[0])
    return tuple(t)


def a_coeff(r: int) -> Fraction:
    """``a_r = 2**(r-1) / r!``, the weight of ``r - 1`` skipped factors."""
    if not isinstance(r, int) or r < 1:
        raise InputError(f"a_coeff needs r >= 1, got {r!r}")
    return Fraction(2 ** (r - 1), math.factorial(r))


@functools.lru_cache(maxsize=None)
def compositions(r: int) -> tuple[tuple[int, ...], ...]:
    """All ordered tuples of positive integers summing to ``r``, lexicographic.

    >>> compositions(3)
    ((1, 1, 1), (1, 2), (2, 1), (3,))
    """
    if not isinstance(r, int) or r < 1:
        raise InputError(f"compositions needs r >= 1, got {r!r}")
    if r > COMPOSITION_CAP:
        raise InputError(f"r={r} exceeds the composition cap {COMPOSITION_CAP}")
    # Each of the r-1 gaps between unit cells is either a cut or not.
    out = []
    for mask in range(1 << (r - 1)):
        parts = []
        run = 1
        for gap in range(r - 1):
            if mask >> gap & 1:
                run += 1
            else:
                parts.append(run)
                run = 1
        parts.append(run)
        out.append(tuple(parts))
    out.sort()
    return tuple(out)


@dataclass(frozen=True)
class CoeffTable:
    """Cached exact coefficients ``t_0..t_k_max`` and ``a_1..a_k_max``.

    ``a`` is stored with a leading placeholder so that ``a[r]`` is ``a_r``.
    """

    k_max: int
    t: tuple[Fraction, ...] = field(repr=False)
    a: tuple[Fraction, ...] = field(repr=False)

    @classmethod
    def build(cls, k_max: int = MAX_ORDER) -> "CoeffTable":
        t = tanh_taylor(k_max)
        a = (Fraction(0),) + tuple(a_coeff(r) for r in range(1, k_max + 1))
        return cls(k_max=k_max, t=t, a=a)

    @functools.cached_property
    def t_float(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.t)

    @functools.cached_property
    def a_float(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.a)

    def a_list(self) -> list[Fraction]:
        """``[a_1, ..., a_k_max]``."""
        return list(self.a[1:])


@functools.lru_cache(maxsize=None)
def default_table() -> CoeffTable:
    return CoeffTable.build(MAX_ORDER)


def _as_args(args) -> np.ndarray:
    arr = np.asarray(args, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


def _finish(value):
    if np.ndim(value) == 0:
        return complex(value) if np.iscomplexobj(value) else float(value)
    return value


def _check_sinh(args: np.ndarray, delta: float, what: str) -> None:
    if args.shape[-1] == 0:
        return
    bad = np.abs(np.sinh(args)) < delta
    if np.any(bad):
        idx = int(np.argmax(bad.reshape(-1, args.shape[-1]).any(axis=0))) + 1
        raise SingularityError(
            f"{what}: argument {idx} is within delta={delta:g} of a sinh zero", index=idx
        )


def _coth(x):
    return np.cosh(x) / np.sinh(x)


def _table(table: CoeffTable | None, r: int) -> CoeffTable:
    table = table or default_table()
    if r > table.k_max:
        raise InputError(f"order {r} exceeds the coefficient table cap {table.k_max}")
    return table


# Unchecked kernels.  ``c`` holds coth values, shape (..., r-1).

def _f_t_kernel(c: np.ndarray, r: int, table: CoeffTable):
    t = table.t_float
    total = np.zeros(c.shape[:-1], dtype=complex)
    for parts in compositions(r):
        coef = math.prod(t[q] for q in parts)
        if coef == 0.0:
            continue
        term = np.full(c.shape[:-1], coef, dtype=complex)
        pos = 0
        for q in parts[1:]:
            pos += q
            term = term * c[..., pos - 1]
        total = total + term
    return total


def _f_a_kernel(c: np.ndarray, r: int, table: CoeffTable):
    a = table.a_float
    shifted = c - 1.0
    total = np.zeros(c.shape[:-1], dtype=complex)
    for parts in compositions(r):
        term = np.full(c.shape[:-1], math.prod(a[q] for q in parts), dtype=complex)
        pos = 0
        for q in parts[:-1]:
            pos += q
            term = term * shifted[..., pos - 1]
        total = total + term
    return total


def _F_kernel(x: np.ndarray, table: CoeffTable):
    r = x.shape[-1]
    if r == 0:
        return np.ones(x.shape[:-1], dtype=complex)
    c = _coth(x[..., :-1])
    return _f_t_kernel(c, r, table) / np.sinh(x[..., -1])


def f_via_t(args, table: CoeffTable | None = None, delta: float = DEFAULT_DELTA):
    """``f_{r-1}`` as a sum over compositions weighted by tanh coefficients.

    Each composition ``(p_0, ..., p_n)`` of ``r`` contributes
    ``t_{p_0}...t_{p_n} coth(x_{p_1}) coth(x_{p_1+p_2}) ... coth(x_{p_1+...+p_n})``.
    """
    x = _as_args(args)
    r = x.shape[-1] + 1
    table = _table(table, r)
    _check_sinh(x, delta, "f_via_t")
    return _finish(_f_t_kernel(_coth(x), r, table))


def f_via_a(args, table: CoeffTable | None = None, delta: float = DEFAULT_DELTA):
    """``f_{r-1}`` from products of ``coth - 1`` weighted by ``a_p`` coefficients.

    Independent of :func:`f_via_t`; the two agree identically because the
    ``t_r`` are generated by tanh.
    """
    x = _as_args(args)
    r = x.shape[-1] + 1
    table = _table(table, r)
    _check_sinh(x, delta, "f_via_a")
    return _finish(_f_a_kernel(_coth(x), r, table))


def F_factor(args, table: CoeffTable | None = None, delta: float = DEFAULT_DELTA):
    """``F_r(x_1..x_r) = f_{r-1}(x_1..x_{r-1}) / sinh(x_r)``, with ``F_0 = 1``."""
    x = np.asarray(args, dtype=complex)
    if x.ndim == 0:
        x = x.reshape(1)
    r = x.shape[-1]
    table = _table(table, max(r, 1))
    _check_sinh(x, delta, "F_factor")
    return _finish(_F_kernel(x, table))


def pivot_arguments(eigs: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Arguments of the two F factors in term ``r`` of the order-N coefficient.

    With pivot ``p = eigs[r]`` (0-based), returns
    ``u = (p - eigs[r-1], ..., p - eigs[0])`` and
    ``v = (p - eigs[r+1], ..., p - eigs[N])``.
    """
    p = eigs[..., r:r + 1]
    u = p - eigs[..., :r][..., ::-1]
    v = p - eigs[..., r + 1:]
    return u, v


def _g_kernel(eigs: np.ndarray, table: CoeffTable):
    N = eigs.shape[-1] - 1
    outer = eigs[..., 0] + eigs[..., N]
    total = np.zeros(eigs.shape[:-1], dtype=complex)
    for r in range(N + 1):
        u, v = pivot_arguments(eigs, r)
        total = total + _F_kernel(u, table) * _F_kernel(v, table) * (2 * eigs[..., r] - outer)
    return total


def convolution_sum(eigs, table: CoeffTable | None = None, delta: float = DEFAULT_DELTA):
    """``sum_r F_r(u_r) F_{N-r}(v_r)`` and the largest term modulus.

    The sum vanishes identically for ``N >= 1``.
    """
    e = _as_args(eigs)
    N = e.shape[-1] - 1
    table = _table(table, max(N, 1))
    _check_pairwise(e, delta)
    terms = []
    for r in range(N + 1):
        u, v = pivot_arguments(e, r)
        terms.append(_F_kernel(u, table) * _F_kernel(v, table))
    terms = np.stack(terms, axis=-1)
    return _finish(terms.sum(axis=-1)), _finish(np.abs(terms).max(axis=-1))


def pairwise_min_sinh(eigs: np.ndarray) -> np.ndarray:
    """Smallest ``|sinh(e_i - e_j)|`` over distinct positions of each tuple."""
    n = eigs.shape[-1]
    if n < 2:
        return np.full(eigs.shape[:-1], np.inf)
    i, j = np.triu_indices(n, k=1)
    return np.abs(np.sinh(eigs[..., i] - eigs[..., j])).min(axis=-1)


def _check_pairwise(e: np.ndarray, delta: float) -> None:
    if np.any(pairwise_min_sinh(e) < delta):
        raise DegenerateTupleError(
            f"eigenvalue tuple has a difference within delta={delta:g} of a sinh zero"
        )


def g_coefficient(N: int, eigs, table: CoeffTable | None = None,
                  delta: float = DEFAULT_DELTA):
    """Scalar weight of ``B_{n1 n2} ... B_{nN nN+1}`` in the order-N term.

    ``eigs`` holds ``(a_{n_1}, ..., a_{n_{N+1}})``.  Term ``r`` of the sum is
    ``F_r(u) F_{N-r}(v) (2 a_{n_{r+1}} - a_{n_1} - a_{n_{N+1}})`` with the
    arguments of :func:`pivot_arguments`.

    Raises :class:`DegenerateTupleError` when any pairwise difference is within
    ``delta`` of a sinh zero; every such point is a removable singularity and
    callers decide how to take the limit.
    """
    if not isinstance(N, int) or N < 1:
        raise InputError(f"g_coefficient needs N >= 1, got {N!r}")
    e = _as_args(eigs)
    if e.shape[-1] != N + 1:
        raise InputError(f"order {N} needs {N + 1} eigenvalues, got {e.shape[-1]}")
    table = _table(table, N)
    _check_pairwise(e, delta)
    return _finish(_g_kernel(e, table))


def g_coefficient_unchecked(eigs: np.ndarray, table: CoeffTable | None = None) -> np.ndarray:
    """Vectorised :func:`g_coefficient` without the degeneracy check."""
    e = np.asarray(eigs, dtype=complex)
    return _g_kernel(e, _table(table, max(e.shape[-1] - 1, 1)))
