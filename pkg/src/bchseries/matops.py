"""Dense-matrix engine for the one-sided BCH series.

Everything is evaluated in the eigenbasis of ``A``: a string of commutator
operators ``L_i + ... + L_j`` acting on ``B_1 ... B_N`` becomes the scalar
``a_{n_i} - a_{n_{j+1}}`` on the index tuple ``(n_1, ..., n_{N+1})``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .coeffs import (
    DEFAULT_DELTA,
    CoeffTable,
    default_table,
    g_coefficient_unchecked,
    pairwise_min_sinh,
)
from .errors import BranchError, DecompositionError, InputError

logger = logging.getLogger(__name__)

ORDER_CAP = 6
DIM_CAP = 16
TUPLE_CAP = 10**8
CONDITION_CAP = 1e8
_BLOCK = 1 << 16


class BCHForm(str, Enum):
    SYMMETRIC = "symmetric"
    STANDARD = "standard"


@dataclass(frozen=True)
class FallbackPolicy:
    """How removable singularities of the order-N coefficient are resolved.

    A tuple whose smallest ``|sinh(a_i - a_j)|`` is below ``max(delta, gap)``
    is evaluated as the mean of the coefficient over ``nodes`` points
    ``eigs + z*u`` with ``z`` on a circle of ``radius`` and ``u`` spread
    linearly over tuple positions (spanning 1).  The mean of an analytic
    function over a circle is its centre value, so the error decays like
    ``(radius / distance-to-nearest-pole) ** nodes``.  ``nodes=2`` with a
    tiny radius is the plain symmetric ``+-eps`` average.
    """

    delta: float = DEFAULT_DELTA
    gap: float = 0.25
    radius: float = 1.0
    nodes: int = 32

    def __post_init__(self):
        if not (self.delta > 0 and self.radius > 0 and self.gap >= 0):
            raise InputError("fallback policy needs positive delta/radius and gap >= 0")
        if self.nodes < 2:
            raise InputError("fallback policy needs at least two nodes")

    @property
    def threshold(self) -> float:
        return max(self.delta, self.gap)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    basis: np.ndarray
    basis_inverse: np.ndarray
    condition: float

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def to_eigenbasis(self, M: np.ndarray) -> np.ndarray:
        return self.basis_inverse @ M @ self.basis

    def from_eigenbasis(self, M: np.ndarray) -> np.ndarray:
        return self.basis @ M @ self.basis_inverse


@dataclass
class TruncationReport:
    Z: np.ndarray
    order: int
    term_norms: list[float]
    fallback_count: int
    terms: list[np.ndarray] = field(default_factory=list, repr=False)
    oracle_error: float | None = None


@dataclass(frozen=True)
class MatrixPair:
    A: np.ndarray
    B: np.ndarray
    form: BCHForm = BCHForm.SYMMETRIC

    def __post_init__(self):
        A = as_square(self.A, "A")
        B = as_square(self.B, "B")
        if A.shape != B.shape:
            raise InputError(f"A is {A.shape} but B is {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "form", BCHForm(self.form))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def symmetric(self) -> tuple[np.ndarray, np.ndarray]:
        """The pair ``(A, B)`` of ``log(e^A e^{2B} e^A)`` describing the same logarithm."""
        if self.form is BCHForm.SYMMETRIC:
            return self.A, self.B
        return convert_form(self.A, self.B, BCHForm.SYMMETRIC)


def as_square(M, name: str = "matrix", cap: int | None = None) -> np.ndarray:
    arr = np.asarray(M, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise InputError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    if cap is not None and arr.shape[0] > cap:
        raise InputError(f"{name} has dimension {arr.shape[0]} > cap {cap}")
    return arr


def eigendecompose(A, condition_cap: float = CONDITION_CAP) -> Spectrum:
    """Diagonalise ``A`` with eigenvalues sorted by real then imaginary part.

    Hermitian input goes through ``eigh`` so the basis is unitary.  Raises
    :class:`DecompositionError` for defective or badly conditioned ``A``.
    """
    A = as_square(A, "A")
    if np.array_equal(A, A.conj().T):
        w, V = np.linalg.eigh(A)
        w = w.astype(complex)
    else:
        w, V = np.linalg.eig(A)
    order = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))
    w = w[order]
    V = V[:, order]
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > condition_cap:
        raise DecompositionError(
            f"eigendecomposition rejected: A is defective or ill conditioned "
            f"(cond(V)={cond:.3g} > {condition_cap:.3g})"
        )
    Vinv = np.linalg.inv(V)
    residual = np.linalg.norm(V @ np.diag(w) @ Vinv - A)
    scale = max(1.0, float(np.linalg.norm(A)))
    if residual > 1e-10 * scale:
        raise DecompositionError(
            f"eigendecomposition rejected: A appears defective (residual {residual:.3g})"
        )
    return Spectrum(eigenvalues=w, basis=V, basis_inverse=Vinv, condition=cond)


def mat_exp(M) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade, via SciPy)."""
    return scipy.linalg.expm(as_square(M))


def mat_log_principal(M, rtol: float = 1e-10) -> np.ndarray:
    """Principal logarithm of ``M``.

    Raises :class:`BranchError` if an eigenvalue of ``M`` lies on or next to
    the closed negative real axis, or if ``exp(log M)`` misses ``M`` by more
    than ``rtol`` relative.
    """
    M = as_square(M)
    lam = np.linalg.eigvals(M)
    scale = max(float(np.abs(lam).max()), 1e-300)
    for z in lam:
        if abs(z) <= 1e-14 * scale:
            raise BranchError("principal log undefined: M is singular")
        if z.real < 0 and abs(z.imag) <= 1e-8 * abs(z):
            raise BranchError(f"principal log undefined: eigenvalue {z:.6g} on the negative real axis")
    L, _ = scipy.linalg.logm(M, disp=False)
    L = np.asarray(L, dtype=complex)
    err = np.linalg.norm(scipy.linalg.expm(L) - M) / np.linalg.norm(M)
    if not np.isfinite(err) or err > rtol:
        raise BranchError(f"principal log round trip failed (relative error {err:.3g})")
    return L


def hadamard_conjugate(A, B, method: str = "direct", spectrum: Spectrum | None = None) -> np.ndarray:
    """``e^A B e^{-A}``.

    ``method="direct"`` multiplies matrix exponentials; ``method="eigen"``
    scales entry ``(i, j)`` of ``B`` in the eigenbasis of ``A`` by
    ``exp(a_i - a_j)``.
    """
    A = as_square(A, "A")
    B = as_square(B, "B")
    if A.shape != B.shape:
        raise InputError("A and B must have equal dimensions")
    if method == "direct":
        return mat_exp(A) @ B @ mat_exp(-A)
    if method == "eigen":
        spec = spectrum or eigendecompose(A)
        a = spec.eigenvalues
        return spec.from_eigenbasis(np.exp(a[:, None] - a[None, :]) * spec.to_eigenbasis(B))
    raise InputError(f"unknown method {method!r}")


def convert_form(X, Y, to: BCHForm | str) -> tuple[np.ndarray, np.ndarray]:
    """Map between the standard pair of ``log(e^X e^Y)`` and the symmetric pair.

    ``to="symmetric"``: ``(X, Y) -> (X/2, e^{X/2} Y e^{-X/2} / 2)``.
    ``to="standard"``:  ``(A, B) -> (2A, 2 e^{-A} B e^{A})``.
    """
    X = as_square(X, "X")
    Y = as_square(Y, "Y")
    if X.shape != Y.shape:
        raise InputError("matrices must have equal dimensions")
    to = BCHForm(to)
    if to is BCHForm.SYMMETRIC:
        return X / 2, hadamard_conjugate(X / 2, Y) / 2
    return 2 * X, 2 * hadamard_conjugate(-X, Y)


def _first_order_weight(w: np.ndarray) -> np.ndarray:
    # w / (2 sinh(w/2)) * e^{w/2} == w / (1 - e^{-w}), limit 1 at w = 0
    out = np.ones_like(w)
    nz = np.abs(w) > 1e-300
    out[nz] = w[nz] / -np.expm1(-w[nz])
    return out


def bch_first_order_standard(X, Y, spectrum: Spectrum | None = None) -> np.ndarray:
    """``X + L/(2 sinh(L/2)) e^{L/2} Y`` with ``L = [X, .]``: exact in X, linear in Y."""
    X = as_square(X, "X")
    Y = as_square(Y, "Y")
    spec = spectrum or eigendecompose(X)
    a = spec.eigenvalues
    weight = _first_order_weight(a[:, None] - a[None, :])
    return X + spec.from_eigenbasis(weight * spec.to_eigenbasis(Y))


def apply_string_function(g: Callable, i: int, j: int, spectrum: Spectrum,
                          Bs: Sequence[np.ndarray]) -> np.ndarray:
    """``g(L_i + ... + L_j) B_1 ... B_N`` with 1-based, inclusive ``i..j``.

    In the eigenbasis each index tuple is weighted by ``g(a_{n_i} - a_{n_{j+1}})``.
    """
    N = len(Bs)
    if not (1 <= i <= j <= N):
        raise InputError(f"need 1 <= i <= j <= {N}, got i={i}, j={j}")
    d = spectrum.dim
    Bt = [spectrum.to_eigenbasis(as_square(B, "B")) for B in Bs]
    ident = np.eye(d, dtype=complex)
    left = _chain(Bt[: i - 1], ident)
    mid = _chain(Bt[i - 1: j], ident)
    right = _chain(Bt[j:], ident)
    a = spectrum.eigenvalues
    weight = np.asarray(g(a[:, None] - a[None, :]), dtype=complex) * np.ones((d, d))
    return spectrum.from_eigenbasis(left @ (weight * mid) @ right)


def _chain(mats, ident):
    out = ident
    for M in mats:
        out = out @ M
    return out


def g_regularized(eigs: np.ndarray, policy: FallbackPolicy,
                  table: CoeffTable | None = None) -> tuple[np.ndarray, int]:
    """Order-N coefficient for a batch of tuples, shape ``(M, N+1)``.

    Near-degenerate tuples are routed through the circle average of
    :class:`FallbackPolicy`; returns the values and how many were routed.
    """
    table = table or default_table()
    eigs = np.asarray(eigs, dtype=complex)
    out = np.empty(eigs.shape[0], dtype=complex)
    degenerate = pairwise_min_sinh(eigs) < policy.threshold
    if np.any(~degenerate):
        out[~degenerate] = g_coefficient_unchecked(eigs[~degenerate], table)
    idx = np.flatnonzero(degenerate)
    for start in range(0, len(idx), 4096):
        sel = idx[start:start + 4096]
        out[sel] = _circle_average(eigs[sel], policy, table)
    return out, int(degenerate.sum())


def _circle_average(eigs: np.ndarray, policy: FallbackPolicy, table: CoeffTable) -> np.ndarray:
    n = eigs.shape[-1]
    u = np.linspace(-0.5, 0.5, n)
    # Keep the circle clear of the genuine poles at nonzero multiples of i*pi.
    i, j = np.triu_indices(n, k=1)
    diff = eigs[:, i] - eigs[:, j]
    k = np.round(diff.imag / np.pi)
    k = np.where(k == 0, np.where(diff.imag >= 0, 1, -1), k)
    dist = np.abs(diff - 1j * np.pi * k).min(axis=-1)
    radius = np.clip(np.minimum(policy.radius, dist / 2.5), 1e-3, None)
    theta = 2 * np.pi * (np.arange(policy.nodes) + 0.5) / policy.nodes
    z = radius[:, None] * np.exp(1j * theta)[None, :]
    pts = eigs[:, None, :] + z[:, :, None] * u[None, None, :]
    return g_coefficient_unchecked(pts, table).mean(axis=-1)


def order_term(spectrum: Spectrum, Bt: np.ndarray, k: int, policy: FallbackPolicy,
               table: CoeffTable | None = None) -> tuple[np.ndarray, int]:
    """Order-``k`` term in the eigenbasis: returns ``(T_k~, fallback_count)``.

    ``[T_k~]_{n1, nk+1} = sum_{n2..nk} G_k(a_{n1}, ..., a_{nk+1}) B~_{n1 n2} ... B~_{nk nk+1}``.
    """
    a = spectrum.eigenvalues
    d = len(a)
    T = np.zeros((d, d), dtype=complex)
    lead = 0
    while d ** (k + 1 - lead) > _BLOCK:
        lead += 1
    free = k + 1 - lead
    grid = np.indices((d,) * free).reshape(free, -1).T
    fallbacks = 0
    for prefix in itertools.product(range(d), repeat=lead):
        idx = np.hstack([np.broadcast_to(np.array(prefix, dtype=int), (len(grid), lead)), grid])
        weight = np.ones(len(idx), dtype=complex)
        for pos in range(k):
            weight = weight * Bt[idx[:, pos], idx[:, pos + 1]]
        live = weight != 0
        if not np.any(live):
            continue
        G, n_fb = g_regularized(a[idx[live]], policy, table)
        fallbacks += n_fb
        np.add.at(T, (idx[live, 0], idx[live, -1]), G * weight[live])
    return T, fallbacks


def bch_truncated(A, B, N: int, policy: FallbackPolicy | None = None,
                  spectrum: Spectrum | None = None, table: CoeffTable | None = None,
                  compare_oracle: bool = False) -> TruncationReport:
    """Truncation of ``log(e^A e^{2B} e^A)`` after order ``N`` in ``B``.

    ``Z_N = 2A + T_1 + ... + T_N``; every power of ``A`` is retained.
    Tuples whose weight product is exactly zero are skipped and not counted
    as fallbacks.
    """
    A = as_square(A, "A", DIM_CAP)
    B = as_square(B, "B", DIM_CAP)
    if A.shape != B.shape:
        raise InputError("A and B must have equal dimensions")
    if not isinstance(N, (int, np.integer)) or N < 0 or N > ORDER_CAP:
        raise InputError(f"order must be an integer in 0..{ORDER_CAP}, got {N!r}")
    d = A.shape[0]
    if d ** (N + 1) > TUPLE_CAP:
        raise InputError(f"d**(N+1) = {d ** (N + 1)} exceeds the tuple cap {TUPLE_CAP}")
    policy = policy or FallbackPolicy()
    spec = spectrum or eigendecompose(A)
    Bt = spec.to_eigenbasis(B)
    Z = 2 * A
    terms, norms, fallbacks = [], [], 0
    for k in range(1, N + 1):
        Tt, n_fb = order_term(spec, Bt, k, policy, table)
        T = spec.from_eigenbasis(Tt)
        terms.append(T)
        norms.append(float(np.linalg.norm(T)))
        fallbacks += n_fb
        Z = Z + T
    logger.debug("order %d: %d fallback tuples", N, fallbacks)
    report = TruncationReport(Z=Z, order=N, term_norms=norms, fallback_count=fallbacks, terms=terms)
    if compare_oracle:
        from .oracle import direct_Z

        report.oracle_error = float(np.linalg.norm(Z - direct_Z(A, B)))
    return report
