"""Seeded fixtures, error sweeps and the self-verification suite.

Each check draws its own random stream from the master seed, so reordering
or skipping checks never changes the numbers another check sees.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import coeffs
from .appendix_sums import S_brute, S_closed, SumSpec
from .errors import BranchError, SingularityError
from .matops import (
    BCHForm,
    FallbackPolicy,
    bch_first_order_standard,
    bch_truncated,
    convert_form,
    hadamard_conjugate,
)
from .oracle import SweepGrid, convergence_slope, direct_Z, with_branch_retry

logger = logging.getLogger(__name__)

SAMPLE_GAP = 1e-3


# ---------------------------------------------------------------- fixtures

def real_spectrum_matrix(rng: np.random.Generator, d: int, norm: float = 2.0) -> np.ndarray:
    """Non-normal, diagonalisable, real spectrum, spectral norm ``norm``."""
    lam = rng.uniform(-1.0, 1.0, d)
    W = np.eye(d) + 0.3 * rng.normal(size=(d, d)) / np.sqrt(d)
    A = W @ np.diag(lam) @ np.linalg.inv(W)
    return A * (norm / np.linalg.norm(A, 2))


def unit_matrix(rng: np.random.Generator, d: int, complex_entries: bool = False) -> np.ndarray:
    B = rng.normal(size=(d, d))
    if complex_entries:
        B = B + 1j * rng.normal(size=(d, d))
    return B / np.linalg.norm(B)


def sweep_fixture(seed: int, d: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """The default sweep pair: ``||A||_2 = 2`` with real spectrum, ``||B||_F = 1``."""
    rng = np.random.default_rng(seed)
    return real_spectrum_matrix(rng, d), unit_matrix(rng, d)


def nondegenerate_reals(rng: np.random.Generator, n: int, low: float, high: float,
                        gap: float = SAMPLE_GAP) -> np.ndarray:
    """``n`` uniform reals whose pairwise ``|sinh|`` differences exceed ``gap``."""
    while True:
        x = rng.uniform(low, high, n)
        if coeffs.pairwise_min_sinh(x) >= gap:
            return x


def substring_args_ok(L: np.ndarray, gap: float = SAMPLE_GAP) -> bool:
    """Every contiguous substring sum of ``L`` has ``|sinh| >= gap``."""
    n = len(L)
    c = np.concatenate([[0.0], np.cumsum(L)])
    return all(abs(np.sinh(c[j] - c[i])) >= gap for i in range(n) for j in range(i + 1, n + 1))


# ------------------------------------------------------------ error sweeps

@dataclass
class SweepResult:
    rows: list[tuple[float, int, float]]
    slopes: dict[int, float]
    grid: SweepGrid


def error_sweep(A, B, orders, grid: SweepGrid, policy: FallbackPolicy | None = None) -> SweepResult:
    """Truncation error ``||Z_N(A, tB) - direct_Z(A, tB)||_F`` over a grid.

    The engine terms are computed once at ``t = 1`` and rescaled by ``t**k``
    (each order-k term is homogeneous of degree k in B).
    """
    orders = list(orders)
    report = bch_truncated(A, B, max(orders), policy=policy)
    A = np.asarray(A, dtype=complex)

    def run(g: SweepGrid):
        refs = [direct_Z(A, t * B) for t in g]
        rows = []
        for N in orders:
            for t, ref in zip(g, refs):
                Z = 2 * A + sum(t**k * report.terms[k - 1] for k in range(1, N + 1))
                rows.append((t, N, float(np.linalg.norm(Z - ref))))
        return rows

    rows, used = with_branch_retry(run, grid)
    slopes = {}
    for N in orders:
        pairs = [(t, e) for t, n, e in rows if n == N]
        try:
            slopes[N] = convergence_slope(pairs)
        except ValueError:
            slopes[N] = float("nan")
    return SweepResult(rows=rows, slopes=slopes, grid=used)


# ------------------------------------------------------- finite examples

def _coth(x):
    return np.cosh(x) / np.sinh(x)


def finite_example_G(N: int, eigs) -> complex:
    """Hand-written order 1..3 coefficients with ``L_i -> e_i - e_{i+1}``.

    The middle term of order 2 uses ``coth(-L_2)``, as the general formula
    requires.
    """
    e = np.asarray(eigs, dtype=complex)
    L = e[:-1] - e[1:]
    sh = np.sinh
    if N == 1:
        x = L[0]
        return complex(x / sh(x) + (-x) / sh(-x))
    if N == 2:
        L1, L2 = L
        return complex(
            _coth(L1) / sh(L1 + L2) * (L1 + L2)
            + 1 / sh(-L1) / sh(L2) * (-L1 + L2)
            + _coth(-L2) / sh(-L1 - L2) * (-L1 - L2)
        )
    if N == 3:
        L1, L2, L3 = L
        return complex(
            (_coth(L1) * _coth(L1 + L2) - 1 / 3) / sh(L1 + L2 + L3) * (L1 + L2 + L3)
            + 1 / sh(-L1) * _coth(L2) / sh(L2 + L3) * (-L1 + L2 + L3)
            + _coth(-L2) / sh(-L1 - L2) / sh(L3) * (-L1 - L2 + L3)
            + (_coth(-L3) * _coth(-L2 - L3) - 1 / 3) / sh(-L1 - L2 - L3) * (-L1 - L2 - L3)
        )
    raise ValueError("finite examples exist for N = 1, 2, 3")


# ------------------------------------------------------------ the suite

@dataclass
class CheckResult:
    name: str
    samples: int
    skipped: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.skipped == 0 and self.samples > 0 and self.max_error <= self.tolerance


class _Tally:
    def __init__(self, name, tolerance):
        self.name, self.tolerance = name, tolerance
        self.samples = self.skipped = 0
        self.max_error = 0.0

    def run(self, fn: Callable[[], float]):
        try:
            err = float(fn())
        except SingularityError as exc:
            self.skipped += 1
            logger.info("%s: sample rejected (%s)", self.name, exc)
            return
        self.samples += 1
        if not np.isfinite(err):
            err = np.inf
        self.max_error = max(self.max_error, err)

    def result(self) -> CheckResult:
        return CheckResult(self.name, self.samples, self.skipped, self.max_error, self.tolerance)


def _rel(x, y, floor=1.0):
    return abs(x - y) / max(floor, abs(y))


def _rel_mat(X, Y):
    return np.linalg.norm(X - Y) / max(np.linalg.norm(Y), 1e-300)


def check_dual_form(rng, delta, points=100, max_len=6) -> CheckResult:
    tally = _Tally("dual_form_f", 1e-10)
    for n in range(max_len + 1):
        for _ in range(points):
            while True:
                x = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
                if n == 0 or np.abs(np.sinh(x)).min() >= SAMPLE_GAP:
                    break
            tally.run(lambda: _rel(coeffs.f_via_t(x, delta=delta), coeffs.f_via_a(x, delta=delta)))
    return tally.result()


def check_appendix(rng, delta, points=50, max_N=4, ms=(0, 1, 2, 3, 5, 8)) -> CheckResult:
    tally = _Tally("appendix_S_closed_vs_brute", 1e-9)
    for N in range(1, max_N + 1):
        for m in ms:
            for _ in range(points):
                while True:
                    L = rng.uniform(-1, 1, N)
                    if substring_args_ok(L):
                        break
                spec = SumSpec(m=m, L=tuple(L))
                tally.run(lambda: _rel(S_closed(spec, delta), S_brute(spec)))
    return tally.result()


def check_convolution(rng, delta, points=50, max_N=6) -> CheckResult:
    tally = _Tally("convolution_identity", 1e-10)
    for N in range(1, max_N + 1):
        for _ in range(points):
            e = nondegenerate_reals(rng, N + 1, -2, 2)

            def err():
                total, biggest = coeffs.convolution_sum(e, delta=delta)
                return abs(total) / biggest
            tally.run(err)
    return tally.result()


def check_finite_examples(rng, delta, points=50) -> CheckResult:
    tally = _Tally("finite_examples_G1_G3", 1e-12)
    for N in (1, 2, 3):
        for _ in range(points):
            e = nondegenerate_reals(rng, N + 1, -2, 2)
            tally.run(lambda: _rel(coeffs.g_coefficient(N, e, delta=delta),
                                   finite_example_G(N, e), floor=0.0))
    return tally.result()


def check_hadamard(rng, points=50) -> CheckResult:
    tally = _Tally("hadamard_two_path", 1e-10)
    for _ in range(points):
        d = int(rng.integers(2, 6))
        A = real_spectrum_matrix(rng, d, norm=float(rng.uniform(0.5, 2.0)))
        B = unit_matrix(rng, d, complex_entries=True)
        tally.run(lambda: _rel_mat(hadamard_conjugate(A, B, "eigen"), hadamard_conjugate(A, B)))
    return tally.result()


def check_first_order(rng, policy, points=20) -> CheckResult:
    tally = _Tally("first_order_cross_form", 1e-10)
    for _ in range(points):
        d = int(rng.integers(2, 6))
        X = real_spectrum_matrix(rng, d, norm=float(rng.uniform(0.5, 3.0)))
        Y = unit_matrix(rng, d, complex_entries=True)

        def err():
            A, B = convert_form(X, Y, BCHForm.SYMMETRIC)
            rep = bch_truncated(A, B, 1, policy=policy)
            return _rel_mat(2 * A + rep.terms[0], bch_first_order_standard(X, Y))
        tally.run(err)
    return tally.result()


def run_suite(seed: int = 0, delta: float = coeffs.DEFAULT_DELTA, max_order: int = 6,
              policy: FallbackPolicy | None = None) -> list[CheckResult]:
    policy = policy or FallbackPolicy(delta=delta)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(6)]
    results = [
        check_dual_form(streams[0], delta),
        check_appendix(streams[1], delta),
        check_convolution(streams[2], delta, max_N=max(1, max_order)),
        check_finite_examples(streams[3], delta),
        check_hadamard(streams[4]),
        check_first_order(streams[5], policy),
    ]
    for r in results:
        logger.info("%s: %s (samples=%d skipped=%d max_error=%.3g tol=%.1g)", r.name,
                    "pass" if r.passed else "FAIL", r.samples, r.skipped, r.max_error, r.tolerance)
    return results
