"""Independent references: the logarithm computed directly, series
coefficients extracted by polynomial fitting, and log-log slope fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BranchError, InputError
from .matops import as_square, mat_exp, mat_log_principal

logger = logging.getLogger(__name__)

ERROR_FLOOR = 1e-13
MAX_HALVINGS = 3


@dataclass(frozen=True)
class SweepGrid:
    """Strictly increasing positive ``t`` values spanning at least a decade."""

    t_values: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.t_values)
        object.__setattr__(self, "t_values", t)
        if len(t) < 4:
            raise InputError(f"a sweep grid needs at least 4 points, got {len(t)}")
        if t[0] <= 0 or any(b <= a for a, b in zip(t, t[1:])):
            raise InputError("sweep grid values must be positive and strictly increasing")
        if t[-1] / t[0] < 10:
            raise InputError("sweep grid must span a factor of at least 10")

    @classmethod
    def logspace(cls, lo: float, hi: float, count: int) -> "SweepGrid":
        if lo <= 0 or hi <= 0:
            raise InputError("grid endpoints must be positive")
        return cls(tuple(np.geomspace(lo, hi, int(count))))

    @classmethod
    def parse(cls, text: str) -> "SweepGrid":
        """Parse ``lo:hi:count`` (log spaced)."""
        try:
            lo, hi, count = text.split(":")
            return cls.logspace(float(lo), float(hi), int(count))
        except ValueError as exc:
            raise InputError(f"bad t-grid {text!r}: {exc}") from exc

    def scaled(self, factor: float) -> "SweepGrid":
        return SweepGrid(tuple(factor * t for t in self.t_values))

    def __len__(self):
        return len(self.t_values)

    def __iter__(self):
        return iter(self.t_values)


def direct_Z(A, B) -> np.ndarray:
    """``log(e^A e^{2B} e^A)`` by dense exponentials and the principal logarithm."""
    A = as_square(A, "A")
    B = as_square(B, "B")
    eA = mat_exp(A)
    return mat_log_principal(eA @ mat_exp(2 * B) @ eA)


def with_branch_retry(fn: Callable[[SweepGrid], object], grid: SweepGrid,
                      max_halvings: int = MAX_HALVINGS):
    """Call ``fn(grid)``, halving every ``t`` after a :class:`BranchError`.

    Returns ``(result, grid_used)``; re-raises after ``max_halvings`` retries.
    """
    for attempt in range(max_halvings + 1):
        try:
            return fn(grid), grid
        except BranchError as exc:
            if attempt == max_halvings:
                raise
            logger.warning("branch error (%s); halving the t grid", exc)
            grid = grid.scaled(0.5)
    raise AssertionError("unreachable")


def series_coefficient(A, B, N: int, grid: SweepGrid, degree: int | None = None,
                       mirror: bool = True) -> np.ndarray:
    """Order-``N`` coefficient of ``log(e^A e^{2tB} e^A)`` in ``t``.

    Fits ``direct_Z(A, tB) - 2A`` entrywise by least squares to a polynomial
    without constant term, with ``t`` rescaled to ``t / max(t)``.  With
    ``mirror`` the fit also uses ``-t`` for every grid point; odd and even
    powers then decouple, so the default degree ``N + 4`` leaves the first
    unabsorbed term of the same parity as ``N`` at order ``N + 6``.
    """
    if not 1 <= N <= 5:
        raise InputError(f"series_coefficient supports 1 <= N <= 5, got {N}")
    degree = N + 4 if degree is None else degree
    if degree < N:
        raise InputError("fit degree must be at least N")
    if len(grid) < N + 4:
        raise InputError(f"need at least {N + 4} grid points for order {N}")
    A = as_square(A, "A")
    B = as_square(B, "B")

    def fit(g: SweepGrid):
        t = np.asarray(g.t_values)
        if mirror:
            t = np.concatenate([-t[::-1], t])
        if len(t) < degree:
            raise InputError(f"{len(t)} samples cannot fit degree {degree}")
        scale = np.abs(t).max()
        V = (t / scale)[:, None] ** np.arange(1, degree + 1)[None, :]
        cond = np.linalg.cond(V)
        if cond > 1e10:
            raise InputError(f"fit is ill conditioned (cond {cond:.3g}); widen the grid")
        data = np.stack([(direct_Z(A, tk * B) - 2 * A).ravel() for tk in t])
        coef, *_ = np.linalg.lstsq(V, data, rcond=None)
        return coef[N - 1].reshape(A.shape) / scale**N

    coef, _ = with_branch_retry(fit, grid)
    return coef


def convergence_slope(err_pairs: Iterable[Sequence[float]], floor: float = ERROR_FLOOR) -> float:
    """Least-squares slope of ``log err`` against ``log t``.

    Points with ``err <= floor`` are dropped; at least 4 must remain.
    """
    pts = [(float(t), float(e)) for t, e in err_pairs if float(e) > floor and float(t) > 0]
    if len(pts) < 4:
        raise InputError(f"need at least 4 points above the error floor, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
