"""Coefficients alpha(n, m) and the Q_j functions of the dilation-operator expansion.

alpha(n, m) obeys alpha(n, m) = m * alpha(n-1, m) + alpha(n-1, m-1) with unit
boundary values, i.e. it counts partitions of an n-set into m blocks. Its
exponential generating function gives Q_j(x) = (e^x - 1)^j / j!, which is the
production path; the defining power series is kept as an independent check.
"""
from __future__ import annotations

import math
import threading
from typing import Literal

import mpmath

from .errors import NonConvergence, OutOfRange

SERIES_TERM_CAP = 500
X_LIMIT = 50.0

_rows: list[list[int]] = [[1]]  # row n holds alpha(n, 0..n); alpha(0, 0) = 1
_rows_lock = threading.Lock()


def _ensure_rows(n: int) -> None:
    if n < len(_rows):
        return
    with _rows_lock:
        while len(_rows) <= n:
            prev = _rows[-1]
            k = len(_rows)
            row = [0] * (k + 1)
            for m in range(1, k + 1):
                above = prev[m] if m < k else 0
                row[m] = m * above + prev[m - 1]
            _rows.append(row)


class AlphaTable:
    """Read-only triangular table alpha(n, m), 1 <= m <= n <= n_max, in exact integers."""

    def __init__(self, n_max: int = 64):
        if n_max < 1:
            raise OutOfRange(f"n_max must be >= 1, got {n_max}")
        _ensure_rows(n_max)
        self.n_max = n_max
        self._rows = tuple(tuple(r) for r in _rows[: n_max + 1])

    def __getitem__(self, nm: tuple[int, int]) -> int:
        n, m = nm
        if not (1 <= m <= n <= self.n_max):
            raise OutOfRange(f"alpha({n}, {m}) outside 1 <= m <= n <= {self.n_max}")
        return self._rows[n][m]

    def row(self, n: int) -> tuple[int, ...]:
        """alpha(n, 1..n)."""
        if not 1 <= n <= self.n_max:
            raise OutOfRange(f"row {n} outside 1..{self.n_max}")
        return self._rows[n][1:]


def alpha(n: int, m: int) -> int:
    if not (1 <= m <= n):
        raise OutOfRange(f"alpha({n}, {m}) requires 1 <= m <= n")
    _ensure_rows(n)
    return _rows[n][m]


def alpha_total(n: int, m: int) -> int:
    """alpha extended by zero outside the triangle."""
    if n < 1 or m < 1 or m > n:
        return 0
    return alpha(n, m)


def _check_args(j: int, x: float, rel_tol: float) -> None:
    if j < 0:
        raise OutOfRange(f"order j must be >= 0, got {j}")
    if not (0 < rel_tol <= 1e-3):
        raise OutOfRange(f"rel_tol must lie in (0, 1e-3], got {rel_tol}")
    if not abs(x) <= X_LIMIT:
        raise OutOfRange(f"|x| must be <= {X_LIMIT}, got {x}")


def q_closed(j: int, x: float) -> float:
    return math.expm1(x) ** j / math.factorial(j)


def q_series(j: int, x: float, rel_tol: float = 1e-12) -> float:
    """Sum alpha(m, j) x^m / m! for m >= j in extended precision.

    For x < 0 the terms alternate and cancel heavily (about j|x|/ln 10 digits),
    so the working precision is raised accordingly.
    """
    _check_args(j, x, rel_tol)
    if j == 0:
        return 1.0
    extra = int(j * abs(x) / math.log(10)) + 1
    digits = int(-math.log10(rel_tol)) + 1
    with mpmath.workdps(20 + extra + digits):
        xm = mpmath.mpf(x)
        total = mpmath.mpf(0)
        power = xm ** j / mpmath.factorial(j)
        prev_mag = None
        quiet = 0
        for m in range(j, j + SERIES_TERM_CAP):
            term = alpha(m, j) * power
            total += term
            mag = abs(term)
            decaying = prev_mag is not None and mag <= prev_mag
            if decaying and mag <= 0.1 * rel_tol * abs(total):
                quiet += 1
                if quiet == 2:
                    return float(total)
            else:
                quiet = 0
            prev_mag = mag
            power = power * xm / (m + 1)
        raise NonConvergence(
            f"Q_{j}({x}) series did not settle within {SERIES_TERM_CAP} terms; |x| too large for this order"
        )


def q_poly(j: int, x: float, rel_tol: float = 1e-12,
           method: Literal["closed", "series"] = "closed") -> float:
    _check_args(j, x, rel_tol)
    if j == 0:
        return 1.0
    if j == 1:
        return math.expm1(x)
    if method == "series":
        return q_series(j, x, rel_tol)
    return q_closed(j, x)


def series_weights(A: float, order: int) -> list[float]:
    """Weights e^{-A} Q_n(A), n = 0..order, of the Greeks-series expansion."""
    if order < 0 or order > 64:
        raise OutOfRange(f"order must lie in 0..64, got {order}")
    _check_args(0, A, 1e-12)
    scale = math.exp(-A)
    return [scale * q_poly(n, A) for n in range(order + 1)]
