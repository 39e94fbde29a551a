"""Exact rational simplex for small covering/packing LPs.

Solves  max c.x  subject to  A.x <= b, x >= 0  with all data given as
`fractions.Fraction`.  The right-hand side must be nonnegative so the slack
basis is feasible from the start.  Bland's rule keeps the pivot sequence
finite and deterministic.  Optimal duals are read off the slack columns of
the final tableau, which is what the fractional coloring code uses to
recover the stable set decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class LpResult:
    value: Fraction
    x: list[Fraction]
    duals: list[Fraction]  # one per constraint row


def lp_max(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction], c: Sequence[Fraction]) -> LpResult:
    m = len(A)
    n = len(c)
    for bi in b:
        if bi < 0:
            raise ValueError("lp_max needs a nonnegative right-hand side")

    # tableau: m constraint rows, columns [x (n) | slack (m) | rhs]
    rows = []
    for i in range(m):
        row = [Fraction(v) for v in A[i]] + [ZERO] * m + [Fraction(b[i])]
        row[n + i] = ONE
        rows.append(row)
    # objective row holds -c so negative entries mark improving columns
    z = [-Fraction(v) for v in c] + [ZERO] * (m + 1)
    basis = list(range(n, n + m))

    width = n + m
    while True:
        enter = -1
        for j in range(width):  # Bland: smallest improving index
            if z[j] < 0:
                enter = j
                break
        if enter < 0:
            break
        leave = -1
        best = None
        for i in range(m):
            a = rows[i][enter]
            if a > 0:
                ratio = rows[i][width] / a
                if best is None or ratio < best or (
                    ratio == best and basis[i] < basis[leave]
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            raise ValueError("LP is unbounded")
        _pivot(rows, z, basis, leave, enter, width)

    x = [ZERO] * n
    for i, bv in enumerate(basis):
        if bv < n:
            x[bv] = rows[i][width]
    duals = [z[n + i] for i in range(m)]
    return LpResult(value=z[width], x=x, duals=duals)


def _pivot(rows, z, basis, leave, enter, width):
    prow = rows[leave]
    inv = ONE / prow[enter]
    if inv != ONE:
        for j in range(width + 1):
            if prow[j]:
                prow[j] *= inv
    for i, row in enumerate(rows):
        if i == leave:
            continue
        f = row[enter]
        if f:
            for j in range(width + 1):
                if prow[j]:
                    row[j] -= f * prow[j]
    f = z[enter]
    if f:
        for j in range(width + 1):
            if prow[j]:
                z[j] -= f * prow[j]
    basis[leave] = enter


def solve_square(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction] | None:
    """Solve A.x = b exactly; None if A is singular."""
    n = len(A)
    M = [list(map(Fraction, A[i])) + [Fraction(b[i])] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
        inv = ONE / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * p for a, p in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def matrix_rank(A: Sequence[Sequence[Fraction]]) -> int:
    """Rank by fraction-exact Gaussian elimination."""
    M = [list(map(Fraction, row)) for row in A]
    if not M:
        return 0
    rows, cols = len(M), len(M[0])
    rank = 0
    for col in range(cols):
        piv = next((r for r in range(rank, rows) if M[r][col] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        inv = ONE / M[rank][col]
        M[rank] = [v * inv for v in M[rank]]
        for r in range(rows):
            if r != rank and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * p for a, p in zip(M[r], M[rank])]
        rank += 1
        if rank == rows:
            break
    return rank
