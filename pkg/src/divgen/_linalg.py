"""Exact null spaces over the rationals, plus a floating-point SVD counterpart."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np


def _to_fraction_rows(matrix) -> list[list[Fraction]]:
    return [[Fraction(x) for x in row] for row in matrix]


def row_echelon(matrix) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns.

    Elimination is fraction-free (integer cross-multiplication), with a final
    division by pivots to reach the reduced form.
    """
    rows = _to_fraction_rows(matrix)
    if not rows:
        return [], []
    # scale every row to integers so the elimination stays fraction-free
    int_rows = []
    for row in rows:
        den = math.lcm(*(x.denominator for x in row)) if row else 1
        int_rows.append([int(x * den) for x in row])
    m, ncols = len(int_rows), len(int_rows[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, m) if int_rows[i][c] != 0), None)
        if pr is None:
            continue
        int_rows[r], int_rows[pr] = int_rows[pr], int_rows[r]
        p = int_rows[r][c]
        for i in range(m):
            if i != r and int_rows[i][c] != 0:
                q = int_rows[i][c]
                new = [p * a - q * b for a, b in zip(int_rows[i], int_rows[r])]
                g = math.gcd(*new)
                int_rows[i] = [x // g for x in new] if g > 1 else new
        pivots.append(c)
        r += 1
        if r == m:
            break
    reduced = []
    for i, c in enumerate(pivots):
        p = int_rows[i][c]
        reduced.append([Fraction(x, p) for x in int_rows[i]])
    return reduced, pivots


def rank_exact(matrix) -> int:
    return len(row_echelon(matrix)[1])


def nullspace_exact(matrix, ncols: int | None = None) -> list[list[Fraction]]:
    """Basis of ``{x : A x = 0}`` over Q, one vector per free column.

    ``ncols`` is needed when ``matrix`` has no rows.
    """
    rows = _to_fraction_rows(matrix)
    if not rows:
        if ncols is None:
            raise ValueError("ncols is required for an empty matrix")
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    ncols = len(rows[0])
    reduced, pivots = row_echelon(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        vec = [Fraction(0)] * ncols
        vec[fcol] = Fraction(1)
        for row, pc in zip(reduced, pivots):
            vec[pc] = -row[fcol]
        basis.append(vec)
    return basis


def integer_normalize(vec: Sequence[Fraction]) -> list[int]:
    """Scale a rational vector to coprime integers with a positive first nonzero entry."""
    den = math.lcm(*(Fraction(x).denominator for x in vec))
    ints = [int(Fraction(x) * den) for x in vec]
    g = math.gcd(*ints)
    if g == 0:
        return ints
    ints = [x // g for x in ints]
    first = next(x for x in ints if x != 0)
    return [-x for x in ints] if first < 0 else ints


def nullspace_float(matrix, ncols: int | None = None, threshold: float = 1e-10) -> np.ndarray:
    """Orthonormal kernel basis (columns) from the SVD; singular values below
    ``threshold * max(1, s_max)`` count as zero. Rows are scaled to unit norm first."""
    a = np.asarray(matrix, dtype=float)
    if a.size == 0:
        n = ncols if ncols is not None else (a.shape[1] if a.ndim == 2 else 0)
        return np.eye(n)
    norms = np.linalg.norm(a, axis=1)
    a = a[norms > 0] / norms[norms > 0, None]
    if a.shape[0] == 0:
        return np.eye(np.asarray(matrix).shape[1])
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > threshold * max(1.0, s[0])))
    return vt[rank:].T
