"""Smith normal form and integer kernel computations.

All arithmetic is done with Python integers, so the results are exact for the
matrix sizes that occur here (2n x 2n with n <= 6 or so).
"""

from __future__ import annotations

import numpy as np


def _as_int_rows(mat) -> list[list[int]]:
    a = np.asarray(mat)
    return [[int(x) for x in row] for row in a]


def smith_normal_form(mat):
    """Return (U, D, V) with U @ mat @ V = D, U and V unimodular, D diagonal.

    The diagonal entries are nonnegative and each divides the next.
    """
    a = _as_int_rows(mat)
    m = len(a)
    n = len(a[0]) if m else 0
    u = [[int(i == j) for j in range(m)] for i in range(m)]
    v = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(src, dst, q):
        # dst += q * src
        a[dst] = [x + q * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + q * y for x, y in zip(u[dst], u[src])]

    def add_col(src, dst, q):
        for row in a:
            row[dst] += q * row[src]
        for row in v:
            row[dst] += q * row[src]

    def negate_row(i):
        a[i] = [-x for x in a[i]]
        u[i] = [-x for x in u[i]]

    t = 0
    while t < min(m, n):
        # find a pivot with minimal nonzero absolute value
        piv = None
        best = None
        for i in range(t, m):
            for j in range(t, n):
                if a[i][j] != 0 and (best is None or abs(a[i][j]) < best):
                    best = abs(a[i][j])
                    piv = (i, j)
        if piv is None:
            break
        swap_rows(t, piv[0])
        swap_cols(t, piv[1])
        # clear row and column t; restart if a remainder creates a smaller pivot
        dirty = False
        for i in range(t + 1, m):
            if a[i][t] != 0:
                q = a[i][t] // a[t][t]
                add_row(t, i, -q)
                if a[i][t] != 0:
                    dirty = True
        for j in range(t + 1, n):
            if a[t][j] != 0:
                q = a[t][j] // a[t][t]
                add_col(t, j, -q)
                if a[t][j] != 0:
                    dirty = True
        if dirty:
            continue
        # divisibility: pivot must divide every remaining entry
        fixed = True
        for i in range(t + 1, m):
            for j in range(t + 1, n):
                if a[i][j] % a[t][t] != 0:
                    add_row(i, t, 1)
                    fixed = False
                    break
            if not fixed:
                break
        if not fixed:
            continue
        if a[t][t] < 0:
            negate_row(t)
        t += 1

    U = np.array(u, dtype=np.int64)
    D = np.array(a, dtype=np.int64)
    V = np.array(v, dtype=np.int64)
    return U, D, V


def integer_kernel_basis(mat):
    """Basis of the integer kernel {x : mat @ x = 0}, columns of the result."""
    U, D, V = smith_normal_form(mat)
    n = V.shape[0]
    r = sum(1 for i in range(min(D.shape)) if D[i, i] != 0)
    return V[:, r:].copy(), r, (U, D, V)


def det_unimodular(mat) -> int:
    """Determinant via fraction-free elimination; used to assert unimodularity."""
    a = _as_int_rows(mat)
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = a[k][k]
    return sign * a[n - 1][n - 1] if n else 1
