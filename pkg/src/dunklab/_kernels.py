"""Hot numeric kernels: q-series summation for the odd theta function.

Two implementations are provided: a numba ``@njit`` kernel and a pure-numpy
fallback.  The active one is chosen at import time; set the environment
variable ``DUNKLAB_PURE_NUMPY=1`` to force the numpy path (useful for
debugging and for the benchmark in ``benchmarks/bench_theta.py``).

The kernel sums, for each reduced argument z (|Re z| <= 1/2, |Im z| bounded),

    S0 = sum_k s_k * sin((2k+1) pi z)
    S1 = sum_k s_k * (2k+1) pi cos((2k+1) pi z)
    S2 = -sum_k s_k * ((2k+1) pi)^2 sin((2k+1) pi z)

where s_k = (-1)^k q^{k(k+1)/2} is passed in precomputed.  sin/cos are built
from exp(i pi z) by recurrence, which is both faster and numba-friendly.
"""

from __future__ import annotations

import os

import numpy as np

PI = np.pi

_WANT_NUMPY = os.environ.get("DUNKLAB_PURE_NUMPY", "").lower() in ("1", "true", "yes")

USING_NUMBA = False
if not _WANT_NUMPY:
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False


def theta_sums_numpy(z, coeffs, nder):
    """Pure-numpy q-series sums.  z: (M,) complex, coeffs: (N,) complex."""
    z = np.asarray(z, dtype=np.complex128)
    n = coeffs.shape[0]
    p = np.exp(1j * PI * z)
    pinv = 1.0 / p
    p2 = p * p
    p2inv = pinv * pinv
    a = p.copy()       # p^(2k+1)
    b = pinv.copy()    # p^-(2k+1)
    s0 = np.zeros_like(z)
    s1 = np.zeros_like(z)
    s2 = np.zeros_like(z)
    for k in range(n):
        sin_k = (a - b) * (-0.5j)
        c = coeffs[k]
        s0 += c * sin_k
        if nder >= 1:
            w = (2 * k + 1) * PI
            s1 += c * w * (a + b) * 0.5
            if nder >= 2:
                s2 -= c * (w * w) * sin_k
        a *= p2
        b *= p2inv
    return s0, s1, s2


if USING_NUMBA:

    @njit(cache=True)
    def _theta_sums_numba(z, coeffs, nder):  # pragma: no cover - jitted
        m = z.shape[0]
        n = coeffs.shape[0]
        s0 = np.zeros(m, dtype=np.complex128)
        s1 = np.zeros(m, dtype=np.complex128)
        s2 = np.zeros(m, dtype=np.complex128)
        for i in range(m):
            p = np.exp(1j * PI * z[i])
            pinv = 1.0 / p
            p2 = p * p
            p2inv = pinv * pinv
            a = p
            b = pinv
            acc0 = 0.0 + 0.0j
            acc1 = 0.0 + 0.0j
            acc2 = 0.0 + 0.0j
            for k in range(n):
                sin_k = (a - b) * (-0.5j)
                c = coeffs[k]
                acc0 += c * sin_k
                if nder >= 1:
                    w = (2 * k + 1) * PI
                    acc1 += c * w * (a + b) * 0.5
                    if nder >= 2:
                        acc2 -= c * (w * w) * sin_k
                a *= p2
                b *= p2inv
            s0[i] = acc0
            s1[i] = acc1
            s2[i] = acc2
        return s0, s1, s2

    def theta_sums(z, coeffs, nder):
        z = np.ascontiguousarray(z, dtype=np.complex128)
        return _theta_sums_numba(z, coeffs, nder)

else:
    theta_sums = theta_sums_numpy
