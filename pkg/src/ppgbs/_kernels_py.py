"""Pure-numpy implementations of the hot kernels.

Same contracts as the compiled ppgbs._kernels extension; ppgbs.kernels picks
whichever is available (or forced via PPGBS_PURE_PYTHON=1).
"""

import numpy as np


def threshold_fourier_sums(p):
    """Sum over samples of the click-statistics Fourier observable.

    For each angle index kappa = 0..m (theta = 2*pi/(m+1)), accumulates
    sum_s prod_k (p[s,k] + (1 - p[s,k]) * exp(-i*kappa*theta)).

    Args:
        p: (n, m) complex array of per-sample no-click amplitudes.

    Returns:
        (m+1,) complex array of sample sums (not yet normalized by n).
    """
    n, m = p.shape
    k = m + 1
    phases = np.exp(-2j * np.pi * np.arange(k) / k)
    q = 1.0 - p
    out = np.empty(k, dtype=complex)
    for j in range(k):
        out[j] = np.prod(p + q * phases[j], axis=1).sum()
    return out


def threshold_fourier_sums_2d(pa, pb):
    """Two-subset variant: sums of outer products of per-subset Fourier factors.

    Returns:
        (ma+1, mb+1) complex array: sum_s f_a(s, kappa_a) * f_b(s, kappa_b).
    """
    fa = _factor_matrix(pa)
    fb = _factor_matrix(pb)
    return fa.T @ fb


def _factor_matrix(p):
    """(n, m+1) matrix of per-sample Fourier factors for one subset."""
    n, m = p.shape
    k = m + 1
    phases = np.exp(-2j * np.pi * np.arange(k) / k)
    q = 1.0 - p
    out = np.empty((n, k), dtype=complex)
    for j in range(k):
        out[:, j] = np.prod(p + q * phases[j], axis=1)
    return out


def hafnian(a):
    """Hafnian of an even-dimensional complex symmetric matrix.

    Pair-subset inclusion-exclusion with power traces: for every subset Z of
    the k = n/2 index pairs, the coefficient of x^k in
    exp(sum_j tr((X B_Z)^j) x^j / (2j)) is accumulated with sign
    (-1)^(k - |Z|), where B_Z is the submatrix on the pairs in Z and X swaps
    the two rows of each pair.  O(2^k poly(k)); adequate for n <= 20.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    k = n // 2
    total = 0.0 + 0.0j
    for mask in range(1, 1 << k):
        pairs = [i for i in range(k) if (mask >> i) & 1]
        z = len(pairs)
        idx = np.empty(2 * z, dtype=np.intp)
        for t, i in enumerate(pairs):
            idx[2 * t] = 2 * i
            idx[2 * t + 1] = 2 * i + 1
        b = a[np.ix_(idx, idx)]
        # X swaps the rows of each pair
        xb = np.empty_like(b)
        xb[0::2] = b[1::2]
        xb[1::2] = b[0::2]
        # g[j] = tr((XB)^j) / (2j), j = 1..k
        g = np.empty(k + 1, dtype=complex)
        pw = xb.copy()
        g[1] = np.trace(pw) / 2.0
        for j in range(2, k + 1):
            pw = pw @ xb
            g[j] = np.trace(pw) / (2.0 * j)
        # e = series coefficients of exp(sum_j g[j] x^j), up to x^k
        e = np.zeros(k + 1, dtype=complex)
        e[0] = 1.0
        for order in range(1, k + 1):
            acc = 0.0 + 0.0j
            for j in range(1, order + 1):
                acc += j * g[j] * e[order - j]
            e[order] = acc / order
        total += (-1) ** (k - z) * e[k]
    return total
