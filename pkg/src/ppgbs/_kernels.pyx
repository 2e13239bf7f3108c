# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels (see _kernels_py for contracts)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def threshold_fourier_sums(const double complex[:, ::1] p):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t m = p.shape[1]
    cdef Py_ssize_t k = m + 1
    out_arr = np.zeros(k, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    phases_arr = np.exp(-2j * np.pi * np.arange(k) / k)
    cdef double complex[::1] phases = phases_arr
    cdef Py_ssize_t s, j, q
    cdef double complex prod, pj
    with nogil:
        for s in range(n):
            for q in range(k):
                prod = 1.0
                for j in range(m):
                    pj = p[s, j]
                    prod = prod * (pj + (1.0 - pj) * phases[q])
                out[q] = out[q] + prod
    return out_arr


def threshold_fourier_sums_2d(const double complex[:, ::1] pa,
                              const double complex[:, ::1] pb):
    cdef Py_ssize_t n = pa.shape[0]
    cdef Py_ssize_t ma = pa.shape[1]
    cdef Py_ssize_t mb = pb.shape[1]
    cdef Py_ssize_t ka = ma + 1
    cdef Py_ssize_t kb = mb + 1
    if pb.shape[0] != n:
        raise ValueError("sample counts differ between subsets")
    out_arr = np.zeros((ka, kb), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    pha_arr = np.exp(-2j * np.pi * np.arange(ka) / ka)
    phb_arr = np.exp(-2j * np.pi * np.arange(kb) / kb)
    cdef double complex[::1] pha = pha_arr
    cdef double complex[::1] phb = phb_arr
    fa_arr = np.empty(ka, dtype=np.complex128)
    fb_arr = np.empty(kb, dtype=np.complex128)
    cdef double complex[::1] fa = fa_arr
    cdef double complex[::1] fb = fb_arr
    cdef Py_ssize_t s, j, qa, qb
    cdef double complex prod, pj
    with nogil:
        for s in range(n):
            for qa in range(ka):
                prod = 1.0
                for j in range(ma):
                    pj = pa[s, j]
                    prod = prod * (pj + (1.0 - pj) * pha[qa])
                fa[qa] = prod
            for qb in range(kb):
                prod = 1.0
                for j in range(mb):
                    pj = pb[s, j]
                    prod = prod * (pj + (1.0 - pj) * phb[qb])
                fb[qb] = prod
            for qa in range(ka):
                for qb in range(kb):
                    out[qa, qb] = out[qa, qb] + fa[qa] * fb[qb]
    return out_arr


def hafnian(const double complex[:, ::1] a):
    """Pair-subset power-trace hafnian; same algorithm as the numpy fallback."""
    cdef Py_ssize_t n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    cdef Py_ssize_t k = n // 2
    # workspaces sized for the largest subset
    xb_arr = np.empty((n, n), dtype=np.complex128)
    pw_arr = np.empty((n, n), dtype=np.complex128)
    nx_arr = np.empty((n, n), dtype=np.complex128)
    g_arr = np.empty(k + 1, dtype=np.complex128)
    e_arr = np.empty(k + 1, dtype=np.complex128)
    idx_arr = np.empty(n, dtype=np.intp)
    cdef double complex[:, ::1] xb = xb_arr
    cdef double complex[:, ::1] pw = pw_arr
    cdef double complex[:, ::1] nx = nx_arr
    cdef double complex[::1] g = g_arr
    cdef double complex[::1] e = e_arr
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef double complex total = 0.0
    cdef double complex acc, tr
    cdef Py_ssize_t mask, nmask, i, j, t, z, r, c, q, order, sign_pow
    cdef Py_ssize_t dim
    with nogil:
        nmask = 1 << k
        for mask in range(1, nmask):
            z = 0
            for i in range(k):
                if (mask >> i) & 1:
                    idx[2 * z] = 2 * i
                    idx[2 * z + 1] = 2 * i + 1
                    z += 1
            dim = 2 * z
            # XB: submatrix with each row pair swapped
            for r in range(z):
                for c in range(dim):
                    xb[2 * r, c] = a[idx[2 * r + 1], idx[c]]
                    xb[2 * r + 1, c] = a[idx[2 * r], idx[c]]
            # power traces g[j] = tr((XB)^j) / (2 j)
            for r in range(dim):
                for c in range(dim):
                    pw[r, c] = xb[r, c]
            tr = 0.0
            for r in range(dim):
                tr = tr + pw[r, r]
            g[1] = tr / 2.0
            for j in range(2, k + 1):
                for r in range(dim):
                    for c in range(dim):
                        acc = 0.0
                        for q in range(dim):
                            acc = acc + pw[r, q] * xb[q, c]
                        nx[r, c] = acc
                tr = 0.0
                for r in range(dim):
                    for c in range(dim):
                        pw[r, c] = nx[r, c]
                    tr = tr + pw[r, r]
                g[j] = tr / (2.0 * j)
            # exp-series coefficients up to x^k
            e[0] = 1.0
            for order in range(1, k + 1):
                acc = 0.0
                for j in range(1, order + 1):
                    acc = acc + j * g[j] * e[order - j]
                e[order] = acc / order
            sign_pow = k - z
            if sign_pow & 1:
                total = total - e[k]
            else:
                total = total + e[k]
    return complex(total)
