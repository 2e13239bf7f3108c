"""Exact desk-scale ground truth: Hafnian/Torontonian evaluation, exact click and
photon-number pattern probabilities, and exhaustive grouped count distributions.

Conventions: zero-mean Gaussian output state described by the normal covariance
C = <a†_mu a_nu> and anomalous correlations Mm = <a_mu a_nu>.  Quadratures use
X = a + a†, Y = -i(a - a†), so the vacuum quadrature covariance is the identity.
An independent cross-check path (`fock_probabilities`) expands the probability
generating function det(I - D(z-1) sigma_n / 2)^(-1/2) and shares no code with
the Hafnian/Torontonian evaluators.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, CutoffError, NumericalRangeError
from .gaussian_state import input_moments

__all__ = [
    "GaussianOutputState",
    "hafnian",
    "torontonian",
    "click_pattern_probability",
    "pnr_pattern_probability",
    "no_click_probability",
    "all_click_probability",
    "fock_probabilities",
    "brute_force_gcd",
    "threshold_pattern_distribution",
]

_MAX_TORONTONIAN_MODES = 14


@dataclass(frozen=True)
class GaussianOutputState:
    """Zero-displacement Gaussian state after the linear network.

    normal: M x M Hermitian matrix <a†_mu a_nu>.
    anomalous: M x M symmetric matrix <a_mu a_nu>.
    """

    normal: np.ndarray
    anomalous: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.normal, dtype=complex))
        mm = np.atleast_2d(np.asarray(self.anomalous, dtype=complex))
        object.__setattr__(self, "normal", c)
        object.__setattr__(self, "anomalous", mm)
        if c.shape != mm.shape or c.shape[0] != c.shape[1]:
            raise ConfigurationError("normal and anomalous blocks must be square, same size")
        if np.abs(c - c.conj().T).max() > 1e-9 * max(1.0, np.abs(c).max()):
            raise ConfigurationError("normal block must be Hermitian")
        if np.abs(mm - mm.T).max() > 1e-9 * max(1.0, np.abs(mm).max()):
            raise ConfigurationError("anomalous block must be symmetric")
        # uncertainty check: V + i*Omega >= 0 in the X=a+a† convention
        v = self.quadrature_covariance()
        m = c.shape[0]
        omega = np.zeros((2 * m, 2 * m))
        omega[:m, m:] = np.eye(m)
        omega[m:, :m] = -np.eye(m)
        eig = np.linalg.eigvalsh(v + 1j * omega)
        if eig.min() < -1e-8 * max(1.0, np.abs(v).max()):
            raise ConfigurationError(
                f"covariance violates the uncertainty principle (min eig {eig.min():.3e})"
            )

    @classmethod
    def from_instance(cls, bank, T):
        """Assemble the output state from squeezers and a transmission matrix."""
        n_tilde, m_tilde = input_moments(bank)
        teff = T.effective
        if teff.shape[0] != bank.m_in:
            raise ConfigurationError(
                f"transmission expects {teff.shape[0]} input modes, bank has {bank.m_in}"
            )
        c = teff.conj().T @ np.diag(n_tilde) @ teff
        mm = teff.T @ np.diag(m_tilde) @ teff
        return cls(0.5 * (c + c.conj().T), 0.5 * (mm + mm.T))

    @property
    def m(self):
        return self.normal.shape[0]

    def quadrature_covariance(self):
        """Full 2M x 2M real covariance in (X..., Y...) ordering; vacuum = identity."""
        c = self.normal
        mm = self.anomalous
        m = c.shape[0]
        sxx = np.eye(m) + 2.0 * (mm + c).real
        syy = np.eye(m) + 2.0 * (c - mm).real
        sxy = 2.0 * (mm + c).imag
        v = np.block([[sxx, sxy], [sxy.T, syy]])
        return 0.5 * (v + v.T)

    def husimi_covariance(self):
        """Real 2M x 2M Husimi covariance (V + I)/2; principal submatrices give
        marginal vacuum probabilities."""
        v = self.quadrature_covariance()
        return 0.5 * (v + np.eye(v.shape[0]))

    def husimi_complex(self):
        """Complex Husimi covariance in (a, a†) ordering used by the Hafnian formula."""
        c = self.normal
        mm = self.anomalous
        m = c.shape[0]
        eye = np.eye(m)
        return np.block([[c.conj() + eye, mm], [mm.conj(), c + eye]])

    def hafnian_kernel_matrix(self):
        """A = X (I - sigma_Q^{-1}): symmetric kernel of PNR pattern probabilities."""
        sq = self.husimi_complex()
        m = self.m
        inner = np.eye(2 * m) - np.linalg.inv(sq)
        a = np.vstack([inner[m:], inner[:m]])  # X swaps the (a, a†) halves
        return 0.5 * (a + a.T)


def hafnian(a):
    """Hafnian of an even-dimensional symmetric matrix (sum over perfect matchings)."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError("hafnian requires a square matrix")
    n = a.shape[0]
    if n % 2:
        raise ConfigurationError("hafnian requires even dimension")
    if n and np.abs(a - a.T).max() > 1e-10 * max(1.0, np.abs(a).max()):
        raise ConfigurationError("hafnian requires a symmetric matrix")
    return kernels.hafnian(a)


def torontonian(o):
    """Torontonian: sum over mode subsets Z of (-1)^(M-|Z|) / sqrt(det(I - O_ZZ)).

    O is a 2M x 2M matrix in doubled-index ordering (mode j <-> rows j and j+M).
    """
    o = np.asarray(o, dtype=complex)
    if o.ndim != 2 or o.shape[0] != o.shape[1] or o.shape[0] % 2:
        raise ConfigurationError("torontonian requires a square 2M x 2M matrix")
    m = o.shape[0] // 2
    if m > _MAX_TORONTONIAN_MODES:
        raise ConfigurationError(f"torontonian limited to M <= {_MAX_TORONTONIAN_MODES} modes")
    total = 0.0 + 0.0j
    for subset in range(1 << m):
        modes = [j for j in range(m) if (subset >> j) & 1]
        z = len(modes)
        idx = np.array(modes + [j + m for j in modes], dtype=np.intp)
        sub = np.eye(2 * z, dtype=complex) - o[np.ix_(idx, idx)]
        det = np.linalg.det(sub)
        if abs(det) < 1e-300:
            raise NumericalRangeError(
                f"torontonian subset {modes} has near-singular determinant"
            )
        total += (-1) ** (m - z) / np.sqrt(det)
    return total


def _doubled_indices(modes, m):
    modes = np.asarray(sorted(modes), dtype=np.intp)
    return np.concatenate([modes, modes + m])


def no_click_probability(state, modes=None):
    """Probability that no photon arrives in any of the given modes (rest marginal)."""
    if modes is None:
        modes = range(state.m)
    modes = list(modes)
    if not modes:
        return 1.0
    sq = state.husimi_covariance()
    idx = _doubled_indices(modes, state.m)
    det = np.linalg.det(sq[np.ix_(idx, idx)])
    if det <= 0:
        raise NumericalRangeError("Husimi covariance submatrix has non-positive determinant")
    return float(1.0 / np.sqrt(det))


def all_click_probability(state):
    """All-modes click probability via the Torontonian of I - sigma_Q^{-1}."""
    sq = state.husimi_covariance()
    det = np.linalg.det(sq)
    if det <= 0:
        raise NumericalRangeError("Husimi covariance has non-positive determinant")
    o = np.eye(2 * state.m) - np.linalg.inv(sq)
    return float(np.real(torontonian(o)) / np.sqrt(det))


def click_pattern_probability(state, pattern, modes=None):
    """Exact threshold-detector probability of a click pattern.

    pattern: 0/1 per mode in `modes` (defaults to all modes; other modes are
    marginalized).  Inclusion-exclusion over the click set, 2^(#clicks) terms.
    """
    if modes is None:
        modes = list(range(state.m))
    pattern = np.asarray(pattern, dtype=int)
    if pattern.size != len(modes):
        raise ConfigurationError("pattern length must match the mode list")
    if np.any((pattern != 0) & (pattern != 1)):
        raise ConfigurationError("threshold pattern entries must be 0 or 1")
    silent = [mo for mo, c in zip(modes, pattern) if c == 0]
    clicks = [mo for mo, c in zip(modes, pattern) if c == 1]
    total = 0.0
    for r in range(len(clicks) + 1):
        for sub in itertools.combinations(clicks, r):
            total += (-1) ** r * no_click_probability(state, silent + list(sub))
    return float(total)


def pnr_pattern_probability(state, pattern):
    """Exact photon-number pattern probability via the Hafnian formula.

    P(n) = haf(A_n) / (prod n_j! * sqrt(det sigma_Q)), where A_n repeats the
    j-th (and M+j-th) rows/columns of A = X(I - sigma_Q^{-1}) n_j times.
    """
    pattern = np.asarray(pattern, dtype=int)
    if pattern.size != state.m:
        raise ConfigurationError("pattern length must equal the mode count")
    if np.any(pattern < 0):
        raise ConfigurationError("photon counts must be nonnegative")
    total = int(pattern.sum())
    if total > 20:
        raise ConfigurationError("pnr_pattern_probability limited to total counts <= 20")
    sq = state.husimi_complex()
    det = np.linalg.det(sq)
    norm = np.sqrt(np.real(det))
    if not np.isfinite(norm) or norm <= 0:
        raise NumericalRangeError("Husimi covariance has invalid determinant")
    if total == 0:
        return float(1.0 / norm)
    a = state.hafnian_kernel_matrix()
    reps = np.concatenate([pattern, pattern])
    idx = np.repeat(np.arange(2 * state.m), reps)
    sub = a[np.ix_(idx, idx)]
    haf = kernels.hafnian(np.ascontiguousarray(sub))
    fact = np.prod([math.factorial(int(c)) for c in pattern])
    prob = np.real(haf) / (fact * norm)
    return float(prob)


def _poly_mul(a, b, shape):
    """Truncated product of multivariate coefficient tensors (per-axis cutoff)."""
    full = [sa + sb - 1 for sa, sb in zip(a.shape, b.shape)]
    fa = np.fft.fftn(a, s=full)
    fb = np.fft.fftn(b, s=full)
    prod = np.fft.ifftn(fa * fb)
    sl = tuple(slice(0, min(f, s)) for f, s in zip(full, shape))
    out = np.zeros(shape, dtype=complex)
    out[sl] = prod[sl]
    return out


def _det_linear_rows(g0, g1, row_modes, shape):
    """Determinant of a matrix whose row r equals g0[r, :] + z_{row_modes[r]} * g1[r, :],
    as a multivariate coefficient tensor (Leibniz sum; sizes <= 8 rows)."""
    n = g0.shape[0]
    m_vars = len(shape)
    det = np.zeros(shape, dtype=complex)
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        # product of n univariate-linear factors, tracked per-mode
        coeffs = np.zeros(shape, dtype=complex)
        coeffs[(0,) * m_vars] = sign
        for r, c in enumerate(perm):
            const = g0[r, c]
            lin = g1[r, c]
            mode = row_modes[r]
            shifted = np.roll(coeffs, 1, axis=mode)
            idx = [slice(None)] * m_vars
            idx[mode] = 0
            shifted[tuple(idx)] = 0.0
            coeffs = const * coeffs + lin * shifted
        det += coeffs
    return det


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def fock_probabilities(state, cutoff=10, tail_tol=1e-9, max_cutoff=40):
    """Exact photon-number probabilities P(n_1..n_M) for all n_j <= cutoff.

    Independent of the Hafnian path: expands the probability generating
    function H(z) = det(I - D(z-1) sigma_n / 2)^(-1/2) as a multivariate Taylor
    series; the coefficient of prod z_j^{n_j} is P(n).  Raises CutoffError if
    the enumerated mass leaves more than tail_tol unaccounted for even at
    max_cutoff.  Practical for M <= 4.
    """
    m = state.m
    if m > 4:
        raise ConfigurationError("fock_probabilities supports M <= 4")
    sigma_n = state.quadrature_covariance() - np.eye(2 * m)
    row_modes = list(range(m)) + list(range(m))  # X_j then Y_j rows
    current = int(cutoff)
    while True:
        shape = (current + 1,) * m
        # G(z) = I - 0.5 * diag(z_mode - 1) sigma_n, rows linear in one variable
        g_const = np.eye(2 * m, dtype=complex) + 0.5 * sigma_n
        g_lin = -0.5 * sigma_n.astype(complex)
        det = _det_linear_rows(g_const, g_lin, row_modes, shape)
        d0 = det[(0,) * m]
        if abs(d0) < 1e-300:
            raise NumericalRangeError("generating-function determinant vanishes at z=0")
        q = det / d0
        q[(0,) * m] = 0.0
        # (1+q)^(-1/2) as a truncated series in the polynomial ring
        series = np.zeros(shape, dtype=complex)
        series[(0,) * m] = 1.0
        term = np.zeros(shape, dtype=complex)
        term[(0,) * m] = 1.0
        coeff = 1.0
        for k in range(1, m * current + 1):
            coeff *= (-0.5 - (k - 1)) / k
            term = _poly_mul(term, q, shape)
            if not np.any(term):
                break
            series += coeff * term
        probs = np.real(series) / np.sqrt(np.real(d0))
        tail = 1.0 - probs.sum()
        if tail <= tail_tol:
            return probs
        if 2 * current > max_cutoff:
            raise CutoffError(
                f"Fock tail mass {tail:.3e} above {tail_tol} at cutoff {current}"
            )
        current *= 2


def threshold_pattern_distribution(state):
    """All 2^M click-pattern probabilities as a flat array (M <= 10)."""
    m = state.m
    if m > 10:
        raise ConfigurationError("pattern enumeration limited to M <= 10")
    probs = np.empty(1 << m)
    for bits in range(1 << m):
        pattern = [(bits >> j) & 1 for j in range(m)]
        probs[bits] = click_pattern_probability(state, pattern)
    return probs


def brute_force_gcd(state, part, detector, m_max=None):
    """Exact grouped count distribution by exhaustive pattern enumeration.

    threshold: all 2^M click patterns (M <= 10).  pnr: all count patterns with
    total <= d * m_max aggregated per subset, bins 0..m_max plus an overflow
    bin per axis (m_max <= 12 required).  Errors are zero.
    """
    from .gcd import GcdResult  # local import: gcd depends on sampler, not on oracle

    m = state.m
    subsets = [np.asarray(s, dtype=int) for s in part.subsets]
    for s in subsets:
        if s.size and s.max() >= m:
            raise ConfigurationError("partition index exceeds mode count")
    if detector == "threshold":
        if m > 10:
            raise ConfigurationError("brute-force threshold GCD limited to M <= 10")
        shape = tuple(len(s) + 1 for s in subsets)
        probs = np.zeros(shape)
        for bits in range(1 << m):
            pattern = np.array([(bits >> j) & 1 for j in range(m)])
            key = tuple(int(pattern[s].sum()) for s in subsets)
            probs[key] += click_pattern_probability(state, pattern)
        return GcdResult(
            probabilities=probs,
            errors=np.zeros(shape),
            kind="threshold",
            partition=[list(map(int, s)) for s in subsets],
            n_samples=0,
            overflow=False,
        )
    if detector == "pnr":
        if m_max is None:
            raise ConfigurationError("pnr brute force requires m_max")
        if m_max > 12:
            raise ConfigurationError("brute-force PNR GCD limited to count cutoff <= 12")
        d = len(subsets)
        total_cut = d * m_max
        shape = tuple(m_max + 2 for _ in subsets)  # last bin per axis = overflow
        probs = np.zeros(shape)
        covered = 0.0
        for pattern in _compositions_up_to(m, total_cut):
            p = pnr_pattern_probability(state, pattern)
            covered += p
            key = tuple(min(int(pattern[s].sum()), m_max + 1) for s in subsets)
            probs[key] += p
        # everything beyond the enumeration cutoff lands in the all-axes overflow corner
        probs[(m_max + 1,) * d] += max(0.0, 1.0 - covered)
        return GcdResult(
            probabilities=probs,
            errors=np.zeros(shape),
            kind="pnr",
            partition=[list(map(int, s)) for s in subsets],
            n_samples=0,
            overflow=True,
        )
    raise ConfigurationError(f"unknown detector {detector!r}")


def _compositions_up_to(m, total):
    """All count vectors of length m with sum <= total."""
    pattern = np.zeros(m, dtype=int)

    def rec(pos, remaining):
        if pos == m - 1:
            for c in range(remaining + 1):
                pattern[pos] = c
                yield pattern.copy()
            return
        for c in range(remaining + 1):
            pattern[pos] = c
            yield from rec(pos + 1, remaining - c)

    yield from rec(0, total)
