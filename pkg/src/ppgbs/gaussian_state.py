"""Gaussian input states, transmission matrices, and the classicality machinery.

Conventions: mode i carries squeezing r_i and decoherence epsilon_i, giving
photon number n~_i = sinh^2(r_i) and coherence m~_i = (1-eps_i) sinh(r_i) cosh(r_i).
The complex normally ordered covariance sigma_{mu,nu} = <:a†_mu a_nu:> transforms
under a transmission matrix T as sigma -> T† sigma T (amplitudes: alpha' = alpha.T,
beta' = beta.conj(T) in the row-per-sample convention), which is a *-congruence, so
Sylvester inertia of sigma is preserved for invertible T.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigurationError, NumericalError

__all__ = [
    "SqueezerBank",
    "TransmissionMatrix",
    "ComplexCovariance",
    "Signature",
    "FitResult",
    "input_moments",
    "y_quadrature_variance",
    "is_classical_input",
    "build_input_covariance",
    "apply_transmission",
    "covariance_signature",
    "fit_ground_truth_correction",
    "haar_random_unitary",
    "haar_transmission",
    "quadrature_normal_covariance",
    "transform_quadrature_normal",
]

_SV_TOL = 1e-9


@dataclass(frozen=True)
class SqueezerBank:
    """Per-mode squeezing parameters r >= 0 and decoherence fractions eps in [0, 1]."""

    r: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        eps = np.atleast_1d(np.asarray(self.epsilon, dtype=float))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "epsilon", eps)
        if r.ndim != 1 or eps.shape != r.shape:
            raise ConfigurationError("r and epsilon must be 1-d vectors of equal length")
        if np.any(r < 0):
            raise ConfigurationError("squeezing parameters must be >= 0")
        if np.any((eps < 0) | (eps > 1)):
            raise ConfigurationError("decoherence fractions must lie in [0, 1]")

    @property
    def m_in(self):
        return self.r.size


@dataclass(frozen=True)
class TransmissionMatrix:
    """Complex M_out x M_in transfer matrix with a scalar amplitude correction t.

    The effective matrix applied to amplitudes is t * entries; all singular
    values of `entries` must be <= 1 (physical transmission).
    """

    entries: np.ndarray
    t: float = 1.0

    def __post_init__(self):
        entries = np.atleast_2d(np.asarray(self.entries, dtype=complex))
        object.__setattr__(self, "entries", entries)
        if not 0.0 < self.t <= 1.0:
            raise ConfigurationError(f"t correction must lie in (0, 1], got {self.t}")
        smax = np.linalg.norm(entries, 2)
        if smax > 1.0 + _SV_TOL:
            raise ConfigurationError(
                f"transmission matrix has singular value {smax:.6g} > 1: not physical"
            )

    @property
    def m_in(self):
        return self.entries.shape[1]

    @property
    def m_out(self):
        return self.entries.shape[0]

    @property
    def effective(self):
        """t * entries, the matrix actually applied to amplitudes."""
        return self.t * self.entries

    def with_correction(self, t):
        return TransmissionMatrix(self.entries, t=t)


@dataclass(frozen=True)
class ComplexCovariance:
    """Complex Hermitian matrix of normally ordered correlations <:a†_mu a_nu:>."""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=complex))
        object.__setattr__(self, "sigma", sigma)
        if sigma.shape[0] != sigma.shape[1]:
            raise ConfigurationError("covariance must be square")
        scale = max(np.abs(sigma).max(), 1e-300)
        if np.abs(sigma - sigma.conj().T).max() > 1e-12 * scale:
            raise ConfigurationError("covariance is not Hermitian within 1e-12 relative")

    @property
    def m(self):
        return self.sigma.shape[0]

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.sigma)


@dataclass(frozen=True)
class Signature:
    """Sylvester inertia: counts of positive / negative / zero eigenvalues."""

    n_pos: int
    n_neg: int
    n_zero: int

    def __iter__(self):
        return iter((self.n_pos, self.n_neg, self.n_zero))


def input_moments(bank):
    """Photon numbers and coherences (n~_i, m~_i) of the thermalized squeezers.

    n~_i = sinh^2(r_i) is unaffected by decoherence; m~_i = (1-eps_i) sinh(r_i) cosh(r_i).
    """
    sh = np.sinh(bank.r)
    ch = np.cosh(bank.r)
    return sh * sh, (1.0 - bank.epsilon) * sh * ch


def y_quadrature_variance(r, eps):
    """Normally ordered Y-quadrature variance 2 sinh(r) [sinh(r) - (1-eps) cosh(r)].

    Negative iff the mode retains quantum squeezing.
    """
    sh = np.sinh(r)
    return 2.0 * sh * (sh - (1.0 - eps) * np.cosh(r))


def is_classical_input(r, eps):
    """True iff eps > 1 - tanh(r) (strictly), i.e. the Y variance is positive."""
    return bool(eps > 1.0 - np.tanh(r))


def build_input_covariance(bank):
    """Diagonal normal covariance diag(n~) of independent thermalized squeezers.

    The anomalous correlations m~ are carried separately by the sampler.
    """
    n_tilde, _ = input_moments(bank)
    return ComplexCovariance(np.diag(n_tilde.astype(complex)))


def apply_transmission(sigma_in, T):
    """Propagate a normal covariance through a transmission matrix: T† sigma T."""
    if T.m_in != sigma_in.m:
        raise ConfigurationError(
            f"transmission expects {T.m_in} input modes, covariance has {sigma_in.m}"
        )
    teff = T.effective
    out = teff.conj().T @ sigma_in.sigma @ teff
    out = 0.5 * (out + out.conj().T)  # kill roundoff asymmetry
    return ComplexCovariance(out)


def covariance_signature(sigma, zero_tol=None):
    """Count eigenvalues above +zero_tol, below -zero_tol, and within the band.

    zero_tol defaults to 1e-10 * max|eigenvalue| (relative).
    """
    if isinstance(sigma, ComplexCovariance):
        eig = sigma.eigenvalues()
    else:
        sigma = np.asarray(sigma)
        scale = max(np.abs(sigma).max(), 1e-300)
        if np.abs(sigma - sigma.conj().T).max() > 1e-10 * scale:
            raise ConfigurationError("signature requires a Hermitian matrix")
        eig = np.linalg.eigvalsh(sigma)
    if zero_tol is None:
        zero_tol = 1e-10 * max(np.abs(eig).max(), 1e-300)
    n_pos = int(np.sum(eig > zero_tol))
    n_neg = int(np.sum(eig < -zero_tol))
    return Signature(n_pos, n_neg, eig.size - n_pos - n_neg)


def quadrature_normal_covariance(bank):
    """Normally ordered 2M x 2M quadrature covariance <:dX_i dX_j:> (X then Y block).

    For independent thermalized squeezers this is diag(2(n~+m~), 2(n~-m~));
    the Y block carries the negative (squeezed) directions.
    """
    n_tilde, m_tilde = input_moments(bank)
    return np.diag(np.concatenate([2.0 * (n_tilde + m_tilde), 2.0 * (n_tilde - m_tilde)]))


def _quadrature_rep(T_eff):
    """Real 2M_out x 2M_in representation of the amplitude map on (X, Y) quadratures."""
    a = T_eff.T  # column-amplitude map alpha' = A alpha
    return np.block([[a.real, -a.imag], [a.imag, a.real]])

def transform_quadrature_normal(sigma_quad, T):
    """Congruence transform of a normally ordered quadrature covariance: S sigma S^T."""
    s = _quadrature_rep(T.effective if isinstance(T, TransmissionMatrix) else T)
    out = s @ sigma_quad @ s.T
    return 0.5 * (out + out.T)


def haar_random_unitary(m, seed):
    """Haar-distributed m x m unitary: QR of a complex Ginibre matrix, phases fixed."""
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_transmission(m, loss, seed, t=1.0):
    """Haar-random unitary with uniform loss: entries = sqrt(1-loss) * U."""
    if not 0.0 <= loss < 1.0:
        raise ConfigurationError(f"loss must lie in [0, 1), got {loss}")
    u = haar_random_unitary(m, seed)
    return TransmissionMatrix(np.sqrt(1.0 - loss) * u, t=t)


@dataclass
class FitResult:
    t: float
    eps: float
    chi2: float
    converged: bool
    warning: str = ""
    n_evaluations: int = 0
    history: list = field(default_factory=list)


def fit_ground_truth_correction(
    reference_total_counts,
    bank,
    T,
    n_samples=50_000,
    seed=7,
    reference_stderr=None,
    max_iter=200,
):
    """Fit (t, eps) minimizing the Pearson chi^2 between the simulated and
    reference total-count distributions.

    Nelder-Mead over (t, eps) in (0,1] x [0,1] with multistarts from
    (1,0), (0.95,0.05), (0.9,0.1). The objective simulates the total-count GCD
    from a fixed-seed phase-space ensemble (common random numbers), so it is a
    deterministic function of (t, eps).
    """
    # local imports: sampler/gcd depend on this module
    from . import gcd as gcd_mod
    from . import sampler as sampler_mod
    from . import stats as stats_mod

    ref = np.asarray(reference_total_counts, dtype=float)
    if abs(ref.sum() - 1.0) > 1e-9:
        raise ConfigurationError("reference distribution must sum to 1 within 1e-9")
    m_out = T.m_out
    if ref.size != m_out + 1:
        raise ConfigurationError(
            f"reference must cover total counts 0..{m_out} ({m_out + 1} bins), got {ref.size}"
        )
    ref_err = (
        np.zeros_like(ref) if reference_stderr is None else np.asarray(reference_stderr, float)
    )
    part = gcd_mod.Partition.total(m_out)
    n_evals = 0

    def objective(x):
        nonlocal n_evals
        t_val, eps_val = x
        if not (1e-3 <= t_val <= 1.0 and 0.0 <= eps_val <= 1.0):
            return 1e30
        n_evals += 1
        trial_bank = SqueezerBank(bank.r, np.full(bank.m_in, eps_val))
        trial_T = T.with_correction(t_val)
        ens = sampler_mod.draw_input_samples(trial_bank, n_samples, seed)
        ens = sampler_mod.propagate(ens, trial_T)
        p = sampler_mod.vacuum_probability(ens)
        sim = gcd_mod.gcd_threshold_from_ensemble(p, part)
        chi2, _ = stats_mod.pearson_chi2(ref, ref_err, sim.probabilities, sim.errors)
        return chi2

    starts = [(1.0, 0.0), (0.95, 0.05), (0.9, 0.1)]
    best = None
    converged = False
    for x0 in starts:
        res = minimize(
            objective,
            x0=np.array(x0),
            method="Nelder-Mead",
            bounds=[(1e-3, 1.0), (0.0, 1.0)],
            options={"maxiter": max_iter, "xatol": 1e-3, "fatol": 1e-2},
        )
        if best is None or res.fun < best.fun:
            best = res
        converged = converged or bool(res.success)

    t_fit, eps_fit = float(best.x[0]), float(best.x[1])
    warning = ""
    if not converged:
        warning = f"optimizer did not converge within {max_iter} iterations; best-so-far returned"
    elif t_fit <= 1e-3 + 1e-6:
        warning = "t driven to its lower bound; reference may be degenerate"
    if not np.isfinite(best.fun):
        raise NumericalError("ground-truth fit objective is not finite")
    return FitResult(
        t=t_fit,
        eps=eps_fit,
        chi2=float(best.fun),
        converged=converged,
        warning=warning,
        n_evaluations=n_evals,
    )
