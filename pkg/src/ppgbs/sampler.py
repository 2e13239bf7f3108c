"""Positive-P ensembles: generation, propagation, projection onto the classical
subspace, iterated whitening-coloring, and detector-outcome sampling.

Samples are stored row-per-sample.  Amplitudes propagate as alpha' = alpha @ T,
beta' = beta @ conj(T) with T = t * entries (input modes are rows of T).  All
randomness derives from counter-based Philox streams keyed by
(seed, domain, block index) over fixed blocks of `block_size` samples, so
results are reproducible for a fixed (seed, block partition) regardless of
thread count.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SingularCovarianceError
from .gaussian_state import input_moments

__all__ = [
    "BLOCK_SIZE",
    "PhaseSpaceEnsemble",
    "ProjectedVariables",
    "CountDataset",
    "draw_input_samples",
    "propagate",
    "vacuum_probability",
    "photon_number",
    "truncate_threshold",
    "truncate_pnr",
    "whiten_color",
    "iterate_projection",
    "sample_clicks",
    "sample_counts",
    "run_sampling",
]

BLOCK_SIZE = 4096

# stream domains, so one run seed never reuses noise between phases
_DOMAIN_INPUT = 0
_DOMAIN_DETECTOR = 1


def _block_rng(seed, domain, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, domain, index])))


def _blocks(n, block_size):
    for index, lo in enumerate(range(0, n, block_size)):
        yield index, lo, min(lo + block_size, n)


@dataclass
class PhaseSpaceEnsemble:
    """Paired complex amplitude samples (alpha, beta), one row per sample."""

    alpha: np.ndarray
    beta: np.ndarray
    seed: int
    stage: str = "input"

    def __post_init__(self):
        if self.alpha.shape != self.beta.shape:
            raise ConfigurationError("alpha and beta must have identical shape")
        if self.stage not in ("input", "propagated", "projected"):
            raise ConfigurationError(f"unknown ensemble stage {self.stage!r}")

    @property
    def n_samples(self):
        return self.alpha.shape[0]

    @property
    def m(self):
        return self.alpha.shape[1]


@dataclass
class ProjectedVariables:
    """Per-sample physical-range variables: click probabilities or mean photon numbers."""

    values: np.ndarray
    kind: str  # "threshold_p" | "pnr_n"
    eta_done: int = 0
    out_of_range: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("threshold_p", "pnr_n"):
            raise ConfigurationError(f"unknown projection kind {self.kind!r}")
        v = self.values
        if self.kind == "threshold_p":
            if v.size and (v.min() < 0.0 or v.max() > 1.0):
                raise ConfigurationError("threshold projections must lie in [0, 1]")
        elif v.size and v.min() < 0.0:
            raise ConfigurationError("pnr projections must be >= 0")


@dataclass
class CountDataset:
    """Detector outcome records: binary clicks or photon counts, one row per shot."""

    records: np.ndarray
    detector: str  # "threshold" | "pnr"
    c_max: int | None = None
    provenance: str = "sampler"

    def __post_init__(self):
        rec = np.asarray(self.records)
        if rec.ndim != 2:
            raise ConfigurationError("records must be a 2-d array")
        if self.detector == "threshold":
            if rec.size and rec.max(initial=0) > 1:
                raise ConfigurationError("threshold records must be 0/1")
        elif self.detector == "pnr":
            if self.c_max is None:
                raise ConfigurationError("pnr dataset requires c_max")
            if rec.size and rec.max(initial=0) > self.c_max:
                raise ConfigurationError(f"pnr records exceed c_max={self.c_max}")
        else:
            raise ConfigurationError(f"unknown detector {self.detector!r}")
        if rec.size and rec.min(initial=0) < 0:
            raise ConfigurationError("counts must be nonnegative")
        object.__setattr__(self, "records", rec.astype(np.uint8))

    @property
    def n_samples(self):
        return self.records.shape[0]

    @property
    def m(self):
        return self.records.shape[1]


def _delta_amplitudes(bank):
    """delta_± = sqrt((n~ ± m~)/2); delta_- is imaginary for squeezing-dominated modes."""
    n_tilde, m_tilde = input_moments(bank)
    d_plus = np.sqrt((n_tilde + m_tilde) / 2.0).astype(complex)
    d_minus = np.sqrt(((n_tilde - m_tilde) / 2.0).astype(complex))
    return d_plus, d_minus


def draw_input_samples(bank, n, seed, block_size=BLOCK_SIZE):
    """Draw N positive-P samples of the thermalized-squeezer input state.

    alpha_j = d+_j w_j + i d-_j w_{j+M}, beta_j = d+_j w_j - i d-_j w_{j+M}
    with w standard normal; complex arithmetic keeps the algebra valid when
    d- is imaginary (squeezing-dominated modes).
    """
    if n < 1:
        raise ConfigurationError("need at least one sample")
    m = bank.m_in
    d_plus, d_minus = _delta_amplitudes(bank)
    alpha = np.empty((n, m), dtype=complex)
    beta = np.empty((n, m), dtype=complex)
    for index, lo, hi in _blocks(n, block_size):
        w = _block_rng(seed, _DOMAIN_INPUT, index).standard_normal((hi - lo, 2 * m))
        real_part = w[:, :m] * d_plus
        imag_part = 1j * (w[:, m:] * d_minus)
        alpha[lo:hi] = real_part + imag_part
        beta[lo:hi] = real_part - imag_part
    return PhaseSpaceEnsemble(alpha, beta, seed=seed, stage="input")


def propagate(ens, T):
    """Send the ensemble through the network: alpha' = alpha T, beta' = beta conj(T)."""
    if ens.stage != "input":
        raise ConfigurationError("propagate expects an input-stage ensemble")
    teff = T.effective
    if teff.shape[0] != ens.m:
        raise ConfigurationError(
            f"transmission expects {teff.shape[0]} input modes, ensemble has {ens.m}"
        )
    return PhaseSpaceEnsemble(
        ens.alpha @ teff, ens.beta @ np.conj(teff), seed=ens.seed, stage="propagated"
    )


def vacuum_probability(ens):
    """Entrywise phase-space vacuum probability exp(-alpha_j beta_j)."""
    return np.exp(-ens.alpha * ens.beta)


def photon_number(ens):
    """Entrywise phase-space photon number alpha_j beta_j."""
    return ens.alpha * ens.beta


def truncate_threshold(p):
    """Project no-click amplitudes onto [0, 1]: min(1, max(Re p, 0))."""
    return ProjectedVariables(np.clip(np.real(p), 0.0, 1.0), kind="threshold_p")


def truncate_pnr(n):
    """Project photon numbers onto [0, inf): max(Re n, 0)."""
    return ProjectedVariables(np.maximum(np.real(n), 0.0), kind="pnr_n")


def _sym_root(mat, clip_negative=True):
    """Symmetric (ZCA) matrix square root via eigendecomposition."""
    w, v = np.linalg.eigh(mat)
    if clip_negative:
        w = np.maximum(w, 0.0)
    return (v * np.sqrt(w)) @ v.T


def whiten_color(values, target_mean, target_cov, current_mean, current_cov, ridge=1e-12):
    """Affine transform matching sample moments to targets.

    Returns (x - mu_cur) @ cov_cur^(-1/2) @ cov_tgt^(1/2) + mu_tgt using
    symmetric (ZCA) roots.  current_cov is regularized with a relative ridge
    before the inverse root; if it is rank-deficient beyond that, raises
    SingularCovarianceError naming the offending modes.
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[1]
    cur = 0.5 * (current_cov + current_cov.T)
    delta = ridge * np.trace(cur) / m
    w, v = np.linalg.eigh(cur + delta * np.eye(m))
    if w.min() <= 0.0:
        diag = np.diag(cur)
        bad = np.flatnonzero(diag <= 1e-12 * max(diag.max(initial=0.0), 1e-300))
        raise SingularCovarianceError(
            f"current covariance rank-deficient beyond regularization (modes {bad.tolist()})",
            modes=bad,
        )
    inv_root = (v / np.sqrt(w)) @ v.T
    tgt_root = _sym_root(0.5 * (target_cov + target_cov.T))
    transform = inv_root @ tgt_root
    return (values - current_mean) @ transform + target_mean


def _complex_moments(pi):
    """Mean vector and (transpose, no conjugation) covariance of complex samples,
    real parts taken at the end."""
    n = pi.shape[0]
    mean = pi.sum(axis=0) / n
    cov = (pi.T @ pi) / n - np.outer(mean, mean)
    cov = cov.real
    return mean.real, 0.5 * (cov + cov.T)


def _real_moments(values):
    n = values.shape[0]
    mean = values.sum(axis=0) / n
    cov = (values.T @ values) / n - np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


def _out_of_range_fraction(values, kind):
    if kind == "threshold_p":
        bad = np.count_nonzero(values < 0.0) + np.count_nonzero(values > 1.0)
    else:
        bad = np.count_nonzero(values < 0.0)
    return bad / values.size


def _clip(values, kind):
    if kind == "threshold_p":
        return np.clip(values, 0.0, 1.0)
    return np.maximum(values, 0.0)


def _whiten_iterations(x, target_mean, target_cov, kind, eta_max):
    """Iterate whiten-color toward the raw moments, re-truncating each round.

    Returns (final values, out-of-range fractions for eta = 1..eta_max).
    Re-estimates current moments every iteration; skips the transform when
    current moments already equal the targets (identity map).
    """
    fractions = []
    scale = max(1.0, np.abs(target_cov).max(), np.abs(target_mean).max())
    for _ in range(eta_max):
        cur_mean, cur_cov = _real_moments(x)
        if (
            np.abs(cur_mean - target_mean).max() <= 1e-13 * scale
            and np.abs(cur_cov - target_cov).max() <= 1e-13 * scale
        ):
            fractions.append(0.0)
            continue
        y = whiten_color(x, target_mean, target_cov, cur_mean, cur_cov)
        fractions.append(_out_of_range_fraction(y, kind))
        x = _clip(y, kind)
    return x, fractions


def iterate_projection(ens, detector, eta_max=10):
    """Project a propagated ensemble and iterate whitening-coloring eta_max times.

    Targets are the raw (untruncated) phase-space moments of the projection
    variable; the recorded out-of-range trace starts with the raw fraction at
    eta=0 and is non-increasing in practice.
    """
    if ens.stage != "propagated":
        raise ConfigurationError("iterate_projection expects a propagated ensemble")
    if detector == "threshold":
        pi = vacuum_probability(ens)
        kind = "threshold_p"
    elif detector == "pnr":
        pi = photon_number(ens)
        kind = "pnr_n"
    else:
        raise ConfigurationError(f"unknown detector {detector!r}")
    target_mean, target_cov = _complex_moments(pi)
    raw_fraction = _out_of_range_fraction(np.real(pi), kind)
    x = _clip(np.real(pi), kind)
    x, fractions = _whiten_iterations(x, target_mean, target_cov, kind, eta_max)
    return ProjectedVariables(
        values=x, kind=kind, eta_done=eta_max, out_of_range=[raw_fraction] + fractions
    )


def sample_clicks(proj, seed, block_size=BLOCK_SIZE):
    """Draw one threshold record per sample: click_j ~ Bernoulli(1 - p_j)."""
    if proj.kind != "threshold_p":
        raise ConfigurationError("sample_clicks requires threshold projections")
    p = proj.values
    records = np.empty(p.shape, dtype=np.uint8)
    for index, lo, hi in _blocks(p.shape[0], block_size):
        u = _block_rng(seed, _DOMAIN_DETECTOR, index).random(p[lo:hi].shape)
        records[lo:hi] = u < (1.0 - p[lo:hi])
    return CountDataset(records, detector="threshold", provenance="sampler")


def sample_counts(proj, c_max, seed, block_size=BLOCK_SIZE):
    """Draw one PNR record per sample: count_j ~ Poisson(n_j) clipped at c_max."""
    if proj.kind != "pnr_n":
        raise ConfigurationError("sample_counts requires pnr projections")
    if not 0 < c_max <= 255:
        raise ConfigurationError("c_max must lie in 1..255")
    n = proj.values
    records = np.empty(n.shape, dtype=np.uint8)
    for index, lo, hi in _blocks(n.shape[0], block_size):
        c = _block_rng(seed, _DOMAIN_DETECTOR, index).poisson(n[lo:hi])
        records[lo:hi] = np.minimum(c, c_max)
    return CountDataset(records, detector="pnr", c_max=c_max, provenance="sampler")


def run_sampling(
    bank,
    T,
    n,
    seed,
    detector,
    eta_max=10,
    c_max=13,
    block_size=BLOCK_SIZE,
):
    """End-to-end block-streamed sampling run.

    Never materializes the full (alpha, beta) ensemble: each block is
    generated, propagated, and reduced to its projection variable, keeping
    peak memory at O(N*M) with a small constant.  Returns the dataset and a
    diagnostics dict (per-iteration out-of-range fractions, timing, seed).
    """
    if detector not in ("threshold", "pnr"):
        raise ConfigurationError(f"unknown detector {detector!r}")
    t_start = time.perf_counter()
    m_in = bank.m_in
    teff = T.effective
    if teff.shape[0] != m_in:
        raise ConfigurationError(
            f"transmission expects {teff.shape[0]} input modes, bank has {m_in}"
        )
    m_out = teff.shape[1]
    teff_conj = np.conj(teff)
    d_plus, d_minus = _delta_amplitudes(bank)
    kind = "threshold_p" if detector == "threshold" else "pnr_n"

    x = np.empty((n, m_out))
    sum1 = np.zeros(m_out, dtype=complex)
    sum2 = np.zeros((m_out, m_out), dtype=complex)
    raw_bad = 0
    for index, lo, hi in _blocks(n, block_size):
        w = _block_rng(seed, _DOMAIN_INPUT, index).standard_normal((hi - lo, 2 * m_in))
        real_part = w[:, :m_in] * d_plus
        imag_part = 1j * (w[:, m_in:] * d_minus)
        alpha = (real_part + imag_part) @ teff
        beta = (real_part - imag_part) @ teff_conj
        pi = alpha * beta
        if detector == "threshold":
            np.exp(-pi, out=pi)
        sum1 += pi.sum(axis=0)
        sum2 += pi.T @ pi
        re = np.real(pi)
        if detector == "threshold":
            raw_bad += np.count_nonzero(re < 0.0) + np.count_nonzero(re > 1.0)
        else:
            raw_bad += np.count_nonzero(re < 0.0)
        x[lo:hi] = _clip(re, kind)

    mean = sum1 / n
    cov = (sum2 / n - np.outer(mean, mean)).real
    target_mean = mean.real
    target_cov = 0.5 * (cov + cov.T)
    x, fractions = _whiten_iterations(x, target_mean, target_cov, kind, eta_max)
    fractions = [raw_bad / (n * m_out)] + fractions

    proj = ProjectedVariables(values=x, kind=kind, eta_done=eta_max, out_of_range=fractions)
    if detector == "threshold":
        data = sample_clicks(proj, seed, block_size)
    else:
        data = sample_counts(proj, c_max, seed, block_size)
    diagnostics = {
        "out_of_range": fractions,
        "eta_max": eta_max,
        "seed": seed,
        "block_size": block_size,
        "n_samples": n,
        "modes": m_out,
        "detector": detector,
        "elapsed_seconds": time.perf_counter() - t_start,
    }
    return data, diagnostics
