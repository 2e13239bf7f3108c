"""Grouped count distributions and marginals, from phase-space ensembles
(Fourier / Poisson-kernel estimators) or from count datasets (direct binning),
with batch-means error bars.
"""

import csv
import itertools
import json
import string
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._kernels_py import _factor_matrix
from .errors import ConfigurationError
from .sampler import CountDataset

__all__ = [
    "DEFAULT_ERROR_BLOCK",
    "Partition",
    "GcdResult",
    "gcd_threshold_from_ensemble",
    "gcd_pnr_from_ensemble",
    "gcd_from_counts",
    "marginal_distribution",
    "batch_means_error",
]

DEFAULT_ERROR_BLOCK = 10_000
_MAX_BINS = 1 << 20


@dataclass(frozen=True)
class Partition:
    """Disjoint mode-index subsets S_1..S_d covering part of the output modes."""

    subsets: tuple

    def __post_init__(self):
        subsets = tuple(np.asarray(sorted(s), dtype=int) for s in self.subsets)
        object.__setattr__(self, "subsets", subsets)
        if not subsets:
            raise ConfigurationError("partition needs at least one subset")
        seen = set()
        for s in subsets:
            if s.size == 0:
                raise ConfigurationError("empty subset in partition")
            if s.min() < 0:
                raise ConfigurationError("negative mode index in partition")
            dup = seen.intersection(s.tolist())
            if dup:
                raise ConfigurationError(f"partition subsets overlap on modes {sorted(dup)}")
            seen.update(s.tolist())

    @property
    def d(self):
        return len(self.subsets)

    def validate_modes(self, m):
        for s in self.subsets:
            if s.max() >= m:
                raise ConfigurationError(f"partition index {s.max()} out of range for M={m}")

    @classmethod
    def total(cls, m):
        return cls((list(range(m)),))

    @classmethod
    def halves(cls, m):
        half = m // 2
        return cls((list(range(half)), list(range(half, m))))

    @classmethod
    def singletons(cls, modes):
        return cls(tuple([int(mo)] for mo in modes))

    def to_list(self):
        return [list(map(int, s)) for s in self.subsets]


@dataclass
class GcdResult:
    """d-dimensional grouped count distribution with standard errors."""

    probabilities: np.ndarray
    errors: np.ndarray
    kind: str  # "threshold" | "pnr"
    partition: list
    n_samples: int = 0
    overflow: bool = False
    capped: int | None = None

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.probabilities.shape != self.errors.shape:
            raise ConfigurationError("probabilities and errors must have the same shape")

    @property
    def d(self):
        return self.probabilities.ndim

    def flat(self):
        return self.probabilities.ravel(), self.errors.ravel()

    def total_error(self):
        return float(self.errors.sum())

    def is_normalized(self, factor=5.0, abs_tol=1e-9):
        return abs(self.probabilities.sum() - 1.0) <= factor * self.total_error() + abs_tol

    def negative_excursions(self, factor=5.0):
        """Indices of bins more negative than -factor * stderr (should be empty)."""
        mask = self.probabilities < -(factor * self.errors)
        return np.argwhere(mask)

    def marginalize(self, keep_axis):
        """Sum out all axes except keep_axis (errors added in quadrature)."""
        axes = tuple(a for a in range(self.d) if a != keep_axis)
        return GcdResult(
            probabilities=self.probabilities.sum(axis=axes),
            errors=np.sqrt((self.errors**2).sum(axis=axes)),
            kind=self.kind,
            partition=[self.partition[keep_axis]],
            n_samples=self.n_samples,
            overflow=self.overflow,
            capped=self.capped,
        )

    def axis_labels(self):
        labels = []
        for size in self.probabilities.shape:
            vals = list(range(size))
            if self.overflow:
                vals = vals[:-1] + ["overflow"]
            labels.append(vals)
        return labels

    def to_json(self):
        return {
            "kind": self.kind,
            "partition": self.partition,
            "bins": self.axis_labels(),
            "probabilities": self.probabilities.tolist(),
            "stderr": self.errors.tolist(),
            "n_samples": int(self.n_samples),
            "overflow": bool(self.overflow),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            probabilities=np.asarray(obj["probabilities"], dtype=float),
            errors=np.asarray(obj["stderr"], dtype=float),
            kind=obj["kind"],
            partition=obj["partition"],
            n_samples=int(obj.get("n_samples", 0)),
            overflow=bool(obj.get("overflow", False)),
        )

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def to_csv(self, path):
        """One row per bin: bin indices, probability, stderr."""
        labels = self.axis_labels()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"m_{j + 1}" for j in range(self.d)] + ["probability", "stderr"])
            for idx in itertools.product(*[range(s) for s in self.probabilities.shape]):
                row = [labels[j][idx[j]] for j in range(self.d)]
                writer.writerow(row + [self.probabilities[idx], self.errors[idx]])


def _error_block_size(n, block_size):
    if block_size is None:
        block_size = DEFAULT_ERROR_BLOCK
    if n // block_size < 2:
        block_size = max(1, n // 16)
    return block_size


def _einsum_subscripts(d):
    letters = string.ascii_lowercase[:d]
    return ",".join(f"z{c}" for c in letters) + "->" + letters


def _fourier_tensor_sums(p, subsets):
    """Sample sums of the multi-subset Fourier observable for one chunk."""
    cols = [np.ascontiguousarray(p[:, s]) for s in subsets]
    if len(subsets) == 1:
        return kernels.threshold_fourier_sums(cols[0])
    if len(subsets) == 2:
        return kernels.threshold_fourier_sums_2d(cols[0], cols[1])
    factors = [_factor_matrix(c) for c in cols]
    return np.einsum(_einsum_subscripts(len(subsets)), *factors)


def gcd_threshold_from_ensemble(p, part, error_block_size=None):
    """Threshold-detector GCD from per-sample no-click amplitudes.

    Per sample and subset, the coefficient of z^m in prod_k (p_k + (1-p_k) z)
    is the probability of m clicks; evaluated through the inverse DFT of the
    Fourier observable on the (M_j + 1)-point angle grid.  Raw complex p is
    allowed (the estimator is linear in the per-mode factors); Re is taken at
    the end.  Errors are batch means over sample blocks.
    """
    p = np.asarray(p)
    if p.ndim != 2:
        raise ConfigurationError("ensemble matrix must be 2-d (samples x modes)")
    part.validate_modes(p.shape[1])
    p = p.astype(complex, copy=False)
    n = p.shape[0]
    shape = tuple(len(s) + 1 for s in part.subsets)
    if np.prod(shape) > _MAX_BINS:
        raise ConfigurationError("GCD bin tensor too large")
    s1 = _error_block_size(n, error_block_size)
    n_blocks = n // s1
    axes = tuple(range(1, len(shape) + 1))
    block_tensors = np.empty((n_blocks,) + shape, dtype=complex)
    total = np.zeros(shape, dtype=complex)
    for b in range(n_blocks):
        t = _fourier_tensor_sums(p[b * s1 : (b + 1) * s1], part.subsets)
        block_tensors[b] = t
        total += t
    if n_blocks * s1 < n:
        total += _fourier_tensor_sums(p[n_blocks * s1 :], part.subsets)
    probs = np.fft.ifftn(total / n).real
    block_probs = np.fft.ifftn(block_tensors / s1, axes=axes).real
    errors = block_probs.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    return GcdResult(
        probabilities=probs,
        errors=errors,
        kind="threshold",
        partition=part.to_list(),
        n_samples=n,
    )


def _poisson_weights(n_s, m_max):
    """(N, m_max + 2) Poisson-kernel weights n^m e^{-n} / m! plus the overflow tail."""
    n_samp = n_s.shape[0]
    w = np.empty((n_samp, m_max + 2), dtype=n_s.dtype)
    w[:, 0] = np.exp(-n_s)
    for m in range(1, m_max + 1):
        w[:, m] = w[:, m - 1] * n_s / m
    w[:, m_max + 1] = 1.0 - w[:, : m_max + 1].sum(axis=1)
    return w


def gcd_pnr_from_ensemble(n_mat, part, m_max, error_block_size=None):
    """PNR-detector GCD from per-sample photon numbers.

    Per subset, G(m) = < (n_S)^m e^{-n_S} / m! > with n_S the subset sum; no
    DFT needed.  Counts above m_max are aggregated into a final overflow bin
    on each axis; a warning fires if the total overflow mass exceeds 1%.
    """
    n_mat = np.asarray(n_mat)
    if n_mat.ndim != 2:
        raise ConfigurationError("ensemble matrix must be 2-d (samples x modes)")
    if m_max < 0:
        raise ConfigurationError("m_max must be >= 0")
    part.validate_modes(n_mat.shape[1])
    n = n_mat.shape[0]
    dtype = complex if np.iscomplexobj(n_mat) else float
    sums = [n_mat[:, s].sum(axis=1).astype(dtype) for s in part.subsets]
    shape = tuple(m_max + 2 for _ in part.subsets)
    if np.prod(shape) > _MAX_BINS:
        raise ConfigurationError("GCD bin tensor too large")
    s1 = _error_block_size(n, error_block_size)
    n_blocks = n // s1
    subs = _einsum_subscripts(part.d)

    def chunk_sums(lo, hi):
        weights = [_poisson_weights(ns[lo:hi], m_max) for ns in sums]
        if part.d == 1:
            return weights[0].sum(axis=0)
        return np.einsum(subs, *weights)

    block_tensors = np.empty((n_blocks,) + shape, dtype=dtype)
    total = np.zeros(shape, dtype=dtype)
    for b in range(n_blocks):
        t = chunk_sums(b * s1, (b + 1) * s1)
        block_tensors[b] = t
        total += t
    if n_blocks * s1 < n:
        total += chunk_sums(n_blocks * s1, n)
    probs = (total / n).real if dtype is complex else total / n
    block_probs = (block_tensors / s1).real if dtype is complex else block_tensors / s1
    errors = block_probs.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    core = probs[tuple(slice(0, m_max + 1) for _ in range(part.d))].sum()
    if 1.0 - core > 0.01:
        warnings.warn(
            f"PNR overflow bins carry {1.0 - core:.3f} probability mass (m_max={m_max})",
            stacklevel=2,
        )
    return GcdResult(
        probabilities=np.asarray(probs, dtype=float),
        errors=errors,
        kind="pnr",
        partition=part.to_list(),
        n_samples=n,
        overflow=True,
    )


def gcd_from_counts(data, part):
    """Empirical GCD of a count dataset: multi-dimensional histogram of subset sums.

    Errors are Poissonian, sqrt(G/N) per bin.
    """
    part.validate_modes(data.m)
    rec = data.records
    n = data.n_samples
    if n == 0:
        raise ConfigurationError("empty dataset")
    if data.detector == "threshold":
        sizes = [len(s) + 1 for s in part.subsets]
    else:
        sizes = [len(s) * data.c_max + 1 for s in part.subsets]
    if np.prod(sizes) > _MAX_BINS:
        raise ConfigurationError("GCD bin tensor too large")
    flat = np.zeros(int(np.prod(sizes)), dtype=np.int64)
    ravel = np.zeros(n, dtype=np.int64)
    for size, s in zip(sizes, part.subsets):
        ravel = ravel * size + rec[:, s].sum(axis=1, dtype=np.int64)
    np.add.at(flat, ravel, 1)
    probs = flat.reshape(sizes) / n
    errors = np.sqrt(probs / n)
    return GcdResult(
        probabilities=probs,
        errors=errors,
        kind=data.detector,
        partition=part.to_list(),
        n_samples=n,
    )


def marginal_distribution(source, modes, cap=None, error_block_size=None):
    """Joint count distribution on a K-mode subset, with per-mode counts capped.

    source is either a CountDataset or a pair (matrix, kind) of per-sample
    phase-space variables with kind in {"threshold_p", "pnr_n"}.  For
    threshold data the cap is 1; for PNR sources the top bin aggregates all
    counts >= cap (mirroring a detector clamp).
    """
    modes = [int(mo) for mo in modes]
    if len(set(modes)) != len(modes):
        raise ConfigurationError("marginal mode list contains duplicates")
    if isinstance(source, CountDataset):
        m_total = source.m
        if len(modes) > m_total:
            raise ConfigurationError("marginal order exceeds the mode count")
        if max(modes) >= m_total:
            raise ConfigurationError("marginal mode index out of range")
        cap_eff = 1 if source.detector == "threshold" else (cap or source.c_max)
        sizes = [cap_eff + 1] * len(modes)
        if np.prod(sizes) > _MAX_BINS:
            raise ConfigurationError("marginal bin tensor too large")
        sub = np.minimum(source.records[:, modes], cap_eff)
        n = source.n_samples
        flat = np.zeros(int(np.prod(sizes)), dtype=np.int64)
        ravel = np.zeros(n, dtype=np.int64)
        for j in range(len(modes)):
            ravel = ravel * (cap_eff + 1) + sub[:, j].astype(np.int64)
        np.add.at(flat, ravel, 1)
        probs = flat.reshape(sizes) / n
        return GcdResult(
            probabilities=probs,
            errors=np.sqrt(probs / n),
            kind=source.detector,
            partition=[[mo] for mo in modes],
            n_samples=n,
            capped=cap_eff,
        )

    matrix, kind = source
    matrix = np.asarray(matrix)
    if len(modes) > matrix.shape[1]:
        raise ConfigurationError("marginal order exceeds the mode count")
    if max(modes) >= matrix.shape[1]:
        raise ConfigurationError("marginal mode index out of range")
    if kind == "threshold_p":
        cap_eff = 1
    elif kind == "pnr_n":
        if cap is None:
            raise ConfigurationError("pnr ensemble marginal requires a cap")
        cap_eff = int(cap)
        if cap_eff < 1:
            raise ConfigurationError("cap must be >= 1")
    else:
        raise ConfigurationError(f"unknown ensemble kind {kind!r}")
    sizes = [cap_eff + 1] * len(modes)
    if np.prod(sizes) > _MAX_BINS:
        raise ConfigurationError("marginal bin tensor too large")
    n = matrix.shape[0]
    dtype = complex if np.iscomplexobj(matrix) else float
    s1 = _error_block_size(n, error_block_size)
    n_blocks = n // s1
    subs = _einsum_subscripts(len(modes))

    def mode_weights(lo, hi):
        out = []
        for mo in modes:
            col = matrix[lo:hi, mo].astype(dtype)
            if kind == "threshold_p":
                w = np.stack([col, 1.0 - col], axis=1)
            else:
                # bins 0..cap-1 plus aggregated >= cap
                w = _poisson_weights(col, cap_eff - 1)
            out.append(w)
        return out

    def chunk_sums(lo, hi):
        weights = mode_weights(lo, hi)
        if len(modes) == 1:
            return weights[0].sum(axis=0)
        return np.einsum(subs, *weights)

    block_tensors = np.empty((n_blocks,) + tuple(sizes), dtype=dtype)
    total = np.zeros(tuple(sizes), dtype=dtype)
    for b in range(n_blocks):
        t = chunk_sums(b * s1, (b + 1) * s1)
        block_tensors[b] = t
        total += t
    if n_blocks * s1 < n:
        total += chunk_sums(n_blocks * s1, n)
    probs = np.asarray((total / n).real, dtype=float)
    block_probs = (block_tensors / s1).real
    errors = block_probs.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    return GcdResult(
        probabilities=probs,
        errors=errors,
        kind="threshold" if kind == "threshold_p" else "pnr",
        partition=[[mo] for mo in modes],
        n_samples=n,
        capped=cap_eff,
    )


def batch_means_error(values, block_size):
    """Mean and batch-means standard error of per-sample values.

    Splits into floor(N / block_size) equal blocks (remainder dropped);
    stderr = sqrt(var(block means) / n_blocks).
    """
    values = np.asarray(values, dtype=float).ravel()
    n_blocks = values.size // block_size
    if n_blocks < 2:
        raise ConfigurationError("batch means needs at least 2 blocks")
    used = values[: n_blocks * block_size].reshape(n_blocks, block_size)
    means = used.mean(axis=1)
    stderr = means.std(ddof=1) / np.sqrt(n_blocks)
    return float(means.mean()), float(stderr)
