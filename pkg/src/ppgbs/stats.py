"""Distribution comparisons: Pearson chi^2, Wilson-Hilferty / Lugannani-Rice
Z-scores, cross-entropy benchmarking, and multi-test validation reports.
"""

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import gcd as gcd_mod
from . import oracle as oracle_mod
from .errors import ConfigurationError, NumericalError
from .sampler import CountDataset

__all__ = [
    "ChiSquareResult",
    "XebResult",
    "ValidationReport",
    "pearson_chi2",
    "z_from_chi2",
    "max_z_report",
    "xeb_score",
    "xeb_protocol",
    "pool_low_expectation_bins",
    "sample_mode_subsets",
    "ExactTruth",
    "EnsembleTruth",
    "CountsTruth",
    "run_validation_suite",
]

_Z_HANDOVER = 6.0


@dataclass
class ChiSquareResult:
    chi2: float
    k: int
    z: float
    method: str  # "wilson_hilferty" | "lugannani_rice"
    name: str = ""

    def to_json(self):
        return {
            "name": self.name,
            "chi2": self.chi2,
            "k": self.k,
            "z": self.z,
            "method": self.method,
        }


@dataclass
class XebResult:
    per_photon_number: dict
    m_max: int
    samples_per_sector: int
    skipped: list = field(default_factory=list)

    @property
    def max_value(self):
        return max(self.per_photon_number.values()) if self.per_photon_number else None

    def to_json(self):
        return {
            "per_photon_number": {str(k): v for k, v in self.per_photon_number.items()},
            "m_max": self.m_max,
            "samples_per_sector": self.samples_per_sector,
            "skipped_sectors": self.skipped,
            "max": self.max_value,
        }


@dataclass
class ValidationReport:
    tests: list
    max_abs_z: float
    worst_test: str
    passed: bool
    xeb: XebResult | None = None
    metadata: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "tests": [t.to_json() for t in self.tests],
            "max_abs_z": self.max_abs_z,
            "worst_test": self.worst_test,
            "xeb": self.xeb.to_json() if self.xeb is not None else None,
            "pass": self.passed,
            "metadata": self.metadata,
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def pearson_chi2(g_truth, err_truth, g_sample, err_sample):
    """Pearson chi^2 with uncertainty in the theoretical value.

    chi2 = sum_i (G_i - G_{S,i})^2 / (sigma_i^2 + sigma_{S,i}^2) over bins with
    nonzero combined variance; bins with zero combined variance and equal
    values are skipped and k reduced.  Returns (chi2, k) with
    k = included bins - 1.
    """
    gt = np.asarray(g_truth, dtype=float).ravel()
    gs = np.asarray(g_sample, dtype=float).ravel()
    et = np.asarray(err_truth, dtype=float).ravel()
    es = np.asarray(err_sample, dtype=float).ravel()
    if not (gt.shape == gs.shape == et.shape == es.shape):
        raise ConfigurationError("chi2 inputs must have equal bin counts")
    denom = et**2 + es**2
    diff = gt - gs
    degenerate = denom == 0.0
    skip = degenerate & (diff == 0.0)
    include = ~skip
    k = int(np.count_nonzero(include)) - 1
    if k < 1:
        raise ConfigurationError("all bins degenerate: chi2 undefined")
    bad = degenerate & (diff != 0.0)
    if np.any(bad):
        return float("inf"), k
    chi2 = float(np.sum(diff[include] ** 2 / denom[include]))
    return chi2, k


def z_from_chi2(chi2, k, name=""):
    """Z-score of a chi^2 value: Wilson-Hilferty below |Z| = 6, Lugannani-Rice above.

    Z_WH = ((chi2/k)^(1/3) - (1 - 2/(9k))) / sqrt(2/(9k));
    Z_LR = sign(chi2/k - 1) * sqrt(k (chi2/k - 1 - ln(chi2/k))).
    """
    if chi2 < 0 or k < 1:
        raise ConfigurationError("need chi2 >= 0 and k >= 1")
    x = chi2 / k
    z_wh = (x ** (1.0 / 3.0) - (1.0 - 2.0 / (9.0 * k))) / math.sqrt(2.0 / (9.0 * k))
    if abs(z_wh) < _Z_HANDOVER or x == 0.0:
        return ChiSquareResult(chi2=float(chi2), k=int(k), z=float(z_wh),
                               method="wilson_hilferty", name=name)
    if math.isinf(x):
        z_lr = math.inf
    else:
        z_lr = math.copysign(math.sqrt(k * (x - 1.0 - math.log(x))), x - 1.0)
    return ChiSquareResult(chi2=float(chi2), k=int(k), z=float(z_lr),
                           method="lugannani_rice", name=name)


def max_z_report(tests, xeb=None, metadata=None, threshold=3.0):
    """Assemble a validation report: per-test Z, the worst test, pass at max|Z| <= 3."""
    if not tests:
        raise ConfigurationError("report needs at least one test")
    worst = max(tests, key=lambda t: abs(t.z))
    max_abs = abs(worst.z)
    return ValidationReport(
        tests=list(tests),
        max_abs_z=float(max_abs),
        worst_test=worst.name,
        passed=bool(max_abs <= threshold),
        xeb=xeb,
        metadata=metadata or {},
    )


def xeb_score(records, pattern_prob_fn, prob_n):
    """Mean negative log-likelihood ratio -(1/N) sum ln(Pr(S_i)/Pr(n)).

    All records must share the same total count; a zero-probability record is
    a model/state mismatch and raises NumericalError naming the record.
    """
    records = np.asarray(records, dtype=int)
    totals = records.sum(axis=1)
    if records.shape[0] == 0:
        raise ConfigurationError("xeb needs at least one record")
    if np.any(totals != totals[0]):
        raise ConfigurationError("xeb records must share one total count")
    if prob_n <= 0:
        raise NumericalError("sector probability must be positive")
    acc = 0.0
    for i, rec in enumerate(records):
        pr = pattern_prob_fn(tuple(int(c) for c in rec))
        if pr <= 0.0:
            raise NumericalError(
                f"record {i} with pattern {rec.tolist()} has zero model probability"
            )
        acc += math.log(pr / prob_n)
    return -acc / records.shape[0]


def xeb_protocol(
    data,
    pattern_prob_fn,
    sector_prob_fn=None,
    seed=0,
    max_photons=15,
    samples_per_sector=1000,
):
    """Cross-entropy benchmark over total-count sectors of a threshold dataset.

    Scans prefix cutoffs M_max = 1..M, restricting records to modes 1..M_max,
    and keeps the cutoff with the most records at exactly `max_photons`
    restricted counts (ties resolved to the largest M_max).  Every sector
    n <= max_photons with at least `samples_per_sector` records contributes a
    score from a seeded without-replacement draw; pattern probabilities are
    mode-marginalized to the first M_max modes.  If sector_prob_fn is omitted
    the sector probability is the sum of the sector's pattern probabilities
    (desk scale only).
    """
    if data.detector != "threshold":
        raise ConfigurationError("xeb protocol expects a threshold dataset")
    rec = data.records
    n_samples, m = rec.shape
    if n_samples == 0:
        raise ConfigurationError("empty dataset")
    prefix = rec.astype(np.int64).cumsum(axis=1)
    hits = np.array([(prefix[:, mm - 1] == max_photons).sum() for mm in range(1, m + 1)])
    best_hits = hits.max()
    m_max = int(np.flatnonzero(hits == best_hits).max() + 1)  # tie -> largest
    restricted = prefix[:, m_max - 1]

    per_n = {}
    skipped = []
    for n_val in range(max_photons + 1):
        idx = np.flatnonzero(restricted == n_val)
        if idx.size < samples_per_sector:
            if idx.size:
                skipped.append(
                    {"n": n_val, "records": int(idx.size), "reason": "fewer than required"}
                )
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, n_val]))
        chosen = rng.choice(idx, size=samples_per_sector, replace=False)
        sector_records = rec[chosen][:, :m_max]
        if sector_prob_fn is not None:
            prob_n = sector_prob_fn(n_val)
        else:
            prob_n = _sector_probability(pattern_prob_fn, m_max, n_val)
        per_n[n_val] = xeb_score(sector_records, pattern_prob_fn, prob_n)
    if not per_n:
        raise ConfigurationError("no sector reached the required record count")
    return XebResult(
        per_photon_number=per_n,
        m_max=m_max,
        samples_per_sector=samples_per_sector,
        skipped=skipped,
    )


def _sector_probability(pattern_prob_fn, m_max, n_val):
    if m_max > 20:
        raise ConfigurationError("sector probability summation limited to M_max <= 20")
    total = 0.0
    for ones in itertools.combinations(range(m_max), n_val):
        pattern = [0] * m_max
        for j in ones:
            pattern[j] = 1
        total += pattern_prob_fn(tuple(pattern))
    return total


def pool_low_expectation_bins(g_truth, err_truth, g_sample, err_sample, n_samples,
                              min_expected=10.0):
    """Pool bins whose expected counts n*G_truth fall below min_expected.

    Pearson's chi^2 normal approximation needs adequately filled bins; the
    pooled bin aggregates all low-expectation bins (probabilities summed,
    errors in quadrature).  Returns the four filtered arrays.
    """
    gt = np.asarray(g_truth, dtype=float).ravel()
    gs = np.asarray(g_sample, dtype=float).ravel()
    et = np.asarray(err_truth, dtype=float).ravel()
    es = np.asarray(err_sample, dtype=float).ravel()
    keep = n_samples * gt >= min_expected
    pooled = ~keep
    gt_out = gt[keep]
    gs_out = gs[keep]
    et_out = et[keep]
    es_out = es[keep]
    if np.count_nonzero(pooled) > 1:
        gt_out = np.append(gt_out, gt[pooled].sum())
        gs_out = np.append(gs_out, gs[pooled].sum())
        et_out = np.append(et_out, np.sqrt((et[pooled] ** 2).sum()))
        es_out = np.append(es_out, np.sqrt((es[pooled] ** 2).sum()))
    elif np.count_nonzero(pooled) == 1:
        gt_out = np.append(gt_out, gt[pooled])
        gs_out = np.append(gs_out, gs[pooled])
        et_out = np.append(et_out, et[pooled])
        es_out = np.append(es_out, es[pooled])
    return gt_out, et_out, gs_out, es_out


def sample_mode_subsets(m, order, max_subsets=200, seed=0):
    """Seeded uniform sample of distinct mode subsets of the given order."""
    if order > m:
        raise ConfigurationError("marginal order exceeds the mode count")
    total = math.comb(m, order)
    if total <= max_subsets:
        return [list(c) for c in itertools.combinations(range(m), order)]
    rng = np.random.default_rng(np.random.SeedSequence([seed, order]))
    chosen = set()
    while len(chosen) < max_subsets:
        pick = tuple(sorted(rng.choice(m, size=order, replace=False).tolist()))
        chosen.add(pick)
    return [list(c) for c in sorted(chosen)]


class ExactTruth:
    """Ground truth from the exact oracle (zero stderr); desk scale only."""

    def __init__(self, state, detector, m_max=None):
        self.state = state
        self.detector = detector
        self.m_max = m_max

    def gcd(self, part):
        return oracle_mod.brute_force_gcd(self.state, part, self.detector, m_max=self.m_max)

    def marginal(self, modes, cap):
        if self.detector == "threshold":
            size = len(modes)
            probs = np.zeros((2,) * size)
            for bits in itertools.product((0, 1), repeat=size):
                probs[bits] = oracle_mod.click_pattern_probability(
                    self.state, list(bits), modes=list(modes)
                )
            return gcd_mod.GcdResult(
                probabilities=probs,
                errors=np.zeros_like(probs),
                kind="threshold",
                partition=[[mo] for mo in modes],
                n_samples=0,
                capped=1,
            )
        raise ConfigurationError("exact PNR marginals not supported; use ensemble truth")


class EnsembleTruth:
    """Ground truth from raw (unprojected) phase-space variables, batch-means errors."""

    def __init__(self, matrix, kind, pnr_m_max=None):
        self.matrix = np.asarray(matrix)
        if kind not in ("threshold_p", "pnr_n"):
            raise ConfigurationError(f"unknown ensemble kind {kind!r}")
        self.kind = kind
        self.pnr_m_max = pnr_m_max

    def gcd(self, part):
        if self.kind == "threshold_p":
            return gcd_mod.gcd_threshold_from_ensemble(self.matrix, part)
        return gcd_mod.gcd_pnr_from_ensemble(self.matrix, part, self.pnr_m_max)

    def marginal(self, modes, cap):
        return gcd_mod.marginal_distribution((self.matrix, self.kind), modes, cap=cap)


class CountsTruth:
    """Ground truth from another count dataset (Poissonian errors)."""

    def __init__(self, dataset):
        self.dataset = dataset

    def gcd(self, part):
        return gcd_mod.gcd_from_counts(self.dataset, part)

    def marginal(self, modes, cap):
        return gcd_mod.marginal_distribution(self.dataset, modes, cap=cap)


def _compatible_bins(truth_res, data_res):
    """Align bin tensors (pad the smaller count range with zero bins)."""
    tp, te = truth_res.flat()
    dp, de = data_res.flat()
    if truth_res.probabilities.shape == data_res.probabilities.shape:
        return tp, te, dp, de
    if truth_res.d != data_res.d:
        raise ConfigurationError("truth and data GCD dimensions differ")
    shape = tuple(
        max(a, b) for a, b in zip(truth_res.probabilities.shape, data_res.probabilities.shape)
    )

    def pad(res):
        out_p = np.zeros(shape)
        out_e = np.zeros(shape)
        sl = tuple(slice(0, s) for s in res.probabilities.shape)
        out_p[sl] = res.probabilities
        out_e[sl] = res.errors
        return out_p.ravel(), out_e.ravel()

    tp, te = pad(truth_res)
    dp, de = pad(data_res)
    return tp, te, dp, de


def run_validation_suite(
    data,
    truth,
    tests,
    subset_seed=0,
    min_expected=10.0,
    max_subsets=200,
    marginal_cap=None,
    xeb_config=None,
    metadata=None,
):
    """Compare a count dataset against a truth source over the configured tests.

    tests: iterable of "total_gcd", "gcd2d", ("marginals", [orders...]), "xeb".
    Each test contributes one named Z-score; low-expectation bins are pooled
    before the Pearson formula.  XEB (if configured and the truth is exact) is
    attached to the report without a pass threshold.
    """
    m = data.m
    results = []
    xeb_result = None

    def add_chi2(name, truth_res, data_res):
        gt, et, gs, es = _compatible_bins(truth_res, data_res)
        gt, et, gs, es = pool_low_expectation_bins(
            gt, et, gs, es, data.n_samples, min_expected=min_expected
        )
        chi2, k = pearson_chi2(gt, et, gs, es)
        results.append(z_from_chi2(chi2, k, name=name))

    for test in tests:
        if test == "total_gcd":
            part = gcd_mod.Partition.total(m)
            add_chi2("total_gcd", truth.gcd(part), gcd_mod.gcd_from_counts(data, part))
        elif test == "gcd2d":
            part = gcd_mod.Partition.halves(m)
            add_chi2("gcd2d", truth.gcd(part), gcd_mod.gcd_from_counts(data, part))
        elif isinstance(test, (tuple, list)) and test[0] == "marginals":
            for order in test[1]:
                subsets = sample_mode_subsets(m, order, max_subsets=max_subsets,
                                              seed=subset_seed)
                chi2_sum = 0.0
                k_sum = 0
                for modes in subsets:
                    t_res = truth.marginal(modes, cap=marginal_cap)
                    d_res = gcd_mod.marginal_distribution(data, modes, cap=marginal_cap)
                    gt, et, gs, es = _compatible_bins(t_res, d_res)
                    gt, et, gs, es = pool_low_expectation_bins(
                        gt, et, gs, es, data.n_samples, min_expected=min_expected
                    )
                    chi2, k = pearson_chi2(gt, et, gs, es)
                    chi2_sum += chi2
                    k_sum += k
                results.append(z_from_chi2(chi2_sum, max(k_sum, 1), name=f"marginal_order_{order}"))
        elif test == "xeb":
            if xeb_config is None:
                raise ConfigurationError("xeb test requested without xeb configuration")
            xeb_result = xeb_protocol(
                data,
                xeb_config["pattern_prob_fn"],
                sector_prob_fn=xeb_config.get("sector_prob_fn"),
                seed=xeb_config.get("seed", 0),
                max_photons=xeb_config.get("max_photons", 15),
                samples_per_sector=xeb_config.get("samples_per_sector", 1000),
            )
        else:
            raise ConfigurationError(f"unknown validation test {test!r}")
    return max_z_report(results, xeb=xeb_result, metadata=metadata)
