"""Uniformity testing and the structural-bias decision rule.

Three goodness-of-fit tests against U(0,1) — Kolmogorov-Smirnov,
Anderson-Darling and Cramér-von Mises — are run per dimension of a position
matrix, all 3·d p-values are pooled under one Benjamini-Hochberg correction,
and a subject is declared biased when at least 10% of its dimensions had any
test rejected.

Implementation notes on the p-values:

* KS uses the exact small-n distribution for n ≤ 140 and the asymptotic
  Kolmogorov series with the Stephens finite-n argument correction
  ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) * D`` above that; the plain asymptotic
  argument is visibly miscalibrated at n ~ 600.
* AD uses the Marsaglia & Marsaglia case-0 piecewise approximation
  (``adinf`` + ``errfix``), accurate to a few 1e-6 in the asymptotic CDF.
* CvM evaluates the asymptotic distribution's Bessel-K series on the Stephens
  small-sample adjusted statistic ``(W2 - 0.4/n + 0.6/n^2) * (1 + 1/n)``.

All statistics sort internally, so callers may pass unsorted samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, kolmogorov, kve
from scipy.stats import kstwo

from .errors import ValidationError

__all__ = [
    "TestResult",
    "DimensionResult",
    "RejectionSummary",
    "ks_test",
    "ad_test",
    "cvm_test",
    "ks_test_many",
    "ad_test_many",
    "cvm_test_many",
    "ks_p_value",
    "ad_p_value",
    "cvm_p_value",
    "bh_correct",
    "detect_bias_statistical",
    "BIAS_FRACTION_THRESHOLD",
]

AD_EPS = 1e-10
KS_EXACT_MAX_N = 140
#: a subject is biased when at least this fraction of dimensions is rejected
BIAS_FRACTION_THRESHOLD = 0.10
TEST_NAMES = ("KS", "AD", "CvM")


@dataclass(frozen=True)
class TestResult:
    """Outcome of one uniformity test on one sample."""

    test_name: str
    statistic: float
    p_value: float

    def to_record(self) -> dict:
        return {
            "test": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
        }


@dataclass(frozen=True)
class DimensionResult:
    """Per-dimension test battery outcome inside a RejectionSummary."""

    dimension: int
    tests: tuple[TestResult, ...]
    rejected: bool

    def to_record(self) -> dict:
        return {
            "dimension": self.dimension,
            "tests": [t.to_record() for t in self.tests],
            "rejected": self.rejected,
        }


@dataclass(frozen=True)
class RejectionSummary:
    """Statistical pipeline verdict for a full position matrix."""

    per_dimension: tuple[DimensionResult, ...]
    fraction_rejected: float
    biased: bool
    alpha: float

    def to_record(self) -> dict:
        return {
            "alpha": self.alpha,
            "fraction_rejected": self.fraction_rejected,
            "biased": self.biased,
            "per_dimension": [d.to_record() for d in self.per_dimension],
        }


def _validate_sample(sample, name: str) -> np.ndarray:
    values = np.asarray(sample, dtype=np.float64)
    if values.ndim != 1:
        raise ValidationError(f"{name}: expected a 1-D sample, got shape {values.shape}")
    if values.size == 0:
        raise ValidationError(f"{name}: empty sample")
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{name}: sample contains non-finite values")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValidationError(f"{name}: sample values must lie in [0, 1]")
    return values


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def _ks_statistics(sorted_rows: np.ndarray) -> np.ndarray:
    """D = max(D+, D-) per row of an (R, n) array of sorted samples."""
    n = sorted_rows.shape[-1]
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = np.max(i / n - sorted_rows, axis=-1)
    d_minus = np.max(sorted_rows - (i - 1.0) / n, axis=-1)
    return np.maximum(d_plus, d_minus)


def ks_p_value(statistic, n: int):
    """Two-sided KS p-value against U(0,1); exact for n ≤ 140, else asymptotic."""
    d = np.asarray(statistic, dtype=np.float64)
    if n <= KS_EXACT_MAX_N:
        p = kstwo.sf(d, n)
    else:
        root_n = np.sqrt(n)
        p = kolmogorov((root_n + 0.12 + 0.11 / root_n) * d)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if np.isscalar(statistic) or np.ndim(statistic) == 0 else p


def ks_test(sample) -> TestResult:
    """Kolmogorov-Smirnov test of a [0,1] sample against U(0,1)."""
    values = _validate_sample(sample, "ks_test")
    d = float(_ks_statistics(np.sort(values)))
    return TestResult("KS", d, ks_p_value(d, values.size))


def ks_test_many(samples) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized KS over an (R, n) array of samples → (statistics, p-values)."""
    rows = np.sort(np.asarray(samples, dtype=np.float64), axis=-1)
    d = _ks_statistics(rows)
    return d, ks_p_value(d, rows.shape[-1])


# ---------------------------------------------------------------------------
# Anderson-Darling


def _ad_statistics(sorted_rows: np.ndarray) -> np.ndarray:
    """A² per row of an (R, n) array of sorted, (ε,1−ε)-clamped samples."""
    n = sorted_rows.shape[-1]
    i = np.arange(1, n + 1, dtype=np.float64)
    log_u = np.log(sorted_rows)
    log_1mu_rev = np.log1p(-sorted_rows[..., ::-1])
    return -n - np.sum((2.0 * i - 1.0) * (log_u + log_1mu_rev), axis=-1) / n


def _adinf(z: np.ndarray) -> np.ndarray:
    """Asymptotic Anderson-Darling CDF (Marsaglia & Marsaglia short form)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros_like(z)
    small = (z > 0.0) & (z < 2.0)
    zs = np.where(small, z, 1.0)  # dummy 1.0 avoids divide-by-zero warnings
    out_small = (
        np.exp(-1.2337141 / zs)
        / np.sqrt(zs)
        * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * zs) * zs) * zs) * zs) * zs)
    )
    large = z >= 2.0
    zl = np.where(large, z, 2.0)
    out_large = np.exp(
        -np.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * zl) * zl) * zl) * zl) * zl)
    )
    out = np.where(small, out_small, out)
    out = np.where(large, out_large, out)
    return np.clip(out, 0.0, 1.0)


def _ad_errfix(n: int, x: np.ndarray) -> np.ndarray:
    """Marsaglia & Marsaglia finite-n correction to the asymptotic AD CDF."""
    x = np.asarray(x, dtype=np.float64)
    c = 0.01265 + 0.1757 / n

    t_low = np.clip(x / c, 0.0, 1.0)
    fix_low = (
        np.sqrt(t_low) * (1.0 - t_low) * (49.0 * t_low - 102.0)
        * (0.0037 / n**2 + 0.00078 / n + 0.00006) / n
    )

    t_mid = (x - c) / (0.8 - c)
    poly_mid = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t_mid) * t_mid) * t_mid) * t_mid) * t_mid
    fix_mid = poly_mid * (0.04213 + 0.01365 / n) / n

    fix_high = (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n

    out = np.where(x < c, fix_low, fix_mid)
    out = np.where(x > 0.8, fix_high, out)
    return out


def ad_p_value(statistic, n: int):
    """Anderson-Darling case-0 p-value (asymptotic CDF + finite-n correction)."""
    a2 = np.asarray(statistic, dtype=np.float64)
    cdf_inf = _adinf(a2)
    cdf = np.clip(cdf_inf + _ad_errfix(n, cdf_inf), 0.0, 1.0)
    p = 1.0 - cdf
    return float(p) if np.isscalar(statistic) or np.ndim(statistic) == 0 else p


def ad_test(sample) -> TestResult:
    """Anderson-Darling test; boundary/tied values are clamped into (ε, 1−ε)."""
    values = _validate_sample(sample, "ad_test")
    u = np.clip(np.sort(values), AD_EPS, 1.0 - AD_EPS)
    a2 = float(_ad_statistics(u))
    return TestResult("AD", a2, ad_p_value(a2, values.size))


def ad_test_many(samples) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized AD over an (R, n) array of samples → (statistics, p-values)."""
    rows = np.clip(np.sort(np.asarray(samples, dtype=np.float64), axis=-1), AD_EPS, 1.0 - AD_EPS)
    a2 = _ad_statistics(rows)
    return a2, ad_p_value(a2, rows.shape[-1])


# ---------------------------------------------------------------------------
# Cramér-von Mises


def _cvm_statistics(sorted_rows: np.ndarray) -> np.ndarray:
    """W² per row of an (R, n) array of sorted samples."""
    n = sorted_rows.shape[-1]
    i = np.arange(1, n + 1, dtype=np.float64)
    quantiles = (2.0 * i - 1.0) / (2.0 * n)
    return 1.0 / (12.0 * n) + np.sum((sorted_rows - quantiles) ** 2, axis=-1)


def _cvm_cdf_inf(x: np.ndarray, terms: int = 24) -> np.ndarray:
    """Asymptotic Cramér-von Mises CDF via the Bessel-K series.

    V(x) = (1/(π√x)) Σ_k [Γ(k+½)/(Γ(½)k!)] √(4k+1) e^{-q_k} K_{1/4}(q_k),
    q_k = (4k+1)²/(16x).
    """
    x = np.asarray(x, dtype=np.float64)
    safe_x = np.where(x > 0.0, x, 1.0)
    total = np.zeros_like(safe_x)
    for k in range(terms):
        coeff = np.exp(gammaln(k + 0.5) - gammaln(0.5) - gammaln(k + 1.0))
        y = 4.0 * k + 1.0
        q = y * y / (16.0 * safe_x)
        # exp(-q)*K(q) evaluated as exp(-2q)*kve(q) to avoid underflow in kv
        total += coeff * np.sqrt(y) * np.exp(-2.0 * q) * kve(0.25, q)
    cdf = total / (np.pi * np.sqrt(safe_x))
    cdf = np.where(x > 0.0, cdf, 0.0)
    return np.clip(cdf, 0.0, 1.0)


def cvm_p_value(statistic, n: int):
    """CvM p-value: asymptotic distribution of the Stephens-adjusted statistic."""
    w2 = np.asarray(statistic, dtype=np.float64)
    adjusted = (w2 - 0.4 / n + 0.6 / n**2) * (1.0 + 1.0 / n)
    p = 1.0 - _cvm_cdf_inf(adjusted)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if np.isscalar(statistic) or np.ndim(statistic) == 0 else p


def cvm_test(sample) -> TestResult:
    """Cramér-von Mises test of a [0,1] sample against U(0,1)."""
    values = _validate_sample(sample, "cvm_test")
    w2 = float(_cvm_statistics(np.sort(values)))
    return TestResult("CvM", w2, cvm_p_value(w2, values.size))


def cvm_test_many(samples) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized CvM over an (R, n) array of samples → (statistics, p-values)."""
    rows = np.sort(np.asarray(samples, dtype=np.float64), axis=-1)
    w2 = _cvm_statistics(rows)
    return w2, cvm_p_value(w2, rows.shape[-1])


# ---------------------------------------------------------------------------
# Multiple testing and the decision rule


def bh_correct(p_values, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up; returns rejection flags in input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("bh_correct: expected a non-empty 1-D array of p-values")
    if np.any(p < 0.0) or np.any(p > 1.0) or not np.all(np.isfinite(p)):
        raise ValidationError("bh_correct: p-values must lie in [0, 1]")
    if not (0.0 < alpha < 1.0):
        raise ValidationError("bh_correct: alpha must lie in (0, 1)")
    m = p.size
    order = np.argsort(p, kind="stable")
    thresholds = alpha * np.arange(1, m + 1, dtype=np.float64) / m
    passing = np.nonzero(p[order] <= thresholds)[0]
    flags = np.zeros(m, dtype=bool)
    if passing.size:
        k = passing[-1] + 1
        flags[order[:k]] = True
    return flags


def _run_battery(sample: np.ndarray) -> tuple[TestResult, TestResult, TestResult]:
    return ks_test(sample), ad_test(sample), cvm_test(sample)


def detect_bias_statistical(matrix, alpha: float = 0.01) -> RejectionSummary:
    """Run the full statistical pipeline on an N×d position matrix.

    Each dimension gets the three-test battery; all 3·d p-values are pooled
    under one BH correction at ``alpha``; a dimension counts as rejected when
    any of its tests is rejected; the subject is biased when the rejected
    fraction reaches 10% (ties at exactly 10% count as biased).
    """
    data = np.asarray(matrix, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ValidationError(f"detect_bias_statistical: expected an N×d matrix, got shape {data.shape}")
    n_runs, n_dims = data.shape
    if n_runs < 30:
        raise ValidationError(f"detect_bias_statistical: need N ≥ 30 rows, got {n_runs}")
    if n_dims < 1:
        raise ValidationError("detect_bias_statistical: need d ≥ 1 columns")
    if not np.all(np.isfinite(data)):
        raise ValidationError("detect_bias_statistical: matrix contains non-finite values")
    if data.min() < 0.0 or data.max() > 1.0:
        raise ValidationError("detect_bias_statistical: values must lie in [0, 1]")
    if not (0.0 < alpha < 1.0):
        raise ValidationError("detect_bias_statistical: alpha must lie in (0, 1)")

    batteries = [_run_battery(data[:, j]) for j in range(n_dims)]
    pooled = np.array([t.p_value for battery in batteries for t in battery])
    flags = bh_correct(pooled, alpha)

    per_dimension = []
    n_rejected = 0
    for j, battery in enumerate(batteries):
        rejected = bool(flags[3 * j : 3 * j + 3].any())
        n_rejected += rejected
        per_dimension.append(DimensionResult(j, tuple(battery), rejected))

    # integer arithmetic keeps the "at least 10%" rule exact at the boundary
    biased = 10 * n_rejected >= n_dims
    return RejectionSummary(
        per_dimension=tuple(per_dimension),
        fraction_rejected=n_rejected / n_dims,
        biased=bool(biased),
        alpha=float(alpha),
    )
