"""Chi-square test machinery, distances, and the attack success bound.

The central CDF is the regularized lower incomplete gamma P(dof/2, x/2),
evaluated by the classic series / continued-fraction split.  The
noncentral CDF is the Poisson mixture of central CDFs.  Inverses use
bracketed bisection.  No external stats library is used on the attack
path; tests cross-check these numerics against independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from sympy import mobius

from .errors import (
    ConvergenceFailure,
    EmptyBins,
    InsufficientSamples,
    NotADistribution,
)

_MAX_ITER = 10_000
_EPS = 1e-15


def regularized_gamma_lower(s: float, x: float) -> float:
    """P(s, x) = gamma(s, x) / Gamma(s) for s > 0, x >= 0."""
    if x < 0 or s <= 0:
        raise ValueError("need x >= 0 and s > 0")
    if x == 0.0:
        return 0.0
    if x > 1e6 and x > 100 * s:
        return 1.0
    log_prefactor = s * math.log(x) - x - math.lgamma(s)
    if x < s + 1.0:
        # series: P = x^s e^-x / Gamma(s) * sum_k x^k / (s (s+1) ... (s+k))
        term = 1.0 / s
        total = term
        for k in range(1, _MAX_ITER):
            term *= x / (s + k)
            total += term
            if abs(term) < abs(total) * _EPS:
                return min(1.0, total * math.exp(log_prefactor))
        raise ConvergenceFailure("incomplete gamma series did not converge")
    # continued fraction for Q (modified Lentz)
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            q = math.exp(log_prefactor) * h
            return min(1.0, max(0.0, 1.0 - q))
    raise ConvergenceFailure("incomplete gamma continued fraction did not converge")


def chi_square_cdf(x: float, dof: int) -> float:
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if x < 0:
        raise ValueError("x must be >= 0")
    return regularized_gamma_lower(dof / 2.0, x / 2.0)


def chi_square_inv_cdf(alpha: float, dof: int) -> float:
    """x with chi_square_cdf(x, dof) = alpha, to 1e-10 relative."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    lo, hi = 0.0, float(max(dof, 1))
    for _ in range(400):
        if chi_square_cdf(hi, dof) >= alpha:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise ConvergenceFailure("could not bracket the chi-square quantile")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_square_cdf(mid, dof) < alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * hi:
            break
    return 0.5 * (lo + hi)


def noncentral_chi_square_cdf(x: float, dof: int, lam: float) -> float:
    """Poisson mixture sum, truncated when the missed mass is < 1e-12.

    Terms are accumulated outward from the Poisson mode so that large
    noncentrality parameters do not underflow.
    """
    if lam < 0 or x < 0:
        raise ValueError("need x >= 0 and lambda >= 0")
    if lam == 0.0:
        return chi_square_cdf(x, dof)
    half = lam / 2.0
    k0 = int(half)
    logw0 = k0 * math.log(half) - half - math.lgamma(k0 + 1)
    w0 = math.exp(logw0)
    total = w0 * chi_square_cdf(x, dof + 2 * k0)
    weight_seen = w0
    # walk upward and downward with pmf ratio recurrences
    wu = w0
    for k in range(k0 + 1, k0 + _MAX_ITER):
        wu *= half / k
        total += wu * chi_square_cdf(x, dof + 2 * k)
        weight_seen += wu
        if 1.0 - weight_seen < 1e-12 or wu < 1e-18 * max(weight_seen, 1e-30):
            break
    else:
        raise ConvergenceFailure("noncentral chi-square upward walk did not converge")
    wd = w0
    for k in range(k0, 0, -1):
        wd *= k / half
        total += wd * chi_square_cdf(x, dof + 2 * (k - 1))
        weight_seen += wd
        if 1.0 - weight_seen < 1e-12:
            break
    return min(1.0, total)


def chi_square_statistic(observed, expected) -> float:
    """sum (t_j - c_j)^2 / c_j over bins."""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if observed.shape != expected.shape:
        raise ValueError("observed and expected must have the same length")
    if np.any(expected <= 0):
        raise EmptyBins("every expected bin mass must be positive")
    return float(np.sum((observed - expected) ** 2 / expected))


def success_lower_bound(N: int, M: int, Delta: float, alpha: float) -> float:
    """Lower bound on the full-loop attack success probability.

    alpha^(N-1) is the chance that all wrong guesses pass; the second
    factor is the chance that the true reduced errors are rejected, with
    noncentrality 4*M*Delta^2.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if not 0.0 <= Delta <= 1.0:
        raise ValueError("Delta must be in [0, 1]")
    delta = chi_square_inv_cdf(alpha, N - 1)
    lam = 4.0 * M * Delta * Delta
    power = 1.0 - noncentral_chi_square_cdf(delta, N - 1, lam)
    return math.exp((N - 1) * math.log(alpha)) * power


def _check_distribution(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if abs(float(P.sum()) - 1.0) > 1e-9 or np.any(P < -1e-12):
        raise NotADistribution("probabilities must be nonnegative and sum to 1")
    return P


def statistical_distance(P, Q) -> float:
    """Half the l1 distance; asserts the l2 comparison inequality."""
    P, Q = _check_distribution(P), _check_distribution(Q)
    if P.shape != Q.shape:
        raise NotADistribution("distributions must share a support")
    d = 0.5 * float(np.abs(P - Q).sum())
    d2 = l2_distance(P, Q)
    size = P.size
    if d > (math.sqrt(size) / 2.0) * d2 + 1e-12:
        raise AssertionError("l1/l2 distance inequality violated")
    return d


def l2_distance(P, Q) -> float:
    P, Q = _check_distribution(P), _check_distribution(Q)
    return float(np.sqrt(np.sum((P - Q) ** 2)))


def full_degree_count(q: int, f: int) -> int:
    """Number of elements of F_{q^f} with minimal polynomial of degree f."""
    return sum(int(mobius(d)) * q ** (f // d) for d in range(1, f + 1) if f % d == 0)


@dataclass
class BinSpec:
    """Binning rule: bin count, expected masses, and an optional indexer
    mapping raw sample values to bin indices (identity when None)."""

    kind: str
    r: int
    expected: np.ndarray
    indexer: Optional[Callable] = None
    meta: dict = field(default_factory=dict)


def per_element_bins(N: int, M: int) -> BinSpec:
    return BinSpec("per-element", N, np.full(N, M / N), meta={"N": N, "M": M})


def subfield_two_bins(q: int, f: int, M: int) -> BinSpec:
    """Two bins over F_{q^f}: proper-subfield elements vs full-degree ones."""
    card = q**f
    n_full = full_degree_count(q, f)
    expected = np.array([M * (card - n_full) / card, M * n_full / card])
    return BinSpec("subfield-two-bin", 2, expected, meta={"q": q, "f": f, "M": M})


def circle_bins(k: int, p: float, M: int) -> BinSpec:
    def indexer(values):
        idx = np.floor(np.asarray(values, dtype=float) * (k / p)).astype(np.int64)
        return np.clip(idx, 0, k - 1)

    return BinSpec("circle-uniform", k, np.full(k, M / k), indexer, meta={"p": p, "k": k})


@dataclass
class TestResult:
    chi2: float
    dof: int
    threshold: float
    rejected: bool
    p_value: float

    def to_json(self) -> dict:
        return {
            "chi2": self.chi2,
            "dof": self.dof,
            "threshold": self.threshold,
            "rejected": self.rejected,
            "p_value": self.p_value,
        }


def uniformity_test(samples, bins: BinSpec, alpha: float) -> TestResult:
    """Bin the samples and reject uniformity when chi2 exceeds the
    alpha-quantile with (r - 1) degrees of freedom."""
    if float(np.min(bins.expected)) < 5.0:
        raise InsufficientSamples(
            f"minimum expected bin mass {float(np.min(bins.expected)):.2f} < 5"
        )
    idx = bins.indexer(samples) if bins.indexer is not None else np.asarray(samples)
    counts = np.bincount(idx.astype(np.int64), minlength=bins.r)
    if counts.size > bins.r:
        raise ValueError("sample index outside the bin range")
    chi2 = chi_square_statistic(counts, bins.expected)
    dof = bins.r - 1
    threshold = chi_square_inv_cdf(alpha, dof)
    return TestResult(
        chi2=chi2,
        dof=dof,
        threshold=threshold,
        rejected=chi2 > threshold,
        p_value=1.0 - chi_square_cdf(chi2, dof),
    )


def two_sample_chi_square(counts1, counts2) -> TestResult:
    """Homogeneity test for two independent binned samples."""
    c1 = np.asarray(counts1, dtype=float)
    c2 = np.asarray(counts2, dtype=float)
    if c1.shape != c2.shape:
        raise ValueError("count vectors must have equal length")
    pooled = c1 + c2
    keep = pooled > 0
    c1, c2, pooled = c1[keep], c2[keep], pooled[keep]
    n1, n2 = c1.sum(), c2.sum()
    total = n1 + n2
    e1 = pooled * (n1 / total)
    e2 = pooled * (n2 / total)
    chi2 = float(np.sum((c1 - e1) ** 2 / e1) + np.sum((c2 - e2) ** 2 / e2))
    dof = int(keep.sum()) - 1
    p = 1.0 - chi_square_cdf(chi2, dof)
    return TestResult(chi2=chi2, dof=dof, threshold=float("nan"), rejected=False, p_value=p)
