"""Scalar Gaussian primitives shared by the belief-update machinery.

Everything here is pure double precision: densities and tail
probabilities of the standard normal, the exponential upper bound on the
normal CDF used by the analytic posterior approximation, the density of
the maximum of independent Gaussians, and a stable log-sum-exp.

CDF products are always accumulated in log space (``scipy.special
.log_ndtr``) so that far-tail factors below the smallest normal double
do not flush the whole product to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import log_ndtr
from scipy.special import logsumexp as _np_logsumexp

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianParams:
    """Mean/variance pair for one Gaussian component."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def stddev(self) -> float:
        return math.sqrt(self.variance)


def normal_pdf(x: float, mean: float = 0.0, stddev: float = 1.0) -> float:
    """Density of N(mean, stddev^2) at ``x``.

    Raises:
        ValueError: if ``stddev`` is not strictly positive.
    """
    if not stddev > 0.0:
        raise ValueError(f"stddev must be positive, got {stddev}")
    z = (x - mean) / stddev
    return math.exp(-0.5 * z * z - LOG_SQRT_2PI) / stddev


def log_normal_pdf(x: float, mean: float = 0.0, stddev: float = 1.0) -> float:
    """Log density of N(mean, stddev^2) at ``x``."""
    if not stddev > 0.0:
        raise ValueError(f"stddev must be positive, got {stddev}")
    z = (x - mean) / stddev
    return -0.5 * z * z - LOG_SQRT_2PI - math.log(stddev)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function.

    Accurate to well below 1e-12 absolute error over the whole real
    line, which matters because posterior branch weights depend on
    far-tail values.
    """
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def log_normal_cdf(x: float) -> float:
    """log(normal_cdf(x)), stable arbitrarily far into the lower tail."""
    return float(log_ndtr(x))


def relu_cdf_approx(y: float) -> float:
    """Exponential bound exp(-[max(0, -y)]^2 / 2) on the normal CDF.

    Equals 1 for y >= 0 and decays like the squared-exponential for
    y < 0; the gap to the true CDF vanishes in the lower tail, which is
    what justifies swapping CDF factors for this bound inside the
    analytic belief update.
    """
    if y >= 0.0:
        return 1.0
    return math.exp(-0.5 * y * y)


def max_gaussian_pdf(x: float, params: Sequence[GaussianParams]) -> float:
    """Density of max(X_1, ..., X_N) for independent X_i ~ N(mu_i, sigma_i^2).

    The density is ``sum_i pdf_i(x) * prod_{j != i} cdf_j(x)``. Each
    summand is assembled in log space so that products of many tiny CDF
    factors cannot underflow before they are combined.

    Raises:
        ValueError: if ``params`` is empty.
    """
    if len(params) == 0:
        raise ValueError("params must be nonempty")
    return float(max_gaussian_pdf_grid(np.asarray([x], dtype=float), params)[0])


def max_gaussian_pdf_grid(x: np.ndarray, params: Sequence[GaussianParams]) -> np.ndarray:
    """Vectorized ``max_gaussian_pdf`` over a grid of evaluation points."""
    if len(params) == 0:
        raise ValueError("params must be nonempty")
    log_terms = _max_gaussian_log_terms(np.asarray(x, dtype=float), params)
    return np.exp(_np_logsumexp(log_terms, axis=0))


def _max_gaussian_log_terms(x: np.ndarray, params: Sequence[GaussianParams]) -> np.ndarray:
    """Log of each order-statistic summand, shape (len(params), len(x))."""
    mu = np.array([p.mean for p in params])
    sigma = np.sqrt(np.array([p.variance for p in params]))
    z = (x[None, :] - mu[:, None]) / sigma[:, None]
    log_pdf = -0.5 * z * z - LOG_SQRT_2PI - np.log(sigma)[:, None]
    log_cdf = log_ndtr(z)
    # prod over j != i expressed as (sum over all j) minus own factor
    total = log_cdf.sum(axis=0, keepdims=True)
    return log_pdf + total - log_cdf


def log_sum_exp(values: Iterable[float]) -> float:
    """log(sum(exp(v))) computed with the usual max shift.

    Exact under a constant shift of all inputs; tolerates inputs far
    below the exp underflow threshold.

    Raises:
        ValueError: on empty input.
    """
    vals = list(values)
    if not vals:
        raise ValueError("log_sum_exp of empty input")
    m = max(vals)
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in vals))


__all__ = [
    "GaussianParams",
    "normal_pdf",
    "log_normal_pdf",
    "normal_cdf",
    "log_normal_cdf",
    "relu_cdf_approx",
    "max_gaussian_pdf",
    "max_gaussian_pdf_grid",
    "log_sum_exp",
]
