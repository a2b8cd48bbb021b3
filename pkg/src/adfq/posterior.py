"""Ground-truth references for the belief update.

``posterior_unnorm_pdf`` evaluates the unnormalized true posterior over
Q(s, a) after one transition: a sum over next actions of the branch
weight times a Gaussian in the combined prior/target parameters, times
the product of Gaussian CDF factors of the remaining targets. With
observation noise the Gaussian part carries the noise variance while
the CDF factors keep the bare discounted target scale.

``quadrature_moments`` integrates that density with the trapezoid rule
on an auto-sized grid (deterministic, unlike adaptive quadrature) and
is the numeric reference the analytic update is validated against.
``exact_two_action_moments`` is the closed form for two next actions,
obtained from the moment generating function of the two-branch density;
it is exact for the noiseless posterior and agrees with quadrature to
solver precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .beliefs import (
    BeliefTable,
    BranchComponents,
    Transition,
    td_components,
    terminal_components,
)
from .gaussians import LOG_SQRT_2PI

UNDERFLOW_LIMIT = 1e-300


class NormalizerUnderflowError(ArithmeticError):
    """Posterior normalizer below the smallest representable double.

    Callers that only need moments should use
    :func:`quadrature_log_moments`, which keeps the normalizer in log
    space, or shrink variances less aggressively.
    """


@dataclass(frozen=True)
class GridSpec:
    """Trapezoid grid; ``lo``/``hi`` of None auto-size to the support."""

    lo: float | None = None
    hi: float | None = None
    n: int = 2001


@dataclass(frozen=True)
class QuadratureMoments:
    z: float
    mean: float
    variance: float


def _branch_components(table: BeliefTable, tau: Transition) -> list[BranchComponents]:
    prior = table.belief(tau.s, tau.a)
    if tau.terminal:
        return [terminal_components(prior, tau.r, table.sigma_w)]
    return [
        td_components(prior, table.belief(tau.s_next, b), tau.r, table.gamma, table.sigma_w)
        for b in range(table.n_actions)
    ]


def _cdf_scales(table: BeliefTable, tau: Transition) -> np.ndarray:
    """Per-branch CDF denominators: discounted target standard deviations."""
    scales = table.gamma * np.sqrt(table.variances[tau.s_next])
    if np.any(scales <= 0.0):
        raise ValueError("CDF denominator is zero; requires gamma > 0")
    return scales


def _log_posterior_grid(q: np.ndarray, table: BeliefTable, tau: Transition) -> np.ndarray:
    """Log unnormalized posterior density on an array of q values."""
    table.check_transition(tau)
    comps = _branch_components(table, tau)
    mu_bar = np.array([c.mu_bar for c in comps])
    sd_bar = np.sqrt(np.array([c.var_bar for c in comps]))
    log_c = np.array([c.log_c for c in comps])

    z = (q[None, :] - mu_bar[:, None]) / sd_bar[:, None]
    log_terms = (
        log_c[:, None] - 0.5 * z * z - LOG_SQRT_2PI - np.log(sd_bar)[:, None]
    )
    if not tau.terminal and table.n_actions > 1:
        scales = _cdf_scales(table, tau)
        m = tau.r + table.gamma * table.means[tau.s_next]
        log_cdf = log_ndtr((q[None, :] - m[:, None]) / scales[:, None])
        log_terms += log_cdf.sum(axis=0, keepdims=True) - log_cdf

    m_max = log_terms.max(axis=0)
    with np.errstate(invalid="ignore"):
        out = m_max + np.log(np.exp(log_terms - m_max).sum(axis=0))
    return np.where(np.isfinite(m_max), out, -np.inf)


def posterior_unnorm_pdf(q: float, table: BeliefTable, tau: Transition) -> float:
    """Unnormalized true posterior density at a single point."""
    return float(np.exp(_log_posterior_grid(np.asarray([q], dtype=float), table, tau)[0]))


def posterior_unnorm_pdf_grid(
    q: np.ndarray, table: BeliefTable, tau: Transition
) -> np.ndarray:
    """Vectorized ``posterior_unnorm_pdf`` for plotting and diagnostics."""
    return np.exp(_log_posterior_grid(np.asarray(q, dtype=float), table, tau))


def _auto_bounds(table: BeliefTable, tau: Transition) -> tuple[float, float]:
    # The CDF factors can relocate a branch's mass far beyond its own
    # component mean, but never beyond the highest TD target (every
    # stationary point is a precision-weighted average of component and
    # target means), so the support must span both mean sets.
    prior = table.belief(tau.s, tau.a)
    comps = _branch_components(table, tau)
    spread = max(math.sqrt(prior.variance + c.v) for c in comps)
    anchors = [c.mu_bar for c in comps] + [c.m for c in comps]
    return min(anchors) - 10.0 * spread, max(anchors) + 10.0 * spread


def quadrature_log_moments(
    table: BeliefTable, tau: Transition, grid: GridSpec | None = None
) -> tuple[float, float, float]:
    """Trapezoid moments with the normalizer kept in log space.

    Returns ``(log_z, mean, variance)``. The integrand is rescaled by
    its grid maximum before integration so that the moments stay
    accurate even when the normalizer itself is far below the double
    underflow point.
    """
    if grid is None:
        grid = GridSpec()
    if grid.n < 1001:
        raise ValueError(f"grid must have at least 1001 points, got {grid.n}")
    lo, hi = grid.lo, grid.hi
    if lo is None or hi is None:
        auto_lo, auto_hi = _auto_bounds(table, tau)
        lo = auto_lo if lo is None else lo
        hi = auto_hi if hi is None else hi
    q = np.linspace(lo, hi, grid.n)
    log_f = _log_posterior_grid(q, table, tau)
    peak = log_f.max()
    if peak == -np.inf:
        raise NormalizerUnderflowError("posterior density vanished on the whole grid")
    f = np.exp(log_f - peak)
    z0 = float(np.trapezoid(f, q))
    mean = float(np.trapezoid(f * q, q)) / z0
    variance = float(np.trapezoid(f * (q - mean) ** 2, q)) / z0
    log_z = float(peak + math.log(z0))
    return log_z, mean, variance


def quadrature_moments(
    table: BeliefTable, tau: Transition, grid: GridSpec | None = None
) -> QuadratureMoments:
    """Normalizer, mean, and variance of the true posterior.

    Raises:
        NormalizerUnderflowError: when the normalizer is not
            representable as a positive double (below 1e-300).
    """
    log_z, mean, variance = quadrature_log_moments(table, tau, grid)
    if log_z < math.log(UNDERFLOW_LIMIT):
        raise NormalizerUnderflowError(
            f"posterior normalizer underflows: log Z = {log_z:.3f}"
        )
    return QuadratureMoments(z=math.exp(log_z), mean=mean, variance=variance)


def exact_two_action_moments(table: BeliefTable, tau: Transition) -> tuple[float, float]:
    """Closed-form posterior mean and variance for two next actions.

    Derived from the moment generating function of the two-branch
    density. Each branch contributes its weight times the CDF of the
    standardized gap to the other target; first and second moments add
    ratio terms of the Gaussian density to that CDF. All weight factors
    are evaluated relative to the dominant branch in log space, so the
    expressions stay finite when the raw normalizer underflows.

    Raises:
        ValueError: if the update is not a two-action, non-terminal one.
    """
    table.check_transition(tau)
    if tau.terminal:
        raise ValueError("closed form requires a non-terminal transition")
    if table.n_actions != 2:
        raise ValueError(f"closed form requires exactly 2 actions, got {table.n_actions}")

    comps = _branch_components(table, tau)
    scales = _cdf_scales(table, tau)
    m = tau.r + table.gamma * table.means[tau.s_next]

    log_w = np.empty(2)
    first = np.empty(2)
    second = np.empty(2)
    for b, other in ((0, 1), (1, 0)):
        comp = comps[b]
        s2 = comp.var_bar + scales[other] ** 2
        s = math.sqrt(s2)
        zb = (comp.mu_bar - float(m[other])) / s
        log_cdf = float(log_ndtr(zb))
        # density-to-CDF ratio of the standardized gap, stable in both tails
        log_pdf = -0.5 * zb * zb - LOG_SQRT_2PI - math.log(s)
        ratio = math.exp(log_pdf - log_cdf)
        log_w[b] = comp.log_c + log_cdf
        first[b] = comp.mu_bar + comp.var_bar * ratio
        second[b] = (
            comp.mu_bar * comp.mu_bar
            + comp.var_bar
            + 2.0 * comp.mu_bar * comp.var_bar * ratio
            - (comp.var_bar * comp.var_bar / s2) * (comp.mu_bar - float(m[other])) * ratio
        )

    shift = log_w.max()
    w = np.exp(log_w - shift)
    z = w.sum()
    mean = float((w * first).sum() / z)
    variance = float((w * second).sum() / z) - mean * mean
    return mean, variance


__all__ = [
    "GridSpec",
    "QuadratureMoments",
    "NormalizerUnderflowError",
    "posterior_unnorm_pdf",
    "posterior_unnorm_pdf_grid",
    "quadrature_log_moments",
    "quadrature_moments",
    "exact_two_action_moments",
]
