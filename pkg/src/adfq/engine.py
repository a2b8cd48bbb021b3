"""Analytic moment-matched belief update.

The true posterior over Q(s, a) after one transition is a sum over next
actions of a Gaussian times a product of Gaussian CDF factors. Swapping
each CDF factor for its squared-exponential bound turns every summand
into a piecewise-quadratic log density. Each summand is then replaced
by a Gaussian matched at its peak:

* ``solve_peak_mean`` finds the peak location, the precision-weighted
  average of the branch's own component and every other TD target that
  lies above the peak (the "active set"). Because the fixed point is
  piecewise linear in which targets are active, sorting targets by mean
  and scanning prefixes finds the unique consistent solution directly.
* ``peak_variance`` matches the local curvature: precisions of the
  branch component and the active targets add up.
* ``log_peak_height`` evaluates the summand at the peak, entirely in
  log space since the exponents routinely pass the exp underflow point
  once variances shrink.

The matched Gaussians form a mixture whose weights are the normalized
peak masses; the belief update is the mixture mean and variance.
``qlearning_limit_target`` gives the small-variance limit of that mean,
the tabular Q-learning update with an inverse-variance learning rate,
which the test suite uses as an independent reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .beliefs import (
    BeliefTable,
    BranchComponents,
    Transition,
    td_components,
    terminal_components,
)


@dataclass(frozen=True)
class ActionBranch:
    """Diagnostics for one next-action branch of an update."""

    b: int
    components: BranchComponents
    mu_star: float
    var_star: float
    log_k_star: float
    weight: float


@dataclass(frozen=True)
class UpdateResult:
    """Moment-matched posterior for one transition; does not touch the table."""

    new_mean: float
    new_variance: float
    branches: tuple[ActionBranch, ...]


def solve_peak_mean(
    branch: BranchComponents, other_targets: Sequence[tuple[float, float]]
) -> float:
    """Peak location of one branch's approximate log posterior summand.

    ``other_targets`` holds ``(m, v)`` pairs for the remaining next
    actions, where ``v`` is the variance appearing under the squared
    ReLU penalty for that target. The peak is the precision-weighted
    mean of ``(mu_bar, var_bar)`` and exactly those targets whose means
    exceed the peak itself. Targets sitting exactly at the peak are
    excluded (step function taken as 0 at 0).
    """
    targets = sorted(other_targets, key=lambda t: t[0], reverse=True)
    num = branch.mu_bar / branch.var_bar
    den = 1.0 / branch.var_bar
    upper = math.inf
    best = branch.mu_bar
    best_violation = math.inf
    for k in range(len(targets) + 1):
        candidate = num / den
        lower = targets[k][0] if k < len(targets) else -math.inf
        if upper > candidate >= lower:
            return candidate
        # roundoff can leave every bracket check marginally violated;
        # remember the least-inconsistent candidate as a fallback
        violation = max(candidate - upper, lower - candidate)
        if violation < best_violation:
            best_violation = violation
            best = candidate
        if k < len(targets):
            m, v = targets[k]
            num += m / v
            den += 1.0 / v
            upper = m
    return best


def peak_variance(
    branch: BranchComponents,
    other_targets: Sequence[tuple[float, float]],
    mu_star: float,
) -> float:
    """Curvature-matched variance at the peak.

    Precisions of the branch component and of every strictly active
    target add; boundary targets (mean equal to the peak) contribute
    nothing, which yields the larger, conservative variance.
    """
    precision = 1.0 / branch.var_bar
    for m, v in other_targets:
        if m > mu_star:
            precision += 1.0 / v
    return 1.0 / precision


def log_peak_height(
    branch: BranchComponents,
    other_targets: Sequence[tuple[float, float]],
    mu_star: float,
    var_star: float,
) -> float:
    """Log mass of the matched Gaussian for one branch."""
    d = mu_star - branch.mu_bar
    log_k = (
        branch.log_c
        + 0.5 * math.log(var_star / branch.var_bar)
        - d * d / (2.0 * branch.var_bar)
    )
    for m, v in other_targets:
        gap = m - mu_star
        if gap > 0.0:
            log_k -= gap * gap / (2.0 * v)
    return log_k


def mixture_weights(log_k: Sequence[float]) -> list[float]:
    """Normalize log peak masses into mixture weights (shift invariant).

    Normalization happens entirely in max-shifted space; adding the
    shift back first would cost ~|shift| * eps of absolute error once
    the raw masses sit tens of thousands of log units below zero.
    """
    if not log_k:
        raise ValueError("no branch masses to normalize")
    m = max(log_k)
    if m == -math.inf:
        # all masses identically zero cannot happen with finite inputs;
        # guard against an all-(-inf) call anyway
        return [1.0 / len(log_k)] * len(log_k)
    shifted = [math.exp(v - m) for v in log_k]
    total = math.fsum(shifted)
    return [v / total for v in shifted]


def adfq_update(table: BeliefTable, tau: Transition) -> UpdateResult:
    """Moment-matched belief update for ``Q(tau.s, tau.a)``.

    Pure: the result must be written back explicitly via
    :func:`apply_update`. Terminal transitions collapse to the single
    conjugate branch with the bare reward as target.
    """
    table.check_transition(tau)
    prior = table.belief(tau.s, tau.a)

    if tau.terminal:
        comp = terminal_components(prior, tau.r, table.sigma_w)
        branch = ActionBranch(
            b=-1,
            components=comp,
            mu_star=comp.mu_bar,
            var_star=comp.var_bar,
            log_k_star=comp.log_c,
            weight=1.0,
        )
        return UpdateResult(
            new_mean=comp.mu_bar,
            new_variance=max(comp.var_bar, table.variance_floor),
            branches=(branch,),
        )

    n_actions = table.n_actions
    if n_actions > 1 and table.gamma == 0.0:
        raise ValueError("multi-action update requires gamma > 0")

    gamma2 = table.gamma * table.gamma
    comps: list[BranchComponents] = []
    penalties: list[tuple[float, float]] = []
    for b in range(n_actions):
        target = table.belief(tau.s_next, b)
        comps.append(td_components(prior, target, tau.r, table.gamma, table.sigma_w))
        # penalty-side variance comes from the CDF factors, which carry
        # the discounted target variance without the observation noise
        penalties.append((tau.r + table.gamma * target.mean, gamma2 * target.variance))

    mu_stars: list[float] = []
    var_stars: list[float] = []
    log_ks: list[float] = []
    for b in range(n_actions):
        others = penalties[:b] + penalties[b + 1 :]
        mu_star = solve_peak_mean(comps[b], others)
        var_star = peak_variance(comps[b], others, mu_star)
        log_ks.append(log_peak_height(comps[b], others, mu_star, var_star))
        mu_stars.append(mu_star)
        var_stars.append(var_star)

    weights = mixture_weights(log_ks)
    new_mean = math.fsum(w * m for w, m in zip(weights, mu_stars))
    second = math.fsum(w * (v + m * m) for w, v, m in zip(weights, var_stars, mu_stars))
    new_variance = second - new_mean * new_mean

    branches = tuple(
        ActionBranch(b, comps[b], mu_stars[b], var_stars[b], log_ks[b], weights[b])
        for b in range(n_actions)
    )
    return UpdateResult(
        new_mean=new_mean,
        new_variance=max(new_variance, table.variance_floor),
        branches=branches,
    )


def apply_update(table: BeliefTable, tau: Transition, result: UpdateResult) -> None:
    """Write an update result back into the table (floor applied here)."""
    table.set_belief(tau.s, tau.a, result.new_mean, result.new_variance)


def qlearning_limit_target(table: BeliefTable, tau: Transition) -> tuple[float, float]:
    """Small-variance reference update ``((1-a)*mu + a*target, a)``.

    The learning rate is the prior variance over the prior-plus-target
    variance at the highest-mean next action (lowest index on ties);
    terminal transitions use the bare reward with zero target variance.
    """
    table.check_transition(tau)
    prior = table.belief(tau.s, tau.a)
    sw2 = table.sigma_w * table.sigma_w
    if tau.terminal:
        target = tau.r
        target_var = 0.0
    else:
        b_plus = int(np.argmax(table.means[tau.s_next]))
        target = tau.r + table.gamma * float(table.means[tau.s_next, b_plus])
        target_var = table.gamma * table.gamma * float(table.variances[tau.s_next, b_plus])
    alpha = prior.variance / (prior.variance + target_var + sw2)
    mean = (1.0 - alpha) * prior.mean + alpha * target
    return mean, alpha


__all__ = [
    "ActionBranch",
    "UpdateResult",
    "solve_peak_mean",
    "peak_variance",
    "log_peak_height",
    "mixture_weights",
    "adfq_update",
    "apply_update",
    "qlearning_limit_target",
]
