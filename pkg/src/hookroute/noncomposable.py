"""Mean-variance split between a composable pool and a fill-risk hook.

A trade of total size D is split between a constant-product pool with
deterministic execution and a sovereign hook pool that quotes better output
through a curvature parameter but fills with variance that grows in the
trade size. Both the risk-penalized split and the efficient frontier
(minimum variance for a target combined return) reduce to one-dimensional
searches because every objective involved is concave or monotone on [0, D].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONSTANT = "constant"
LINEAR = "linear"
SUPERLINEAR = "superlinear"
QUADRATIC = "quadratic"
_FORMS = (CONSTANT, LINEAR, SUPERLINEAR, QUADRATIC)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class VarianceSpec:
    """Fill variance as a function of the hook trade size."""

    form: str
    scale: float
    exponent: float | None = None  # only for the superlinear form

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ValueError(f"variance form must be one of {_FORMS}")
        if self.scale < 0:
            raise ValueError("variance scale must be nonnegative")
        if self.form == SUPERLINEAR:
            if self.exponent is None or not 1.0 < self.exponent < 2.0:
                raise ValueError("superlinear exponent must lie in (1, 2)")
        elif self.exponent is not None:
            raise ValueError(f"{self.form} variance takes no exponent")


@dataclass(frozen=True)
class HookScenario:
    total_trade: float
    cpmm_reserves: tuple[float, float]
    hook_reserves: tuple[float, float]
    curvature: float  # hook output-curve exponent offset, in [0, 1]
    variance: VarianceSpec
    risk_aversion: float

    def __post_init__(self):
        if self.total_trade <= 0:
            raise ValueError("total trade must be positive")
        if any(r <= 0 for r in self.cpmm_reserves) or any(r <= 0 for r in self.hook_reserves):
            raise ValueError("reserves must be positive")
        if not 0.0 <= self.curvature <= 1.0:
            raise ValueError("curvature must lie in [0, 1]")
        if self.risk_aversion < 0:
            raise ValueError("risk aversion must be nonnegative")


def cpmm_output(trade_size, reserve_in, reserve_out):
    """Deterministic constant-product output for the composable leg."""
    return reserve_out - reserve_in * reserve_out / (reserve_in + trade_size)


def hook_output(trade_size, reserve_in, reserve_out, curvature):
    """Hook output curve: twice the size minus a power-law concession.

    Linear at zero curvature (a constant quote), second-order pool-like at
    curvature one.
    """
    return 2.0 * trade_size - (reserve_out / reserve_in) * trade_size ** (1.0 + curvature)


def fill_variance(trade_size, spec: VarianceSpec):
    """Execution variance of the hook fill for a given trade size."""
    if np.any(np.asarray(trade_size) < 0):
        raise ValueError("trade size must be nonnegative")
    if spec.form == CONSTANT:
        return spec.scale
    if spec.form == LINEAR:
        return spec.scale * trade_size
    if spec.form == QUADRATIC:
        return spec.scale * trade_size**2
    return spec.scale * trade_size**spec.exponent


def combined_return(scenario: HookScenario, hook_trade):
    """Total expected output when `hook_trade` goes through the hook."""
    r_in, r_out = scenario.cpmm_reserves
    h_in, h_out = scenario.hook_reserves
    return cpmm_output(scenario.total_trade - hook_trade, r_in, r_out) + hook_output(
        hook_trade, h_in, h_out, scenario.curvature
    )


def _golden_max(fn, lo, hi, tol):
    a, b = lo, hi
    c = a + _INV_PHI2 * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = a + _INV_PHI2 * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    # A concave maximum may sit exactly on an endpoint of the original range.
    candidates = [(fn(lo), lo), (fn(hi), hi), (fn(x), x)]
    return max(candidates)[::-1]


def solve_mean_variance(scenario: HookScenario):
    """Risk-penalized optimal hook trade.

    Maximizes combined return minus risk_aversion times the fill variance
    over [0, D] by golden-section search (the objective is concave for every
    shipped variance form). A constant variance only shifts the objective,
    so it is dropped during the search and restored in the reported value,
    making the optimizer exactly independent of its scale.

    Returns (hook trade, objective value).
    """
    lam = scenario.risk_aversion
    if scenario.variance.form == CONSTANT:
        fn = lambda x: combined_return(scenario, x)
        offset = -lam * scenario.variance.scale
    else:
        fn = lambda x: combined_return(scenario, x) - lam * fill_variance(x, scenario.variance)
        offset = 0.0
    x, fx = _golden_max(fn, 0.0, scenario.total_trade, 1e-9)
    return x, fx + offset


@dataclass(frozen=True)
class FrontierPoint:
    target_return: float
    hook_trade: float
    variance: float
    feasible: bool


def efficient_frontier(scenario: HookScenario, tau_grid) -> list[FrontierPoint]:
    """Minimum fill variance achieving each target combined return.

    The variance is nondecreasing in the hook trade and the return is
    concave, so the minimizer is the smallest trade on the return's
    superlevel set: zero when the pool alone reaches the target, otherwise
    the lower crossing located by bisection. Unreachable targets are
    returned flagged rather than raised so sweeps stay rectangular.
    """
    ret = lambda x: combined_return(scenario, x)
    peak_x, peak = _golden_max(ret, 0.0, scenario.total_trade, 1e-12)
    points = []
    for tau in tau_grid:
        tau = float(tau)
        if not math.isfinite(tau):
            raise ValueError("target returns must be finite")
        if ret(0.0) >= tau:
            points.append(FrontierPoint(tau, 0.0, fill_variance(0.0, scenario.variance), True))
            continue
        if tau > peak:
            points.append(FrontierPoint(tau, math.nan, math.nan, False))
            continue
        lo, hi = 0.0, peak_x
        while hi - lo > 1e-9:
            mid = 0.5 * (lo + hi)
            if ret(mid) >= tau:
                hi = mid
            else:
                lo = mid
        x = hi
        points.append(FrontierPoint(tau, x, fill_variance(x, scenario.variance), True))
    return points
