"""Energy decay rate of the battery and the exponential overflow approximation.

For an infinite battery fed by independent i.i.d. arrival and demand
processes, the stored-energy tail decays like ``exp(-mu* e)`` where ``mu*`` is
the positive root of ``log_mgf(arrival, mu) + log_mgf(demand, -mu) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from . import processes as pr
from .errors import DivergenceError, NoRootError, ParameterError, StabilityError

TOL = 1e-10
LOWER = 1e-8


@dataclass(frozen=True)
class DecayRateSolution:
    mu_star: float
    residual: float
    bracket: tuple


def balance(arrival, demand, mu):
    return pr.log_mgf(arrival, mu) + pr.log_mgf(demand, -mu)


def solve_decay_rate(arrival: pr.ProcessSpec, demand: pr.ProcessSpec) -> DecayRateSolution:
    mu_u, mu_p = pr.mean(arrival), pr.mean(demand)
    if not mu_u < mu_p:
        raise StabilityError(f"need E[u] < E[p], got {mu_u:g} >= {mu_p:g}")
    f = lambda m: balance(arrival, demand, m)

    if pr.max_support(arrival) <= pr.min_support(demand):
        # f(mu) <= mu (max u - min p) <= 0 for every mu > 0
        edge = math.inf
        raise NoRootError(
            "arrivals never exceed demand: the stored energy has no overflow tail",
            edge=edge,
            value_at_edge=-math.inf,
        )

    lo = LOWER
    edge = pr.mgf_domain_edge(arrival)
    hi, f_hi = None, None
    if math.isfinite(edge):
        for k in range(2, 13):
            x = edge * (1.0 - 10.0**-k)
            try:
                fx = f(x)
            except DivergenceError:
                break
            hi, f_hi = x, fx
            if fx > 0:
                break
    else:
        x = 1.0 / max(mu_p, 1e-300)
        for _ in range(200):
            try:
                fx = f(x)
            except DivergenceError:
                break
            hi, f_hi = x, fx
            if fx > 0:
                break
            x *= 2.0
    if hi is None or not f_hi > 0:
        raise NoRootError(
            f"no sign change of the balance function inside the MGF domain "
            f"(last point {hi!r}, value {f_hi!r})",
            edge=hi,
            value_at_edge=f_hi,
        )
    f_lo = f(lo)
    if f_lo >= 0:
        raise NoRootError("balance function is not negative near zero", edge=lo, value_at_edge=f_lo)
    root = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * 2.220446049250313e-16, maxiter=500)
    res = f(root)
    if abs(res) > TOL:
        raise NoRootError(f"root residual {res:g} above tolerance", edge=hi, value_at_edge=f_hi)
    return DecayRateSolution(root, res, (lo, hi))


def overflow_prob_approx(mu: float, e_th: float) -> float:
    """exp(-mu e_th): approximate steady-state Pr{e >= e_th}."""
    if mu <= 0 or e_th < 0:
        raise ParameterError("need mu > 0 and e_th >= 0")
    return math.exp(-mu * e_th)


def decay_rate_for_target(prob: float, e_th: float) -> float:
    """Decay rate that makes exp(-mu e_th) equal ``prob``."""
    if not 0 < prob < 1 or e_th <= 0:
        raise ParameterError("need 0 < prob < 1 and e_th > 0")
    return -math.log(prob) / e_th


def min_constant_demand(arrival: pr.ProcessSpec, mu: float) -> float:
    """Smallest constant per-frame demand giving overflow decay rate ``mu``."""
    if not mu > 0:
        raise ParameterError("mu must be positive")
    return pr.log_mgf(arrival, mu) / mu


def max_constant_arrival(demand: pr.ProcessSpec, mu: float) -> float:
    """Largest constant per-frame arrival giving overflow decay rate ``mu``."""
    if not mu > 0:
        raise ParameterError("mu must be positive")
    return -pr.log_mgf(demand, -mu) / mu
