"""Effective capacity of the outage-chain modulated service process.

The chain state is the number of frames since the last energy outage.  With
``phi_j = E[exp(-theta s) | state j]`` the truncated Leslie-type matrix
``M Phi`` has characteristic polynomial

    chi^alpha - sum_n b_n chi^(alpha - n),
    b_n = phi_0 (1 - q_n) prod_{j<n} q_j phi_j,

whose unique positive root ``chi*`` is the spectral radius, and
``C_E = -ln(chi*) / (N theta)`` bits per channel use.  Truncating at state
``alpha`` drops mass from the chain, so the finite-order value is an upper
bound that decreases towards the limit as ``alpha`` grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import _demand_draws, bin_average, served_mgf
from .errors import (
    BracketError,
    DegenerateChainError,
    ParameterError,
    UnreachableStateError,
)

TRACE_ALPHAS = (10, 25, 50, 100, 200)
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class QoSSpec:
    theta: float
    d_th: float = math.inf

    def __post_init__(self):
        if not (self.theta > 0):
            raise ParameterError("theta must be positive")


@dataclass
class EffCapSolution:
    chi_star: float
    C_E: float
    alpha: int
    theta: float
    trace: dict = field(default_factory=dict)  # alpha -> C_E


def _masses(densities):
    return densities.counts / np.maximum(densities.visits, 1)[:, None]


def phi0(theta, chain, densities, channel, policy, demand):
    """E[exp(-theta s)] over outage frames.

    Outage frames are those whose available energy fell short of the demand;
    they are weighted by the stationary mass of the state they came from.
    The weights are normalized by their own total (pi_0 in exact arithmetic)
    so that ``phi0(0) == 1`` holds exactly for estimated inputs too.
    """
    if theta < 0:
        raise ParameterError("theta must be non-negative")
    if chain.pi0_upper <= 0:
        raise DegenerateChainError("no outage state: phi_0 undefined")
    n_rows = densities.counts.shape[0]
    w = np.zeros(n_rows)
    k = min(n_rows, chain.pi.size)
    w[:k] = chain.pi[:k]
    if n_rows < chain.pi.size:
        w[n_rows - 1] += chain.pi[n_rows:].sum()
    w = np.where(densities.available, w, 0.0)
    c = densities.centers
    m = _masses(densities)
    if demand.kind == "constant":
        draws = np.array([demand.value])
    else:
        draws = _demand_draws(demand, 10**3, 0)
    mgf = bin_average(lambda x: served_mgf(channel, policy, x, theta), densities.edges)
    num = den = 0.0
    cum = np.cumsum(m * mgf, axis=1)
    cm = np.cumsum(m, axis=1)
    for p in draws:
        j = int(np.searchsorted(c, p))
        if j == 0:
            continue
        num += float(w @ cum[:, j - 1])
        den += float(w @ cm[:, j - 1])
    if den <= 0:
        raise DegenerateChainError("no estimated outage mass below the demand")
    return num / den


def phij(theta, j, chain, densities, channel, policy, demand):
    """E[exp(-theta s)] in state ``j >= 1`` (demand met, rate g(p))."""
    if j < 1:
        raise ParameterError("j must be >= 1")
    if theta < 0:
        raise ParameterError("theta must be non-negative")
    if j > chain.q.size or chain.q[j - 1] <= 0:
        raise UnreachableStateError(f"q_{j} = 0: state {j} is unreachable")
    if demand.kind == "constant":
        return float(served_mgf(channel, policy, np.array([demand.value]), theta)[0])
    row = min(j - 1, densities.counts.shape[0] - 1)
    c = densities.centers
    m = _masses(densities)[row]
    above = densities.mass(row)[1]
    draws = _demand_draws(demand, 10**3, 0)
    tail = np.array([m[c >= p].sum() + above for p in draws])
    if tail.sum() <= 0:
        raise UnreachableStateError(f"no estimated mass for state {j}")
    vals = served_mgf(channel, policy, draws, theta)
    return float(tail @ vals / tail.sum())


def _log_b(q, log_phi0, log_phij, alpha):
    q = np.asarray(q, dtype=float)[:alpha]
    log_phij = np.asarray(log_phij, dtype=float)
    with np.errstate(divide="ignore"):
        lq = np.log(q)
        l1q = np.log1p(-q)
    # prod_{j<n} q_j phi_j, n = 1..alpha
    steps = lq[: alpha - 1] + log_phij[: alpha - 1]
    prefix = np.concatenate(([0.0], np.cumsum(steps)))
    return log_phi0 + l1q + prefix


def char_poly(theta, alpha, q, phi0_val, phij_vals):
    """Coefficients (highest degree first) of the truncated characteristic polynomial.

    ``phij_vals`` holds phi_1..phi_{alpha-1} (extra entries are ignored); the
    values are the moments at -theta, i.e. E[exp(-theta s)].
    """
    if alpha < 1:
        raise ParameterError("alpha must be >= 1")
    q = np.asarray(q, dtype=float)
    phij_vals = np.asarray(phij_vals, dtype=float)
    if q.size < alpha or phij_vals.size < alpha - 1:
        raise ParameterError(f"need {alpha} q values and {alpha - 1} phi_j values")
    if phi0_val < 0 or np.any(phij_vals[: alpha - 1] < 0):
        raise ParameterError("moment values must be non-negative")
    with np.errstate(divide="ignore"):
        b = np.exp(_log_b(q, math.log(phi0_val) if phi0_val > 0 else -np.inf,
                          np.log(phij_vals[: alpha - 1]), alpha))
    if not np.any(b > 0):
        raise DegenerateChainError("all coefficients vanish")
    return np.concatenate(([1.0], -b))


def _check_cauchy(coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size < 2 or coeffs[0] != 1.0:
        raise ParameterError("polynomial must be monic with degree >= 1")
    b = -coeffs[1:]
    if np.any(b < 0):
        raise ParameterError("non-leading coefficients must be <= 0")
    if not np.any(b > 0):
        raise DegenerateChainError("all coefficients vanish")
    return b


def poly_value(coeffs, chi):
    return float(np.polyval(np.asarray(coeffs, dtype=float), chi))


def _excess(log_b, n, chi):
    # sign of z(chi) equals sign of 1 - sum_n b_n chi^-n
    return logsumexp(log_b - n * math.log(chi))


def positive_root(coeffs, log_b=None):
    """Unique positive root of a Cauchy-form polynomial, by bisection.

    Works with ``h(chi) = sum_n b_n chi^-n``, which is strictly decreasing, and
    finds ``h = 1``; this is the root of ``z`` without forming ``chi^alpha``.
    ``log_b`` may carry the coefficients in log form when some underflow.
    """
    b = _check_cauchy(coeffs)
    if log_b is None:
        with np.errstate(divide="ignore"):
            log_b = np.log(b)
    n = np.arange(1, b.size + 1, dtype=float)
    keep = np.isfinite(log_b)
    log_b, n = log_b[keep], n[keep]
    hi = 1.0 + float(b.max())
    if _excess(log_b, n, hi) > 0.0:
        raise BracketError(f"no sign change on (0, {hi:g}]")
    lo = hi
    while _excess(log_b, n, lo) < 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise BracketError("root below the representable range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _excess(log_b, n, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def companion_radius(coeffs, log_b=None):
    """Spectral radius of the companion matrix (independent root check).

    The variable is first rescaled by s = max_n b_n^(1/n), which is within a
    factor 2 of every root.  Without it, geometrically decaying coefficients
    make a high-degree eigen-solve lose roots to O(eps^(1/degree)) errors.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    d = coeffs.size - 1
    if log_b is None:
        with np.errstate(divide="ignore"):
            log_b = np.log(np.maximum(-coeffs[1:], 0.0))
    log_b = np.asarray(log_b, dtype=float)
    n = np.arange(1, d + 1)
    log_s = float(np.max(log_b / n))
    C = np.zeros((d, d))
    C[0, :] = np.exp(log_b - n * log_s)
    C[np.arange(1, d), np.arange(d - 1)] = 1.0
    return float(np.max(np.abs(np.linalg.eigvals(C)))) * math.exp(log_s)


def sign_changes(coeffs):
    c = np.asarray(coeffs, dtype=float)
    s = np.sign(c[c != 0])
    return int(np.count_nonzero(np.diff(s)))


@dataclass
class MomentTable:
    """phi_0 and phi_1..phi_m at one theta, ready for any truncation order."""

    theta: float
    q: np.ndarray
    phi0: float
    phij: np.ndarray
    n_symbols: int

    def solve(self, alpha):
        if alpha > self.q.size or alpha - 1 > self.phij.size:
            raise ParameterError(f"moments available up to alpha={min(self.q.size, self.phij.size + 1)}")
        with np.errstate(divide="ignore"):
            lb = _log_b(self.q, math.log(self.phi0) if self.phi0 > 0 else -np.inf,
                        np.log(self.phij[: alpha - 1]), alpha)
        b = np.exp(lb)
        coeffs = np.concatenate(([1.0], -b))
        if not np.any(np.isfinite(lb)):
            raise DegenerateChainError("all coefficients vanish")
        if not np.any(b > 0):
            # every coefficient underflows; the bisection works in log form
            coeffs[1 + int(np.argmax(lb))] = -np.finfo(float).tiny
        chi = positive_root(coeffs, log_b=lb)
        return chi, -math.log(chi) / (self.n_symbols * self.theta)


def moment_table(theta, chain, densities, channel, policy, demand, depth=None):
    """Collect every moment needed up to truncation order ``depth``."""
    if not (theta > 0):
        raise ParameterError("theta must be positive")
    depth = chain.q.size if depth is None else depth
    q = np.asarray(chain.q[:depth], dtype=float)
    p0 = phi0(theta, chain, densities, channel, policy, demand)
    pj = np.ones(max(depth - 1, 0))
    for j in range(1, depth):
        if q[j - 1] <= 0:
            # unreachable beyond here; b_n vanish so phi_j is irrelevant
            break
        if demand.kind == "constant" and j > 1:
            pj[j - 1] = pj[0]
        else:
            pj[j - 1] = phij(theta, j, chain, densities, channel, policy, demand)
    return MomentTable(theta, q, p0, pj, channel.n_symbols)


def effective_capacity(theta, alpha, chain, densities, channel, policy, demand, trace_alphas=TRACE_ALPHAS):
    """Effective capacity at truncation ``alpha`` plus a convergence trace."""
    if chain.pi0_upper <= 0:
        # outage-free: a single state serving g(p) every frame
        ph = phij(theta, 1, chain, densities, channel, policy, demand)
        ce = -math.log(ph) / (channel.n_symbols * theta)
        return EffCapSolution(ph, ce, alpha, theta, {a: ce for a in trace_alphas})
    depth = max([alpha] + [a for a in trace_alphas if a <= chain.q.size])
    tab = moment_table(theta, chain, densities, channel, policy, demand, depth)
    trace = {}
    for a in sorted(set(trace_alphas) | {alpha}):
        if a <= depth:
            trace[a] = tab.solve(a)[1]
    chi, ce = tab.solve(alpha)
    return EffCapSolution(chi, ce, alpha, theta, trace)
