"""Energy outage probability from the frames-since-last-outage Markov chain.

State ``w`` counts consecutive frames in which the demand was met since the
last outage.  From state ``m-1`` the chain moves to ``m`` with probability
``q_m`` and back to 0 otherwise.  With an infinite battery, an outage empties
it, so the excursions between outages are i.i.d. and ``q_m`` is the hazard of
the excursion length: the probability that a walk started at zero keeps
``U(j) >= P(j)`` for all ``j <= m`` given that it did so up to ``m-1``.

``q_m`` has no closed form beyond ``m = 1``; it is estimated by survival
counting over a pool of simulated cumulative trajectories.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from . import processes as pr
from .errors import BoundError, ParameterError, TruncationError

DEFAULT_ALPHA = 100
DEFAULT_PATHS = 10**6
SHARD = 1 << 17


@dataclass
class QEstimate:
    q: np.ndarray
    std_err: np.ndarray
    survivors: np.ndarray  # survivors[m] = paths alive after m frames, survivors[0] = n_paths
    n_paths: int

    @property
    def last_reliable_m(self):
        """Deepest m whose q_m has a non-empty denominator."""
        alive = np.nonzero(self.survivors[:-1] > 0)[0]
        return int(alive[-1]) + 1 if alive.size else 0


def _survival_shard(arrival, demand, m_max, n, seed):
    counts = np.zeros(m_max + 1, np.int64)
    counts[0] = n
    x = np.zeros(n)
    for m in range(1, m_max + 1):
        if x.size == 0:
            break
        rng_u = np.random.default_rng(np.random.SeedSequence(pr.derive_seed(seed, "u"), spawn_key=(m,)))
        rng_p = np.random.default_rng(np.random.SeedSequence(pr.derive_seed(seed, "p"), spawn_key=(m,)))
        x = x + pr._draw(arrival, rng_u, x.size) - pr._draw(demand, rng_p, x.size)
        # ties count as demand met
        x = x[x >= 0.0]
        counts[m] = x.size
    return counts


def survival_counts(arrival, demand, m_max, n_paths, seed):
    """Surviving-path counts after 0..m_max frames, merged over fixed-size shards."""
    total = np.zeros(m_max + 1, np.int64)
    done, shard = 0, 0
    while done < n_paths:
        n = min(SHARD, n_paths - done)
        total += _survival_shard(arrival, demand, m_max, n, pr.derive_seed(seed, "shard", shard))
        done += n
        shard += 1
    return total


def estimate_q(
    arrival: pr.ProcessSpec,
    demand: pr.ProcessSpec,
    m_max: int,
    n_paths: int = DEFAULT_PATHS,
    seed: int = 0,
    strict: bool = True,
) -> QEstimate:
    """Estimate q_1..q_{m_max} from one nested pool of trajectories.

    With ``strict`` the estimator refuses to report a q_m whose denominator is
    empty and raises :class:`TruncationError`.  Otherwise those entries are
    set to 0; they never enter any product with non-zero weight.
    """
    if m_max < 1:
        raise ParameterError("m_max must be >= 1")
    if n_paths < 1000:
        raise ParameterError("need at least 1000 paths")
    S = survival_counts(arrival, demand, m_max, n_paths, seed)
    den = S[:-1].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(den > 0, S[1:] / den, 0.0)
        se = np.where(den > 0, np.sqrt(q * (1 - q) / den), 0.0)
    est = QEstimate(q, se, S, n_paths)
    if strict and np.any(den == 0):
        last = est.last_reliable_m
        raise TruncationError(
            f"no surviving paths beyond m={last}; q_{last + 1}.. undefined",
            last_reliable_m=last,
            q=q[:last],
            std_err=se[:last],
            survivors=S,
        )
    return est


def monotone_q(est: QEstimate, length: int | None = None) -> np.ndarray:
    """Non-decreasing fit of the raw estimates, continued flat past the data.

    Under i.i.d. arrivals and demands q_1 <= q_2 <= ...; the weighted
    isotonic fit (weights = denominators) is the constrained estimate.
    """
    length = est.q.size if length is None else length
    last = est.last_reliable_m
    if last == 0:
        return np.zeros(length)
    # half-count adjustment keeps the fit below 1 when a few stragglers survive
    # every remaining step; with 10^6 paths it moves q by ~1e-6
    den = est.survivors[:last].astype(float)
    raw = (est.survivors[1 : last + 1] + 0.5) / (den + 1.0)
    fit = isotonic_regression(raw, weights=den).x
    out = np.full(length, fit[-1])
    n = min(length, last)
    out[:n] = fit[:n]
    return out


@dataclass
class SteadyState:
    pi: np.ndarray  # pi[0..alpha-1] per state, pi[alpha] lumps states >= alpha
    pi0: float  # full-length sum over every supplied q, geometric closure at the end
    pi0_upper: float  # geometric-tail bound at truncation order alpha


def _closure(q, alpha):
    return q[alpha] if q.size > alpha else q[-1]


def _bound(q, alpha):
    q = np.asarray(q, dtype=float)
    qa1 = _closure(q, alpha)
    if qa1 >= 1.0:
        raise BoundError(f"q_{alpha + 1} = 1: geometric tail diverges")
    prods = np.cumprod(q[:alpha])
    denom = 1.0 + prods[: alpha - 1].sum() + prods[alpha - 1] / (1.0 - qa1)
    return 1.0 / denom, prods, qa1


def steady_state(q, alpha: int) -> SteadyState:
    """Stationary law of the chain truncated at state ``alpha``.

    State ``alpha`` keeps itself with probability ``q_{alpha+1}`` so the
    truncated chain stays stochastic; its stationary pi_0 equals the
    geometric-tail upper bound on the outage probability.  When ``q`` has
    only ``alpha`` entries the last one is reused for ``q_{alpha+1}``.
    """
    q = np.asarray(q, dtype=float)
    if alpha < 1:
        raise ParameterError("alpha must be >= 1")
    if q.size < alpha:
        raise ParameterError(f"need at least alpha={alpha} transition probabilities")
    if np.any((q < 0) | (q > 1)):
        raise ParameterError("transition probabilities must lie in [0, 1]")
    upper, prods, qa1 = _bound(q, alpha)
    pi = np.empty(alpha + 1)
    pi[0] = upper
    pi[1:alpha] = upper * prods[: alpha - 1]
    pi[alpha] = upper * prods[alpha - 1] / (1.0 - qa1)
    full = q.size - 1 if q.size > alpha else alpha
    pi0 = _bound(q, full)[0] if full >= 1 else upper
    return SteadyState(pi, pi0, upper)


def transition_matrix(q, alpha: int) -> np.ndarray:
    """Column-stochastic matrix of the truncated chain (column = from-state)."""
    q = np.asarray(q, dtype=float)
    if alpha < 1 or q.size < alpha:
        raise ParameterError("need alpha >= 1 and at least alpha transition probabilities")
    M = np.zeros((alpha + 1, alpha + 1))
    for m in range(alpha):
        M[0, m] = 1.0 - q[m]
        M[m + 1, m] = q[m]
    qa1 = _closure(q, alpha)
    M[0, alpha] = 1.0 - qa1
    M[alpha, alpha] += qa1
    return M


@dataclass
class OutageChain:
    q: np.ndarray  # fitted q_1..q_{alpha+1} used by every analysis
    alpha: int
    pi: np.ndarray
    pi0: float
    pi0_upper: float
    mc_paths: int
    std_err: np.ndarray
    q_raw: np.ndarray = field(repr=False)
    survivors: np.ndarray = field(repr=False)

    @property
    def outage_probability(self):
        return self.pi0_upper

    def at_alpha(self, alpha):
        """Same estimates re-truncated at a different order."""
        if alpha + 1 > self.q.size:
            raise ParameterError(f"chain holds q up to m={self.q.size}, need {alpha + 1}")
        ss = steady_state(self.q, alpha)
        return OutageChain(
            self.q, alpha, ss.pi, ss.pi0, ss.pi0_upper, self.mc_paths,
            self.std_err, self.q_raw, self.survivors,
        )


def degenerate_chain(alpha: int, m_max: int | None = None) -> OutageChain:
    """Chain of a battery that never meets its demand (e.g. infinite demand)."""
    m_max = alpha + 1 if m_max is None else m_max
    q = np.zeros(m_max)
    ss = steady_state(q, alpha)
    return OutageChain(q, alpha, ss.pi, ss.pi0, ss.pi0_upper, 0, q.copy(), q.copy(),
                       np.zeros(m_max + 1, np.int64))


def build_chain(
    arrival: pr.ProcessSpec,
    demand: pr.ProcessSpec,
    alpha: int = DEFAULT_ALPHA,
    n_paths: int = DEFAULT_PATHS,
    seed: int = 0,
    m_max: int | None = None,
) -> OutageChain:
    """Estimate q, fit it monotone and solve the truncated chain at ``alpha``."""
    m_max = alpha + 1 if m_max is None else max(m_max, alpha + 1)
    if math.isinf(pr.min_support(demand)) or math.isinf(pr.mean(demand)):
        return degenerate_chain(alpha, m_max)
    est = estimate_q(arrival, demand, m_max, n_paths, seed, strict=False)
    q = monotone_q(est)
    ss = steady_state(q, alpha)
    return OutageChain(q, alpha, ss.pi, ss.pi0, ss.pi0_upper, n_paths, est.std_err, est.q, est.survivors)
