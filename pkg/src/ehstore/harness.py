"""Monte Carlo counterparts of every analytic quantity.

Each estimator streams the battery in chunks, so 10^8-frame runs need constant
memory.  Randomness is split into named sub-streams of one seed; shards use
fixed sizes, so results do not depend on how many workers ran them.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import logsumexp

from . import processes as pr
from .battery import iter_path
from .channel import instantaneous_capacity, optimize_rate
from .errors import InstabilityError, ParameterError

MIN_EXCEED = 100
MIN_BURN_IN = 10**5


def burn_in_frames(mu=None):
    if mu is None or not mu > 0:
        return MIN_BURN_IN
    return int(max(MIN_BURN_IN, math.ceil(50.0 / mu)))


# data buffer ------------------------------------------------------------------

@numba.njit(cache=True)
def _lindley(d, d_max, a, s, out):
    for i in range(s.size):
        d = d + a - s[i]
        if d < 0.0:
            d = 0.0
        elif d > d_max:
            d = d_max
        out[i] = d
    return d


@dataclass
class DataBuffer:
    a: float
    d_max: float = math.inf
    d: float = 0.0

    def __post_init__(self):
        if not (self.a >= 0):
            raise ParameterError("arrival rate must be non-negative")
        if not (0 <= self.d <= self.d_max):
            raise ParameterError("buffer content must lie in [0, d_max]")

    def step(self, s):
        self.d = min(max(0.0, self.d + self.a - s), self.d_max)
        return self.d

    def run(self, service):
        s = np.ascontiguousarray(service, dtype=float)
        out = np.empty(s.size)
        self.d = float(_lindley(self.d, self.d_max, self.a, s, out))
        return out


# results ----------------------------------------------------------------------

@dataclass
class Check:
    name: str
    analytic: float
    empirical: float
    std_err: float
    tolerance: str
    passed: bool


@dataclass
class ExperimentResult:
    config: dict
    seeds: dict
    checks: list = field(default_factory=list)

    def add(self, name, analytic, empirical, std_err, tolerance, passed):
        self.checks.append(Check(name, float(analytic), float(empirical), float(std_err), tolerance, bool(passed)))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["check", "analytic", "empirical", "std_err", "tolerance", "passed"])
            for c in self.checks:
                wr.writerow([c.name, repr(c.analytic), repr(c.empirical), repr(c.std_err), c.tolerance, int(c.passed)])

    def summary(self):
        return {
            "config": self.config,
            "seeds": self.seeds,
            "passed": self.passed,
            "checks": {c.name: c.passed for c in self.checks},
        }

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


# battery statistics -----------------------------------------------------------

@dataclass
class TailCurve:
    thresholds: np.ndarray
    prob: np.ndarray
    exceed: np.ndarray
    reliable: np.ndarray
    frames: int


def mc_overflow_tail(arrival, demand, thresholds, e_max=math.inf, frames=10**8, seed=0, burn_in=None, mu=None):
    """Steady-state Pr{e >= e_th} from one long path after burn-in.

    Points with fewer than 100 exceedances are flagged unreliable.
    """
    th = np.asarray(thresholds, dtype=float)
    burn_in = burn_in_frames(mu) if burn_in is None else burn_in
    exceed = np.zeros(th.size, np.int64)
    n = 0
    for tr in iter_path(arrival, demand, 0.0, e_max, burn_in + frames, seed):
        e = tr.energy[tr.i > burn_in]
        if e.size == 0:
            continue
        e = np.sort(e)
        exceed += e.size - np.searchsorted(e, th, side="left")
        n += e.size
    return TailCurve(th, exceed / n, exceed, exceed >= MIN_EXCEED, n)


def mc_outage_rate(arrival, demand, frames=10**7, seed=0, burn_in=MIN_BURN_IN):
    """Fraction of outage frames and its batch-means standard error."""
    batch = []
    for tr in iter_path(arrival, demand, 0.0, math.inf, burn_in + frames, seed):
        o = tr.outage[tr.i > burn_in]
        if o.size:
            batch.append((o.sum(), o.size))
    k = np.array([b[0] for b in batch], dtype=float)
    n = np.array([b[1] for b in batch], dtype=float)
    rate = k.sum() / n.sum()
    return rate, _batch_se(k / n, n, rate)


def _batch_se(means, sizes, overall):
    if means.size < 2:
        # single batch: binomial error as a floor
        return math.sqrt(max(overall * (1 - overall), 0.0) / sizes.sum())
    w = sizes / sizes.sum()
    var = np.sum(w * (means - overall) ** 2) / (means.size - 1)
    return float(math.sqrt(var))


# service process --------------------------------------------------------------

def _rates(policy, consumed):
    # the optimal policy is expensive: evaluate it once per distinct energy
    if policy.kind != "optimal":
        return np.asarray(policy(consumed), dtype=float)
    vals, inv = np.unique(consumed, return_inverse=True)
    return np.asarray(optimize_rate(policy.channel, vals).rate)[inv]


def iter_service(arrival, demand, channel, policy, frames, seed, burn_in=MIN_BURN_IN, chunk=1 << 20):
    """Yield (served bits, markov state, outage flag) chunks, s(i) = r(i) 1[r(i) <= I(i)]."""
    gain = None
    if channel.kind == "rayleigh":
        gain = pr.SampleStream(pr.ProcessSpec.exponential(channel.fading_var), pr.derive_seed(seed, "gain"))
    for tr in iter_path(arrival, demand, 0.0, math.inf, burn_in + frames, seed, chunk=chunk):
        h2 = gain.sample(len(tr)) if gain is not None else np.ones(len(tr))
        keep = tr.i > burn_in
        if not keep.any():
            continue
        pc = tr.consumed[keep]
        r = _rates(policy, pc)
        cap = instantaneous_capacity(channel, h2[keep], pc)
        # relative slack so a capacity-matched rate is not lost to rounding
        s = np.where(r <= cap * (1 + 1e-12), r, 0.0)
        yield s, tr.state[keep], tr.outage[keep]


def mc_service_rate(arrival, demand, channel, policy, frames=10**7, seed=0, burn_in=MIN_BURN_IN):
    sums, sizes = [], []
    for s, _, _ in iter_service(arrival, demand, channel, policy, frames, seed, burn_in):
        sums.append(s.sum())
        sizes.append(s.size)
    sums, sizes = np.array(sums), np.array(sizes, dtype=float)
    mean = sums.sum() / sizes.sum()
    return mean, _batch_se(sums / sizes, sizes, mean)


def mc_state0_mgf(arrival, demand, channel, policy, theta, frames=10**7, seed=0, burn_in=MIN_BURN_IN):
    """E[exp(-theta s) | outage frame] with its standard error."""
    vals = []
    for s, _, out in iter_service(arrival, demand, channel, policy, frames, seed, burn_in):
        vals.append(np.exp(-theta * s[out]))
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def service_trace(arrival, demand, channel, policy, frames, seed, burn_in=MIN_BURN_IN):
    return np.concatenate([s for s, _, _ in iter_service(arrival, demand, channel, policy, frames, seed, burn_in)])


def block_effective_capacity(service, theta, t, n_symbols=1):
    """-(1/(t theta)) ln mean exp(-theta S(t)) over consecutive blocks of ``t`` frames.

    Returned in bits per channel use when ``n_symbols`` is N.
    """
    s = np.asarray(service, dtype=float)
    n = s.size // t
    if n < 2:
        raise ParameterError("need at least two blocks")
    S = s[: n * t].reshape(n, t).sum(axis=1)
    lme = logsumexp(-theta * S) - math.log(n)
    return -lme / (t * theta * n_symbols)


# data-buffer tail ---------------------------------------------------------------

@dataclass
class TailFit:
    theta: float
    thresholds: np.ndarray
    prob: np.ndarray
    intercept: float


def buffer_tail_exponent(service, a, d_max=math.inf, n_points=40):
    """Least-squares decay rate of Pr{d >= x} for a buffer fed ``a`` bits per frame."""
    s = np.asarray(service, dtype=float)
    mean_s = float(s.mean())
    d = DataBuffer(a, d_max).run(s)
    half = d.size // 2
    x = np.arange(half, d.size, dtype=float)
    slope = np.polyfit(x, d[half:], 1)[0] if half > 1 else 0.0
    if a >= mean_s or slope * half > 10.0 * max(float(np.std(d[:half])), 1.0):
        raise InstabilityError(
            f"buffer grows without bound: load {a:g} vs mean service {mean_s:g}, drift {slope:g} bits/frame"
        )
    ds = np.sort(d)
    top_idx = d.size - MIN_EXCEED
    if top_idx <= 0 or ds[top_idx] <= 0:
        raise ParameterError("too few exceedances to fit a tail")
    x_max = ds[top_idx]
    th = np.linspace(0.1 * x_max, x_max, n_points)
    prob = (d.size - np.searchsorted(ds, th, side="left")) / d.size
    slope, intercept = np.polyfit(th, -np.log(prob), 1)
    return TailFit(float(slope), th, prob, float(-intercept))


def tail_decay_rate(curve: TailCurve, skip=0.2):
    """Least-squares log-slope of an overflow tail over its reliable points."""
    ok = curve.reliable & (curve.prob > 0)
    x = curve.thresholds[ok]
    if x.size < 3:
        raise ParameterError("fewer than three reliable tail points")
    keep = x >= skip * x.max()
    slope = np.polyfit(x[keep], -np.log(curve.prob[ok][keep]), 1)[0]
    return float(slope)
