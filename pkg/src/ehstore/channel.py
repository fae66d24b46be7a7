"""Block-fading channel, rate policies and the average data service rate.

Rates are in bits per frame of ``N`` symbols; energies are per frame, so the
per-symbol SNR of energy ``a`` over gain ``h2`` is ``h2 a / (N sigma_w^2)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import processes as pr
from .battery import iter_path
from .errors import ParameterError, SingularityError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
AWGN_TOL = 1e-9
# unvisited states lighter than this are dropped silently
MISSING_WEIGHT = 1e-9


class SparseStateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ChannelSpec:
    kind: str = "rayleigh"
    noise_var: float = 1.0
    fading_var: float = 1.0
    n_symbols: int = 100

    def __post_init__(self):
        if self.kind not in ("awgn", "rayleigh"):
            raise ParameterError(f"unknown channel kind {self.kind!r}")
        if not (self.noise_var > 0 and self.fading_var > 0):
            raise ParameterError("noise and fading variances must be positive")
        if int(self.n_symbols) != self.n_symbols or self.n_symbols < 1:
            raise ParameterError("n_symbols must be a positive integer")

    def to_dict(self):
        d = {"type": self.kind, "noise_var": self.noise_var, "n_symbols": self.n_symbols}
        if self.kind == "rayleigh":
            d["fading_var"] = self.fading_var
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("type", None)
        allowed = {"noise_var", "n_symbols", "fading_var"}
        if set(d) - allowed:
            raise ParameterError(f"unexpected channel fields {sorted(set(d) - allowed)}")
        return cls(kind, float(d.get("noise_var", 1.0)), float(d.get("fading_var", 1.0)),
                   int(d.get("n_symbols", 100)))

    def sample_gain(self, rng, n):
        if self.kind == "awgn":
            return np.ones(n)
        return rng.exponential(self.fading_var, n)


def instantaneous_capacity(channel: ChannelSpec, h2, p_c):
    N = channel.n_symbols
    return N * np.log2(1.0 + np.asarray(h2) * np.asarray(p_c) / (N * channel.noise_var))


# optimal fixed rate ------------------------------------------------------------

def _rayleigh_objective(R, a, channel):
    return np.exp(_rayleigh_log_objective(R, a, channel))


def _rayleigh_log_objective(R, a, channel):
    # log form keeps the comparison meaningful where R exp(-kappa) underflows
    N = channel.n_symbols
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        kap = np.expm1(R / N * math.log(2.0)) * N * channel.noise_var / a
        return np.log(R) - kap / channel.fading_var


@dataclass(frozen=True)
class RateChoice:
    rate: np.ndarray | float
    success: np.ndarray | float
    expected_bits: np.ndarray | float


def optimize_rate(channel: ChannelSpec, energy, tol=None) -> RateChoice:
    """Rate maximizing rate x success probability at fixed energy.

    AWGN: the capacity-matched rate.  Rayleigh: golden-section search over
    (0, 20 N], vectorized over ``energy``.
    """
    a = np.asarray(energy, dtype=float)
    scalar = a.ndim == 0
    a = np.atleast_1d(a)
    if np.any(a < 0):
        raise ParameterError("energy must be non-negative")
    N = channel.n_symbols
    if channel.kind == "awgn":
        r = instantaneous_capacity(channel, 1.0, a)
        s = np.ones_like(r)
    else:
        tol = 1e-6 * N if tol is None else tol
        lo = np.zeros_like(a)
        hi = np.full_like(a, 20.0 * N)
        x1 = hi - GOLDEN * (hi - lo)
        x2 = lo + GOLDEN * (hi - lo)
        f1 = _rayleigh_log_objective(x1, a, channel)
        f2 = _rayleigh_log_objective(x2, a, channel)
        while np.max(hi - lo) > tol:
            left = f1 >= f2  # maximum lies in [lo, x2]
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            nx1 = hi - GOLDEN * (hi - lo)
            nx2 = lo + GOLDEN * (hi - lo)
            # golden section reuses one interior point per side
            x1, x2 = np.where(left, nx1, x2), np.where(left, x1, nx2)
            f1 = _rayleigh_log_objective(x1, a, channel)
            f2 = _rayleigh_log_objective(x2, a, channel)
        r = np.where(a > 0, 0.5 * (lo + hi), 0.0)
        safe = np.where(a > 0, a, 1.0)
        with np.errstate(over="ignore"):
            # subnormal energy: kappa overflows to inf and success is 0
            s = np.where(a > 0, np.exp(-kappa_from_rate(channel, r, safe) / channel.fading_var), 1.0)
    bits = r * s
    if scalar:
        return RateChoice(float(r[0]), float(s[0]), float(bits[0]))
    return RateChoice(r, s, bits)


def objective_unimodal(channel: ChannelSpec, energy: float, n_grid: int = 2000) -> bool:
    """True if the discrete derivative of the Rayleigh objective changes sign once."""
    R = np.linspace(0.0, 20.0 * channel.n_symbols, n_grid + 1)[1:]
    d = np.diff(_rayleigh_log_objective(R, float(energy), channel))
    sgn = np.sign(d[d != 0])
    return int(np.count_nonzero(np.diff(sgn))) <= 1


# rate policies -----------------------------------------------------------------

@dataclass(frozen=True)
class RatePolicy:
    """Monotone map from consumed energy to transmission rate.

    kinds: ``shannon`` (rate equals the unit-gain capacity), ``fixed`` (rate
    ``R`` whenever energy is positive), ``tabulated`` (piecewise linear through
    ``grid``), ``optimal`` (per-energy maximizer of expected bits).
    """

    kind: str = "shannon"
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    rate: float = 0.0
    grid: tuple = ()

    def __post_init__(self):
        if self.kind not in ("shannon", "fixed", "tabulated", "optimal"):
            raise ParameterError(f"unknown rate policy {self.kind!r}")
        if self.kind == "fixed" and not self.rate > 0:
            raise ParameterError("fixed rate must be positive")
        if self.kind == "tabulated":
            e, r = (np.asarray(v, dtype=float) for v in self.grid)
            if e.size < 2 or e[0] != 0.0 or r[0] != 0.0:
                raise ParameterError("tabulated policy must start at (0, 0)")
            if np.any(np.diff(e) <= 0) or np.any(np.diff(r) < 0):
                raise ParameterError("tabulated policy must be monotone")

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        if self.kind == "shannon":
            return instantaneous_capacity(self.channel, 1.0, a)
        if self.kind == "fixed":
            return np.where(a > 0, self.rate, 0.0)
        if self.kind == "tabulated":
            e, r = (np.asarray(v, dtype=float) for v in self.grid)
            return np.interp(a, e, r)
        return np.asarray(optimize_rate(self.channel, a).rate)

    def to_dict(self):
        d = {"type": self.kind}
        if self.kind == "fixed":
            d["rate"] = self.rate
        if self.kind == "tabulated":
            d["energies"], d["rates"] = list(self.grid[0]), list(self.grid[1])
        return d

    @classmethod
    def from_dict(cls, d, channel):
        kind = d.get("type")
        if kind == "fixed":
            return cls("fixed", channel, rate=float(d["rate"]))
        if kind == "tabulated":
            return cls("tabulated", channel, grid=(tuple(d["energies"]), tuple(d["rates"])))
        return cls(kind, channel)


def default_policy(channel: ChannelSpec) -> RatePolicy:
    """Capacity-matched for AWGN, expected-bits-optimal for Rayleigh."""
    return RatePolicy("shannon" if channel.kind == "awgn" else "optimal", channel)


def kappa_from_rate(channel, rate, a):
    N = channel.n_symbols
    return np.expm1(np.asarray(rate) / N * math.log(2.0)) * N * channel.noise_var / a


def kappa(channel: ChannelSpec, policy: RatePolicy, a):
    """Gain threshold: rate g(a) at energy a decodes iff |h|^2 >= kappa(a)."""
    a = np.asarray(a, dtype=float)
    g = np.asarray(policy(a))
    if np.any((a == 0) & (g > 0)):
        raise SingularityError("positive rate with zero energy")
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(a > 0, kappa_from_rate(channel, g, np.where(a > 0, a, 1.0)), 0.0)
    return k if k.ndim else float(k)


def success_prob(channel: ChannelSpec, kappa_val):
    k = np.asarray(kappa_val, dtype=float)
    if np.any(k < 0):
        raise ParameterError("kappa must be non-negative")
    if channel.kind == "rayleigh":
        out = np.exp(-k / channel.fading_var)
    else:
        out = (k <= 1.0 + AWGN_TOL).astype(float)
    return out if out.ndim else float(out)


def expected_bits(channel, policy, a):
    """g(a) * Pr{decode} for each energy in ``a``."""
    a = np.asarray(a, dtype=float)
    if policy.kind == "optimal":
        return np.asarray(optimize_rate(channel, a).expected_bits)
    return np.asarray(policy(a)) * success_prob(channel, kappa(channel, policy, a))


def served_mgf(channel, policy, a, theta):
    """E[exp(-theta s)] for a frame transmitted with energy ``a``."""
    a = np.asarray(a, dtype=float)
    if policy.kind == "optimal":
        rc = optimize_rate(channel, a)
        g, succ = np.asarray(rc.rate), np.asarray(rc.success)
    else:
        g = np.asarray(policy(a))
        succ = success_prob(channel, kappa(channel, policy, a))
    return np.exp(-theta * g) * succ + (1.0 - succ)


def bin_average(f, edges, order=8):
    """Mean of ``f`` over each bin, by Gauss-Legendre nodes.

    The histograms treat the density as flat inside a bin, so this is the
    exact bin integral of ``f`` against it; midpoints are too coarse where
    ``exp(-theta g)`` varies quickly.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1], edges[1:]
    pts = 0.5 * (hi - lo)[:, None] * (x[None, :] + 1.0) + lo[:, None]
    vals = np.asarray(f(pts.ravel())).reshape(pts.shape)
    return vals @ (0.5 * w)


# conditional densities of the available energy -------------------------------

@dataclass
class ConditionalEnergyDensity:
    """Histograms of xi(i) = e(i-1) + u(i) split by the previous state w(i-1).

    Row ``m`` holds frames with ``w(i-1) = m``; the last row lumps every state
    at or beyond the chain's truncation order.  ``above`` counts values past
    the last edge.
    """

    edges: np.ndarray
    counts: np.ndarray
    above: np.ndarray
    visits: np.ndarray
    burn_in: int = 0
    frames: int = 0

    @property
    def bin_width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def available(self):
        return self.visits > 0

    def density(self, m):
        v = self.visits[m]
        if v == 0:
            return np.full(self.counts.shape[1], np.nan)
        return self.counts[m] / (v * self.bin_width)

    def mass(self, m):
        """Probability mass per bin (plus ``above``) for state m."""
        v = max(self.visits[m], 1)
        return self.counts[m] / v, self.above[m] / v

    def merge(self, other):
        if not np.array_equal(self.edges, other.edges):
            raise ParameterError("histograms use different bins")
        return ConditionalEnergyDensity(
            self.edges, self.counts + other.counts, self.above + other.above,
            self.visits + other.visits, self.burn_in, self.frames + other.frames,
        )


def density_bins(arrival, demand, bin_width=None):
    p_ref = pr.mean(demand)
    p_max = pr.max_support(demand)
    if not math.isfinite(p_max):
        p_max = pr.quantile(demand, 0.9999) if math.isfinite(p_ref) else 0.0
    top = p_max + pr.quantile(arrival, 0.9999)
    if bin_width is None:
        bin_width = p_ref / 200.0 if math.isfinite(p_ref) else top / 2000.0
    n = int(math.ceil(top / bin_width))
    return np.arange(n + 1) * bin_width


def estimate_conditional_densities(
    arrival,
    demand,
    chain,
    n_frames=10**7,
    seed=0,
    bin_width=None,
    burn_in=10**5,
    n_states=None,
):
    """Steady-state histograms of the available energy per previous state."""
    if burn_in < 10**5:
        raise ParameterError("burn-in must be at least 1e5 frames")
    n_states = chain.alpha + 1 if n_states is None else n_states
    edges = density_bins(arrival, demand, bin_width)
    nb = edges.size - 1
    bw = edges[1] - edges[0]
    counts = np.zeros((n_states, nb), np.int64)
    above = np.zeros(n_states, np.int64)
    prev_e, prev_w = 0.0, 0
    total = burn_in + n_frames
    for tr in iter_path(arrival, demand, 0.0, math.inf, total, seed):
        e_prev = np.concatenate(([prev_e], tr.energy[:-1]))
        w_prev = np.concatenate(([prev_w], tr.state[:-1]))
        prev_e, prev_w = tr.energy[-1], tr.state[-1]
        keep = tr.i > burn_in
        if not keep.any():
            continue
        xi = (e_prev + tr.u)[keep]
        w = np.minimum(w_prev[keep], n_states - 1)
        b = np.floor(xi / bw).astype(np.int64)
        inside = b < nb
        np.add.at(above, w[~inside], 1)
        flat = w[inside] * nb + b[inside]
        counts += np.bincount(flat, minlength=n_states * nb).reshape(n_states, nb)
    visits = counts.sum(axis=1) + above
    if np.any(visits == 0):
        missing = np.nonzero(visits == 0)[0]
        warnings.warn(
            f"{missing.size} states never visited (first: {missing[0]}); their densities are unavailable",
            SparseStateWarning,
            stacklevel=2,
        )
    return ConditionalEnergyDensity(edges, counts, above, visits, burn_in, n_frames)


# average service rate ---------------------------------------------------------

def _demand_draws(demand, n, seed):
    if demand.kind == "constant":
        return np.array([demand.value])
    return pr.SampleStream(demand, pr.derive_seed(seed, "demand-expectation")).sample(n)


def _state_weights(chain, densities, alpha):
    """Stationary weights per histogram row, truncated at ``alpha``."""
    pi = chain.pi
    n_rows = densities.counts.shape[0]
    if alpha is None:
        # full estimate: rows up to the chain order, last row lumped
        k = min(n_rows, pi.size)
        w = np.zeros(n_rows)
        w[:k] = pi[:k]
        if n_rows < pi.size:
            w[n_rows - 1] += pi[n_rows:].sum()
        return w
    # lower bound: the plain states 0..alpha, no lumped tail
    pi0 = chain.pi0_upper
    prods = np.concatenate(([1.0], np.cumprod(chain.q)))
    w = np.zeros(n_rows)
    k = min(alpha + 1, n_rows, prods.size)
    w[:k] = pi0 * prods[:k]
    return w


def avg_service_rate(chain, densities, channel, policy, demand, alpha=None, n_demand=10**4, seed=0):
    """Steady-state mean of served bits per frame.

    ``alpha=None`` uses every histogram row with the chain's lumped tail.
    An integer ``alpha`` keeps only states 0..alpha (a lower bound that grows
    with ``alpha``).  Unavailable states are skipped with a warning.
    """
    w = _state_weights(chain, densities, alpha)
    missing = float(w[~densities.available].sum())
    if missing > MISSING_WEIGHT:
        warnings.warn(
            f"states holding stationary mass {missing:.3g} have no density; result is a lower bound",
            SparseStateWarning,
        )
    w = np.where(densities.available, w, 0.0)
    c = densities.centers
    bits = bin_average(lambda x: expected_bits(channel, policy, x), densities.edges)
    masses = densities.counts / np.maximum(densities.visits, 1)[:, None]
    if demand.kind == "constant":
        p = demand.value
        below = c < p
        first = float(w @ (masses[:, below] @ bits[below]))
        if math.isfinite(p):
            second = float(expected_bits(channel, policy, np.array([p]))[0]) * (1.0 - chain.pi0_upper)
        else:
            second = 0.0
        return first + second
    draws = _demand_draws(demand, n_demand, seed)
    cum_bits = np.cumsum(masses * bits, axis=1)
    cum_mass = np.cumsum(masses, axis=1)
    pb = expected_bits(channel, policy, draws)
    total = 0.0
    for pk, bk in zip(draws, pb):
        j = int(np.searchsorted(c, pk))  # bins with centre < pk
        part = cum_bits[:, j - 1] if j > 0 else np.zeros(len(w))
        tail = 1.0 - (cum_mass[:, j - 1] if j > 0 else 0.0)
        total += float(w @ (part + bk * tail))
    return total / draws.size
