"""Per-frame energy arrival and demand processes.

A :class:`ProcessSpec` is an immutable description of an i.i.d. sequence of
non-negative energy amounts (one draw per time frame).  It knows its moments,
its support and its log moment generating function, which for i.i.d.
increments is also the asymptotic (Gartner-Ellis) log-MGF per frame.

:class:`SampleStream` turns a spec and a seed into a reproducible sequence.
Samples are produced in fixed-size blocks, each with its own generator derived
from ``(seed, block index)``, so the value at frame ``i`` does not depend on how
the requests were chunked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import DivergenceError, ParameterError

KINDS = ("weibull", "exponential", "constant", "empirical")

# Weibull quadrature settings
_TAIL_MASS = 1e-12
_QUAD_EPSREL = 1e-9
_DECAY_RATIO = 1e-6

BLOCK = 1 << 16


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    shape: float = 1.0
    scale: float = 1.0
    value: float = 0.0
    samples: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown process kind {self.kind!r}")
        if self.kind == "weibull":
            _positive("shape", self.shape)
            _positive("scale", self.scale)
        elif self.kind == "exponential":
            _positive("mean", self.scale)
        elif self.kind == "constant":
            # +inf is allowed: a demand no arrival can ever meet
            if not (self.value > 0):
                raise ParameterError(f"value must be positive, got {self.value!r}")
        else:
            if len(self.samples) == 0:
                raise ParameterError("empirical process needs at least one sample")
            arr = np.asarray(self.samples, dtype=float)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ParameterError("empirical samples must be finite and >= 0")

    # constructors -----------------------------------------------------------
    @classmethod
    def weibull(cls, shape, scale):
        return cls("weibull", shape=float(shape), scale=float(scale))

    @classmethod
    def exponential(cls, mean):
        return cls("exponential", scale=float(mean))

    @classmethod
    def constant(cls, value):
        return cls("constant", value=float(value))

    @classmethod
    def empirical(cls, samples):
        return cls("empirical", samples=tuple(float(x) for x in samples))

    # serialization ------------------------------------------------------------
    def to_dict(self):
        if self.kind == "weibull":
            return {"type": "weibull", "shape": self.shape, "scale": self.scale}
        if self.kind == "exponential":
            return {"type": "exponential", "mean": self.scale}
        if self.kind == "constant":
            return {"type": "constant", "value": self.value}
        return {"type": "empirical", "samples": list(self.samples)}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "type" not in d:
            raise ParameterError("process record needs a 'type' field")
        kind = d["type"]
        keys = {
            "weibull": {"shape", "scale"},
            "exponential": {"mean"},
            "constant": {"value"},
            "empirical": {"samples"},
        }
        if kind not in keys:
            raise ParameterError(f"unknown process type {kind!r}")
        extra = set(d) - keys[kind] - {"type"}
        missing = keys[kind] - set(d)
        if missing or extra:
            raise ParameterError(
                f"{kind} record: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        try:
            if kind == "weibull":
                return cls.weibull(d["shape"], d["scale"])
            if kind == "exponential":
                return cls.exponential(d["mean"])
            if kind == "constant":
                return cls.constant(d["value"])
            return cls.empirical(d["samples"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"{kind} record: {exc}") from exc

    @property
    def is_exponential_like(self):
        return self.kind == "exponential" or (self.kind == "weibull" and self.shape == 1.0)


def _positive(name, x):
    if not (isinstance(x, (int, float, np.floating)) and math.isfinite(x) and x > 0):
        raise ParameterError(f"{name} must be a finite positive number, got {x!r}")


# moments and support ----------------------------------------------------------

def mean(spec: ProcessSpec) -> float:
    if spec.kind == "weibull":
        return spec.scale * math.gamma(1.0 + 1.0 / spec.shape)
    if spec.kind == "exponential":
        return spec.scale
    if spec.kind == "constant":
        return spec.value
    return float(np.mean(spec.samples))


def variance(spec: ProcessSpec) -> float:
    if spec.kind == "weibull":
        k = spec.shape
        return spec.scale**2 * (math.gamma(1 + 2 / k) - math.gamma(1 + 1 / k) ** 2)
    if spec.kind == "exponential":
        return spec.scale**2
    if spec.kind == "constant":
        return 0.0
    return float(np.var(spec.samples))


def max_support(spec: ProcessSpec) -> float:
    if spec.kind in ("weibull", "exponential"):
        return math.inf
    if spec.kind == "constant":
        return spec.value
    return float(max(spec.samples))


def min_support(spec: ProcessSpec) -> float:
    if spec.kind in ("weibull", "exponential"):
        return 0.0
    if spec.kind == "constant":
        return spec.value
    return float(min(spec.samples))


def quantile(spec: ProcessSpec, level: float) -> float:
    if not 0.0 <= level <= 1.0:
        raise ParameterError("quantile level must lie in [0, 1]")
    if spec.kind == "weibull":
        return spec.scale * (-math.log1p(-level)) ** (1.0 / spec.shape)
    if spec.kind == "exponential":
        return -spec.scale * math.log1p(-level)
    if spec.kind == "constant":
        return spec.value
    return float(np.quantile(spec.samples, level))


def mgf_domain_edge(spec: ProcessSpec) -> float:
    """Supremum of the ``s`` values where E[exp(sX)] is finite."""
    if spec.is_exponential_like:
        return 1.0 / spec.scale
    if spec.kind == "weibull" and spec.shape < 1.0:
        return 0.0
    return math.inf


def pdf(spec: ProcessSpec, x):
    x = np.asarray(x, dtype=float)
    if spec.kind == "weibull":
        k, lam = spec.shape, spec.scale
        z = np.maximum(x, 0.0) / lam
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (k / lam) * z ** (k - 1) * np.exp(-(z**k))
        return np.where(x >= 0, out, 0.0)
    if spec.kind == "exponential":
        return np.where(x >= 0, np.exp(-np.maximum(x, 0) / spec.scale) / spec.scale, 0.0)
    raise ParameterError(f"{spec.kind} process has no density")


# log moment generating function -------------------------------------------------

def log_mgf(spec: ProcessSpec, s: float) -> float:
    """ln E[exp(s X)] for one frame."""
    s = float(s)
    if s == 0.0:
        return 0.0
    if spec.kind == "constant":
        return s * spec.value
    if spec.is_exponential_like:
        lam = spec.scale
        if s * lam >= 1.0:
            raise DivergenceError(
                f"exponential MGF diverges for s >= 1/mean = {1 / lam:g}", boundary=1.0 / lam
            )
        return -math.log1p(-s * lam)
    if spec.kind == "empirical":
        x = np.asarray(spec.samples, dtype=float)
        if abs(s) * float(np.max(x)) <= 1.0:
            return math.log1p(float(np.mean(np.expm1(s * x))))
        return float(special.logsumexp(s * x) - math.log(x.size))
    return _weibull_log_mgf(spec, s)


def _weibull_log_mgf(spec, s):
    k, lam = spec.shape, spec.scale
    if k < 1.0 and s > 0.0:
        raise DivergenceError("Weibull MGF with shape < 1 diverges for every s > 0", boundary=0.0)
    upper = quantile(spec, 1.0 - _TAIL_MASS)

    def log_density(x):
        z = x / lam
        return math.log(k / lam) + (k - 1) * math.log(z) - z**k

    if s > 0.0:
        grid = np.linspace(upper * 1e-6, upper, 2001)
        vals = np.array([log_density(x) + s * x for x in grid])
        if vals[-1] - vals.max() > math.log(_DECAY_RATIO):
            # the integrand peaks near or past the cut-off; shape >= 1 keeps it finite
            return _weibull_log_mgf_peak(k, lam, s, log_density)

    def integrand(x):
        if x <= 0.0:
            return 0.0
        return math.expm1(s * x) * math.exp(log_density(x))

    mode = lam * ((k - 1) / k) ** (1 / k) if k > 1 else None
    pts = [mode] if mode is not None and 0 < mode < upper else None
    val, _ = integrate.quad(
        integrand, 0.0, upper, epsabs=0.0, epsrel=_QUAD_EPSREL, limit=400, points=pts
    )
    # E[exp(sX)] - 1 is integrated directly so small |s| keeps full relative precision
    return math.log1p(val)


def _weibull_log_mgf_peak(k, lam, s, log_density):
    """ln E[exp(sX)] in log space around the peak of f(x) exp(sx)."""
    ell = lambda x: log_density(x) + s * x
    # l'(x) = (k-1)/x - k x^(k-1)/lam^k + s is decreasing for k > 1
    dl = lambda x: (k - 1) / x - k * x ** (k - 1) / lam**k + s
    hi = lam
    while dl(hi) > 0:
        hi *= 2.0
    x_peak = optimize.brentq(dl, hi * 1e-12, hi) if k > 1 else hi
    top = ell(x_peak)
    upper = 2.0 * x_peak
    while ell(upper) > top - 60.0:
        upper *= 1.5
    val, _ = integrate.quad(
        lambda x: math.exp(ell(x) - top) if x > 0 else 0.0,
        0.0, upper, epsabs=0.0, epsrel=_QUAD_EPSREL, limit=400, points=[x_peak],
    )
    return top + math.log(val)


# sampling ---------------------------------------------------------------------

def derive_seed(seed: int, *tags) -> int:
    """Deterministic 63-bit child seed for a named sub-stream."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for t in tags:
        if isinstance(t, str):
            words.append(int.from_bytes(t.encode()[:8].ljust(8, b"\0"), "little"))
        else:
            words.append(int(t) & 0xFFFFFFFFFFFFFFFF)
    ss = np.random.SeedSequence(words)
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _draw(spec, rng, n):
    if spec.kind == "weibull":
        return spec.scale * rng.weibull(spec.shape, n)
    if spec.kind == "exponential":
        return rng.exponential(spec.scale, n)
    if spec.kind == "constant":
        return np.full(n, spec.value)
    return rng.choice(np.asarray(spec.samples, dtype=float), n)


@dataclass
class SampleStream:
    spec: ProcessSpec
    seed: int
    index: int = 0
    _cache: tuple = field(default=(-1, None), repr=False)

    def _block(self, b):
        if self._cache[0] != b:
            rng = np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(b,)))
            self._cache = (b, _draw(self.spec, rng, BLOCK))
        return self._cache[1]

    def sample(self, n: int) -> np.ndarray:
        if n < 1:
            raise ParameterError("sample count must be >= 1")
        if self.spec.kind == "constant":
            self.index += n
            return np.full(n, self.spec.value)
        out = np.empty(n)
        pos = 0
        i = self.index
        while pos < n:
            b, off = divmod(i, BLOCK)
            take = min(BLOCK - off, n - pos)
            out[pos : pos + take] = self._block(b)[off : off + take]
            pos += take
            i += take
        self.index = i
        return out


def sample(stream: SampleStream, n: int) -> np.ndarray:
    return stream.sample(n)
