"""Experiment configuration files (YAML with tagged process records).

Example::

    arrival: {type: exponential, lambda_db: 5}   # lambda = N sigma_w^2 10^(dB/10)
    mu_target: 0.002                             # or: demand: {type: constant, value: 400}
    channel: {type: rayleigh, noise_var: 1.0, fading_var: 1.0, n_symbols: 100}
    policy: {type: optimal}                      # shannon | fixed | tabulated | optimal
    thetas: [0.1]                                # QoS exponents, 1/bit
    alpha: 100                                   # truncation order
    mc_paths: 1000000                            # survival-counting paths
    frames: 10000000                             # simulated frames
    battery_capacity: .inf                       # e_max, energy units
    seed: 0
    out: out

Energies are in the same unit as sigma_w^2 per symbol times N; rates in bits
per frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .channel import ChannelSpec, RatePolicy, default_policy
from .errors import ConfigError, EHError
from .processes import ProcessSpec

KEYS = {
    "arrival", "demand", "mu_target", "channel", "policy", "thetas", "alpha",
    "mc_paths", "frames", "battery_capacity", "seed", "out",
}


@dataclass
class ExperimentConfig:
    arrival: ProcessSpec
    demand: ProcessSpec | None = None
    mu_target: float | None = None
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    policy: RatePolicy | None = None
    thetas: tuple = (0.1,)
    alpha: int = 100
    mc_paths: int = 10**6
    frames: int = 10**7
    battery_capacity: float = math.inf
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        if (self.demand is None) == (self.mu_target is None):
            raise ConfigError("give exactly one of 'demand' and 'mu_target'", "demand")
        if self.mu_target is not None and not (self.mu_target > 0 and math.isfinite(self.mu_target)):
            raise ConfigError("must be a positive number", "mu_target")
        if self.policy is None:
            self.policy = default_policy(self.channel)
        self.thetas = tuple(float(t) for t in self.thetas)
        if not self.thetas or any(not t > 0 for t in self.thetas):
            raise ConfigError("QoS exponents must be positive", "thetas")
        for name, lo in (("alpha", 1), ("mc_paths", 1000), ("frames", 1)):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < lo:
                raise ConfigError(f"must be an integer >= {lo}", name)
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("must be an unsigned 64-bit integer", "seed")
        if not self.battery_capacity > 0:
            raise ConfigError("must be positive", "battery_capacity")

    def resolved_demand(self):
        """Demand spec, derived from ``mu_target`` when that is what was given."""
        if self.demand is not None:
            return self.demand
        from .recipes import demand_for

        return demand_for(self.arrival, self.mu_target)

    def to_dict(self):
        d = {
            "arrival": self.arrival.to_dict(),
            "channel": self.channel.to_dict(),
            "policy": self.policy.to_dict(),
            "thetas": list(self.thetas),
            "alpha": self.alpha,
            "mc_paths": self.mc_paths,
            "frames": self.frames,
            "battery_capacity": self.battery_capacity,
            "seed": self.seed,
            "out": self.out,
        }
        if self.demand is not None:
            d["demand"] = self.demand.to_dict()
        else:
            d["mu_target"] = self.mu_target
        return d

    def dump(self, path=None):
        text = yaml.safe_dump(self.to_dict(), sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _process(rec, name, channel):
    if not isinstance(rec, dict):
        raise ConfigError("expected a mapping with a 'type' field", name)
    rec = dict(rec)
    if "lambda_db" in rec:
        if rec.get("type") != "exponential" or "mean" in rec:
            raise ConfigError("lambda_db only applies to exponential records without 'mean'", name)
        rec["mean"] = channel.n_symbols * channel.noise_var * 10 ** (float(rec.pop("lambda_db")) / 10.0)
    try:
        return ProcessSpec.from_dict(rec)
    except EHError as exc:
        raise ConfigError(str(exc), name) from exc


def _number(d, name, kind, default):
    v = d.get(name, default)
    try:
        if kind is int:
            if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
                raise ValueError
            return int(v)
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {v!r}", name) from None


def from_dict(d) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping", "<root>")
    extra = set(d) - KEYS
    if extra:
        raise ConfigError("unknown key", sorted(extra)[0])
    if "arrival" not in d:
        raise ConfigError("missing", "arrival")
    try:
        channel = ChannelSpec.from_dict(d.get("channel", {"type": "rayleigh"}))
    except (EHError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "channel") from exc
    arrival = _process(d["arrival"], "arrival", channel)
    demand = _process(d["demand"], "demand", channel) if d.get("demand") is not None else None
    mu = _number(d, "mu_target", float, None) if d.get("mu_target") is not None else None
    policy = None
    if d.get("policy") is not None:
        try:
            policy = RatePolicy.from_dict(d["policy"], channel)
        except (EHError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "policy") from exc
    thetas = d.get("thetas", [0.1])
    if not isinstance(thetas, (list, tuple)):
        thetas = [thetas]
    try:
        thetas = tuple(float(t) for t in thetas)
    except (TypeError, ValueError):
        raise ConfigError("expected a list of numbers", "thetas") from None
    return ExperimentConfig(
        arrival=arrival,
        demand=demand,
        mu_target=mu,
        channel=channel,
        policy=policy,
        thetas=thetas,
        alpha=_number(d, "alpha", int, 100),
        mc_paths=_number(d, "mc_paths", int, 10**6),
        frames=_number(d, "frames", int, 10**7),
        battery_capacity=_number(d, "battery_capacity", float, math.inf),
        seed=_number(d, "seed", int, 0),
        out=str(d.get("out", "out")),
    )


def loads(text) -> ExperimentConfig:
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}", "<file>") from exc
    return from_dict(d)


def load(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError(str(exc), "--config") from exc
