"""One-command cross-check of every analytic quantity against simulation."""
from __future__ import annotations

import math
import warnings

import numpy as np

from . import capacity as cap
from . import channel as ch
from . import harness as hs
from . import outage as ou
from . import overflow as ov
from . import processes as pr
from .errors import InstabilityError, ParameterError

BLOCK_T = 10**4


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def validate(cfg, frames=None) -> hs.ExperimentResult:
    frames = cfg.frames if frames is None else frames
    arr, dem = cfg.arrival, cfg.resolved_demand()
    seeds = {name: pr.derive_seed(cfg.seed, name) for name in ("chain", "density", "tail", "outage", "service")}
    res = hs.ExperimentResult(cfg.to_dict(), seeds)
    finite = math.isfinite(pr.mean(dem))

    # decay rate of the battery tail
    if finite and pr.mean(arr) < pr.mean(dem):
        mu = ov.solve_decay_rate(arr, dem).mu_star
        top = 20.0 / mu
        curve = hs.mc_overflow_tail(arr, dem, np.linspace(0.0, top, 41), math.inf, frames, seeds["tail"], mu=mu)
        try:
            slope = hs.tail_decay_rate(curve)
            res.add("decay_rate", mu, slope, math.nan, "rel 10%", _rel(slope, mu) <= 0.10)
        except (InstabilityError, ParameterError):
            res.add("decay_rate", mu, math.nan, math.nan, "rel 10%", False)

    # outage probability
    alpha = max(cfg.alpha, 200)
    chain = ou.build_chain(arr, dem, alpha=alpha, n_paths=cfg.mc_paths, seed=seeds["chain"], m_max=alpha + 1)
    rate, se = hs.mc_outage_rate(arr, dem, frames, seeds["outage"])
    res.add("outage_probability", chain.pi0_upper, rate, se, "rel 5%", _rel(chain.pi0_upper, rate) <= 0.05)

    # average service rate
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ch.SparseStateWarning)
        dens = ch.estimate_conditional_densities(arr, dem, chain, n_frames=frames, seed=seeds["density"])
        s_avg = ch.avg_service_rate(chain, dens, cfg.channel, cfg.policy, dem)
    s = hs.service_trace(arr, dem, cfg.channel, cfg.policy, frames, seeds["service"])
    res.add("service_rate", s_avg, s.mean(), s.std() / math.sqrt(s.size), "rel 2%", _rel(s_avg, s.mean()) <= 0.02)

    N = cfg.channel.n_symbols
    # block estimator needs theta^2 Var S(t) = O(1); larger theta is dominated by rare blocks
    theta_b = min(1.0 / math.sqrt(BLOCK_T * max(s.var(), 1e-12)), min(cfg.thetas))
    sol_b = cap.effective_capacity(theta_b, alpha, chain, dens, cfg.channel, cfg.policy, dem)
    if s.size >= 2 * BLOCK_T:
        blk = hs.block_effective_capacity(s, theta_b, BLOCK_T, N)
        res.add(f"effective_capacity_block_theta_{theta_b:.3g}", sol_b.C_E, blk, math.nan, "rel 5%",
                _rel(sol_b.C_E, blk) <= 0.05)

    for th in cfg.thetas:
        sol = cap.effective_capacity(th, alpha, chain, dens, cfg.channel, cfg.policy, dem)
        tr = [sol.trace[a] for a in sorted(sol.trace)]
        ok = all(b <= a + 1e-12 for a, b in zip(tr, tr[1:]))
        res.add(f"truncation_monotone_theta_{th:g}", tr[0], tr[-1], math.nan, "non-increasing", ok)
        tab = cap.moment_table(th, chain, dens, cfg.channel, cfg.policy, dem, alpha)
        with np.errstate(divide="ignore"):
            lb = cap._log_b(tab.q, math.log(tab.phi0), np.log(tab.phij[: alpha - 1]), alpha)
        if np.any(np.isfinite(lb)):
            rad = cap.companion_radius(np.concatenate(([1.0], -np.exp(lb))), log_b=lb)
            res.add(f"root_oracle_theta_{th:g}", sol.chi_star, rad, math.nan, "abs 1e-9",
                    abs(rad - sol.chi_star) <= 1e-9)
        a = 0.95 * N * sol.C_E
        try:
            fit = hs.buffer_tail_exponent(s, a)
            res.add(f"queue_exponent_theta_{th:g}", th, fit.theta, math.nan, ">= 0.9 theta", fit.theta >= 0.9 * th)
        except (InstabilityError, ParameterError):
            res.add(f"queue_exponent_theta_{th:g}", th, math.nan, math.nan, ">= 0.9 theta", False)
    return res
