"""Command-line front end: ``ehstore <subcommand> [flags]``.

Exit status: 0 success, 2 configuration error, 3 numerical error,
4 validation failure, 1 any other package error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import warnings

from . import capacity as cap
from . import channel as ch
from . import config as cfgmod
from . import harness as hs
from . import outage as ou
from . import overflow as ov
from . import processes as pr
from . import recipes as rc
from .battery import simulate_path
from .errors import ConfigError, EHError, NumericalError, ValidationFailure

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3, 4
LOWER_ALPHAS = (1, 5, 20)


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _load(args):
    if args.config is None:
        raise ConfigError("a config file is required for this subcommand", "--config")
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.frames is not None:
        cfg.frames = args.frames
    if args.out is not None:
        cfg.out = args.out
    cfg.__post_init__()
    os.makedirs(cfg.out, exist_ok=True)
    return cfg


def _mu(cfg, demand):
    if cfg.mu_target is not None:
        return cfg.mu_target
    if math.isfinite(pr.mean(demand)) and pr.mean(cfg.arrival) < pr.mean(demand):
        return ov.solve_decay_rate(cfg.arrival, demand).mu_star
    return math.nan


def _analysis(cfg):
    demand = cfg.resolved_demand()
    alpha = max(cfg.alpha, max(cap.TRACE_ALPHAS))
    chain = ou.build_chain(cfg.arrival, demand, alpha=alpha, n_paths=cfg.mc_paths,
                           seed=pr.derive_seed(cfg.seed, "chain"), m_max=alpha + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ch.SparseStateWarning)
        dens = ch.estimate_conditional_densities(cfg.arrival, demand, chain, n_frames=cfg.frames,
                                                 seed=pr.derive_seed(cfg.seed, "density"))
    return demand, chain, dens


def cmd_decay_rate(args):
    cfg = _load(args)
    if cfg.mu_target is not None:
        demand = cfg.resolved_demand()
        mu = cfg.mu_target
        residual = math.nan
        _say(args, f"p* = {float(demand.value)!r}")
    else:
        demand = cfg.demand
        sol = ov.solve_decay_rate(cfg.arrival, demand)
        mu, residual = sol.mu_star, sol.residual
        _say(args, f"mu* = {float(mu)!r}")
    p_star = demand.value if demand.kind == "constant" else math.nan
    u_star = ov.max_constant_arrival(demand, mu) if math.isfinite(mu) and math.isfinite(pr.mean(demand)) else math.nan
    rc.write_csv(os.path.join(cfg.out, "decay_rate.csv"),
                 ["mu", "p_star", "u_star", "residual"], [[mu, p_star, u_star, residual]])
    return EXIT_OK


def cmd_outage(args):
    cfg = _load(args)
    demand = cfg.resolved_demand()
    alpha = cfg.alpha
    chain = ou.build_chain(cfg.arrival, demand, alpha=alpha, n_paths=cfg.mc_paths,
                           seed=pr.derive_seed(cfg.seed, "chain"), m_max=max(alpha + 1, 201))
    rows = []
    for a in sorted({a for a in cap.TRACE_ALPHAS if a < chain.q.size} | {alpha}):
        c = chain.at_alpha(a)
        rows.append([_mu(cfg, demand), a, c.pi0, c.pi0_upper, cfg.mc_paths])
    rc.write_csv(os.path.join(cfg.out, "outage.csv"), ["mu", "alpha", "pi0", "pi0_upper", "mc_paths"], rows)
    m = range(1, chain.q.size + 1)
    rc.write_csv(
        os.path.join(cfg.out, "outage_chain.csv"),
        ["m", "q_fit", "q_raw", "std_err", "survivors"],
        [[k, chain.q[k - 1], chain.q_raw[k - 1], chain.std_err[k - 1], chain.survivors[k]] for k in m],
    )
    _say(args, f"pi0 <= {float(chain.pi0_upper)!r} (alpha={alpha})")
    return EXIT_OK


def cmd_service_rate(args):
    cfg = _load(args)
    demand, chain, dens = _analysis(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ch.SparseStateWarning)
        s = ch.avg_service_rate(chain, dens, cfg.channel, cfg.policy, demand)
        lbs = [ch.avg_service_rate(chain, dens, cfg.channel, cfg.policy, demand, alpha=a) for a in LOWER_ALPHAS]
    sim, se = hs.mc_service_rate(cfg.arrival, demand, cfg.channel, cfg.policy, cfg.frames,
                                 pr.derive_seed(cfg.seed, "sim"))
    header = ["mu", "channel", "s_avg", "s_simulated", "s_simulated_se"] + [f"lower_bound_alpha_{a}" for a in LOWER_ALPHAS]
    rc.write_csv(os.path.join(cfg.out, "service_rate.csv"), header,
                 [[_mu(cfg, demand), cfg.channel.kind, s, sim, se] + lbs])
    _say(args, f"s_avg = {float(s)!r} bits/frame (simulated {float(sim)!r} +- {float(se)!r})")
    return EXIT_OK


def cmd_effective_capacity(args):
    cfg = _load(args)
    demand, chain, dens = _analysis(cfg)
    rows, trace_rows = [], []
    mu = _mu(cfg, demand)
    for th in cfg.thetas:
        sol = cap.effective_capacity(th, cfg.alpha, chain, dens, cfg.channel, cfg.policy, demand)
        rows.append([th, mu, cfg.alpha, sol.chi_star, sol.C_E])
        trace_rows += [[th, a, v] for a, v in sorted(sol.trace.items())]
        _say(args, f"theta={th!r}: C_E = {float(sol.C_E)!r} bits/channel use")
    rc.write_csv(os.path.join(cfg.out, "effective_capacity.csv"), ["theta", "mu", "alpha", "chi_star", "C_E"], rows)
    rc.write_csv(os.path.join(cfg.out, "effective_capacity_trace.csv"), ["theta", "alpha", "C_E"], trace_rows)
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load(args)
    demand = cfg.resolved_demand()
    tr = simulate_path(cfg.arrival, demand, 0.0, cfg.battery_capacity, cfg.frames,
                       pr.derive_seed(cfg.seed, "path"), decimate=args.decimate)
    tr.write_csv(os.path.join(cfg.out, "trace.csv"))
    _say(args, f"{cfg.frames} frames, {int(tr.outage.sum())} outages in kept rows")
    return EXIT_OK


def cmd_validate(args):
    from .validation import validate

    cfg = _load(args)
    res = validate(cfg)
    res.write_csv(os.path.join(cfg.out, "validate.csv"))
    res.write_summary(os.path.join(cfg.out, "validate_summary.json"))
    for c in res.checks:
        _say(args, f"{'PASS' if c.passed else 'FAIL'} {c.name}: analytic={c.analytic:.6g} empirical={c.empirical:.6g}")
    if not res.passed:
        raise ValidationFailure("one or more checks failed")
    return EXIT_OK


def cmd_reproduce(args):
    sizes = rc.Sizes()
    if args.alpha is not None:
        sizes.alpha = args.alpha
    if args.frames is not None:
        sizes.frames = args.frames
        sizes.sim_frames = args.frames
    if args.paths is not None:
        sizes.paths = args.paths
    seed = 0 if args.seed is None else args.seed
    out = args.out or "out"
    os.makedirs(out, exist_ok=True)
    fn = rc.RECIPES[args.figure]
    if args.figure == "fig3a":
        header, rows = fn(sizes, seed, frames=args.frames or 10**8)
    else:
        header, rows = fn(sizes, seed)
    path = os.path.join(out, f"{args.figure}.csv")
    rc.write_csv(path, header, rows)
    _say(args, f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file")
    common.add_argument("--seed", type=int, help="override the config seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha", type=int, help="truncation order")
    common.add_argument("--frames", type=int, help="simulated frames")
    common.add_argument("--quiet", action="store_true", help="suppress stdout summaries")

    p = argparse.ArgumentParser(prog="ehstore", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("decay-rate", parents=[common], help="decay rate or calibrated demand").set_defaults(fn=cmd_decay_rate)
    sub.add_parser("outage", parents=[common], help="outage probability").set_defaults(fn=cmd_outage)
    sub.add_parser("service-rate", parents=[common], help="average data service rate").set_defaults(fn=cmd_service_rate)
    sub.add_parser("effective-capacity", parents=[common], help="effective capacity").set_defaults(fn=cmd_effective_capacity)
    sim = sub.add_parser("simulate", parents=[common], help="write a battery trace")
    sim.add_argument("--decimate", type=int, default=1, help="keep every n-th frame")
    sim.set_defaults(fn=cmd_simulate)
    sub.add_parser("validate", parents=[common], help="analytic vs simulation checks").set_defaults(fn=cmd_validate)
    rep = sub.add_parser("reproduce", parents=[common], help="pre-baked figure sweeps")
    rep.add_argument("figure", choices=sorted(rc.RECIPES))
    rep.add_argument("--paths", type=int, help="survival-counting paths per point")
    rep.set_defaults(fn=cmd_reproduce)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EHError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
