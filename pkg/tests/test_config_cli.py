import math
import os

import pytest

from ehstore import cli
from ehstore import config as cf
from ehstore.errors import ConfigError

BASE = """
arrival: {type: exponential, mean: 1.0}
demand: {type: constant, value: 1.5}
channel: {type: awgn, n_symbols: 100}
mc_paths: 1000
frames: 10000
"""


def test_round_trip():
    cfg = cf.loads(BASE)
    again = cf.loads(cfg.dump())
    assert again.to_dict() == cfg.to_dict()
    assert math.isinf(again.battery_capacity)


def test_lambda_db():
    cfg = cf.loads("arrival: {type: exponential, lambda_db: 3}\nmu_target: 0.001\n")
    assert cfg.arrival.scale == pytest.approx(100 * 10 ** 0.3)
    assert cfg.resolved_demand().kind == "constant"


@pytest.mark.parametrize("text, field", [
    ("demand: {type: constant, value: 1}", "arrival"),
    (BASE + "alpha: 0\n", "alpha"),
    (BASE + "thetas: [-1]\n", "thetas"),
    (BASE + "mu_target: 0.1\n", "demand"),
    (BASE + "bogus: 1\n", "bogus"),
    (BASE + "seed: -3\n", "seed"),
    ("arrival: {type: weibull, k: -1, lambda: 1}\nmu_target: 0.1\n", "arrival"),
])
def test_field_named_errors(text, field):
    with pytest.raises(ConfigError) as info:
        cf.loads(text)
    assert info.value.field == field


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text(BASE)
    return p


def test_decay_rate_command(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["decay-rate", "--config", str(cfg_file), "--out", str(out), "--quiet"]) == 0
    lines = (out / "decay_rate.csv").read_text().splitlines()
    assert lines[0] == "mu,p_star,u_star,residual"
    mu = float(lines[1].split(",")[0])
    # exponential(1) against 1.5: mu solves -ln(1 - mu)/mu = 1.5
    assert -math.log(1 - mu) / mu == pytest.approx(1.5, rel=1e-9)


def test_calibrated_demand(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("arrival: {type: exponential, mean: 1.0}\nmu_target: 0.5\n")
    assert cli.main(["decay-rate", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 0
    p_star = float((tmp_path / "decay_rate.csv").read_text().splitlines()[1].split(",")[1])
    assert p_star == pytest.approx(2 * math.log(2), rel=1e-12)


def test_exit_codes(tmp_path, cfg_file):
    bad = tmp_path / "bad.yaml"
    bad.write_text(BASE + "alpha: 0\n")
    assert cli.main(["outage", "--config", str(bad), "--quiet"]) == cli.EXIT_CONFIG
    assert cli.main(["outage", "--quiet"]) == cli.EXIT_CONFIG
    assert cli.main(["outage", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path), "--quiet"]) == cli.EXIT_OK
    assert (tmp_path / "trace.csv").exists()


def test_outage_command(cfg_file, tmp_path):
    assert cli.main(["outage", "--config", str(cfg_file), "--out", str(tmp_path), "--alpha", "50", "--quiet"]) == 0
    rows = (tmp_path / "outage.csv").read_text().splitlines()
    assert rows[0] == "mu,alpha,pi0,pi0_upper,mc_paths"
    assert os.path.exists(tmp_path / "outage_chain.csv")
