import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import lambertw

from ehstore import channel as ch
from ehstore import outage as ou
from ehstore import overflow as ov
from ehstore import processes as pr
from ehstore.errors import ParameterError, SingularityError

AWGN = ch.ChannelSpec("awgn")
RAY = ch.ChannelSpec("rayleigh")


def test_capacity_examples():
    assert ch.instantaneous_capacity(ch.ChannelSpec("awgn", n_symbols=100), 1.0, 0.0) == 0.0
    assert ch.instantaneous_capacity(ch.ChannelSpec("awgn", n_symbols=1), 1.0, 3.0) == pytest.approx(2.0)
    assert ch.instantaneous_capacity(AWGN, 1.0, 100.0) == pytest.approx(100.0)


def test_kappa_examples():
    a = np.linspace(0.1, 1e4, 500)
    k = ch.kappa(AWGN, ch.RatePolicy("shannon", AWGN), a)
    assert np.max(np.abs(k - 1.0)) < 1e-12
    fixed = ch.RatePolicy("fixed", AWGN, rate=100.0)
    assert ch.kappa(AWGN, fixed, 50.0) == pytest.approx(2.0)
    tab = ch.RatePolicy("tabulated", AWGN, grid=((0.0, 100.0, 200.0), (0.0, 200.0, 300.0)))
    assert ch.kappa(AWGN, tab, 100.0) == pytest.approx(3.0)
    with pytest.raises(SingularityError):
        ch.kappa(AWGN, _ConstantRate(), 0.0)


class _ConstantRate:
    kind = "custom"

    def __call__(self, a):
        return np.full(np.shape(a), 10.0)


def test_kappa_zero_energy_zero_rate():
    assert ch.kappa(AWGN, ch.RatePolicy("shannon", AWGN), 0.0) == 0.0


def test_success_prob():
    assert ch.success_prob(RAY, 0.0) == 1.0
    assert ch.success_prob(RAY, 1.0) == pytest.approx(math.exp(-1))
    assert ch.success_prob(AWGN, 1.0) == 1.0
    assert ch.success_prob(AWGN, 1.1) == 0.0


@pytest.mark.parametrize("energy", [1e-3, 1.0, 100.0, 1e4])
def test_optimal_rate_lambert_w(energy):
    # d/dR [R exp(-kappa)] = 0  <=>  R/N = W(a / (N sigma_w^2)) / ln 2
    r = ch.optimize_rate(RAY, energy)
    assert r.rate == pytest.approx(100 * lambertw(energy / 100).real / math.log(2), abs=2e-4)
    assert ch.objective_unimodal(RAY, energy)


def test_optimal_rate_grid_and_certificate():
    r = ch.optimize_rate(RAY, 100.0)
    grid = np.arange(1e-3, 2000.0, 1e-3)
    obj = grid * np.exp(-np.expm1(grid / 100 * math.log(2)) * 100 / 100.0)
    assert r.expected_bits >= obj.max() - 1e-2
    rng = np.random.default_rng(0)
    for R in rng.uniform(0, 2000, 100):
        assert r.expected_bits >= R * math.exp(-math.expm1(R / 100 * math.log(2)))
    awgn = ch.optimize_rate(AWGN, 100.0)
    assert (awgn.rate, awgn.expected_bits) == (pytest.approx(100.0), pytest.approx(100.0))


@given(st.lists(st.floats(0, 1e4), min_size=2, max_size=20))
def test_policies_monotone_and_zero_at_zero(a):
    a = np.sort(np.array(a))
    for pol in (ch.RatePolicy("shannon", AWGN), ch.RatePolicy("fixed", AWGN, rate=5.0), ch.RatePolicy("optimal", RAY)):
        g = np.asarray(pol(a))
        assert np.all(np.diff(g) >= -1e-3)
        assert float(pol(np.array([0.0]))[0]) == 0.0


def test_bad_policy_and_channel():
    with pytest.raises(ParameterError):
        ch.RatePolicy("tabulated", AWGN, grid=((0.0, 1.0), (0.0, -1.0)))
    with pytest.raises(ParameterError):
        ch.ChannelSpec("rician")
    with pytest.raises(ParameterError):
        ch.ChannelSpec("awgn", n_symbols=0)


@pytest.fixture(scope="module")
def setup():
    arr = pr.ProcessSpec.exponential(316.0)
    mu = 0.7 / 316.0
    dem = pr.ProcessSpec.constant(ov.min_constant_demand(arr, mu))
    chain = ou.build_chain(arr, dem, alpha=200, n_paths=2 * 10**5, seed=1)
    dens = ch.estimate_conditional_densities(arr, dem, chain, n_frames=2 * 10**6, seed=2)
    return arr, dem, chain, dens


def test_density_normalization(setup):
    _, dem, _, dens = setup
    for m in np.nonzero(dens.available)[0][:20]:
        masses, above = dens.mass(m)
        assert masses.sum() + above == pytest.approx(1.0, abs=1e-12)
        assert np.sum(dens.density(m)) * dens.bin_width + above == pytest.approx(1.0, abs=1e-3)
    # p is a bin edge with the default width
    assert np.any(np.isclose(dens.edges, dem.value))


def test_density_shifts_up_with_state(setup):
    # survivors accumulate energy: the mass below the demand shrinks with m
    _, dem, _, dens = setup
    below = [dens.mass(m)[0][dens.centers < dem.value].sum() for m in (0, 5, 20)]
    assert below[0] > below[1] > below[2]


def test_constant_arrival_point_mass():
    arr, dem = pr.ProcessSpec.constant(1.0), pr.ProcessSpec.constant(3.0)
    chain = ou.build_chain(arr, dem, alpha=2, n_paths=1000)
    dens = ch.estimate_conditional_densities(arr, dem, chain, n_frames=1000, bin_width=0.1)
    m, _ = dens.mass(0)
    assert m[int(1.0 / 0.1)] == 1.0


def test_sparse_state_warning():
    arr, dem = pr.ProcessSpec.constant(1.0), pr.ProcessSpec.constant(3.0)
    chain = ou.build_chain(arr, dem, alpha=3, n_paths=1000)
    with pytest.warns(ch.SparseStateWarning):
        dens = ch.estimate_conditional_densities(arr, dem, chain, n_frames=1000, bin_width=0.1)
    assert not dens.available[1]


def test_lower_bound_monotone(setup):
    _, dem, chain, dens = setup
    for c in (AWGN, RAY):
        pol = ch.default_policy(c)
        vals = [ch.avg_service_rate(chain, dens, c, pol, dem, alpha=a) for a in (0, 1, 2, 5, 20, 100, 199)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= ch.avg_service_rate(chain, dens, c, pol, dem) + 1e-9


def test_no_outage_collapses_to_rate_times_success(setup):
    _, dem, chain, dens = setup
    pol = ch.RatePolicy("fixed", RAY, rate=150.0)
    never = ou.OutageChain(chain.q, chain.alpha, np.r_[0.0, chain.pi[1:] / chain.pi[1:].sum()], 0.0, 0.0, 0,
                           chain.std_err, chain.q_raw, chain.survivors)
    dens0 = ch.ConditionalEnergyDensity(dens.edges, np.zeros_like(dens.counts), dens.visits.copy(), dens.visits.copy())
    s = ch.avg_service_rate(never, dens0, RAY, pol, dem)
    assert s == pytest.approx(150.0 * math.exp(-math.expm1(1.5 * math.log(2)) * 100 / dem.value))


def test_stochastic_demand_reduces_to_constant(setup):
    arr, dem, chain, dens = setup
    emp = pr.ProcessSpec.empirical([dem.value])
    a = ch.avg_service_rate(chain, dens, AWGN, ch.default_policy(AWGN), dem)
    b = ch.avg_service_rate(chain, dens, AWGN, ch.default_policy(AWGN), emp, n_demand=10)
    assert b == pytest.approx(a, rel=2e-3)


def test_histogram_merge(setup):
    _, _, _, dens = setup
    both = dens.merge(dens)
    assert np.array_equal(both.counts, 2 * dens.counts)
    assert both.density(0) == pytest.approx(dens.density(0))
