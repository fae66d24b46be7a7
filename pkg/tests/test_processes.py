import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehstore import processes as pr
from ehstore.errors import DivergenceError, ParameterError


def test_exponential_log_mgf_closed_form():
    spec = pr.ProcessSpec.exponential(2.0)
    for s in (-3.0, -0.1, 0.1, 0.25, 0.49):
        assert pr.log_mgf(spec, s) == pytest.approx(-math.log(1 - 2.0 * s), rel=1e-14)


def test_exponential_log_mgf_diverges_at_edge():
    with pytest.raises(DivergenceError) as info:
        pr.log_mgf(pr.ProcessSpec.exponential(2.0), 0.5)
    assert info.value.boundary == pytest.approx(0.5)


def test_weibull_shape_one_matches_exponential():
    w = pr.ProcessSpec.weibull(1.0, 3.0)
    e = pr.ProcessSpec.exponential(3.0)
    for s in (-1.0, 0.05, 0.2):
        assert pr.log_mgf(w, s) == pytest.approx(pr.log_mgf(e, s), rel=1e-12)


def test_weibull_quadrature_against_sample_mean():
    spec = pr.ProcessSpec.weibull(5, 2)
    x = pr.SampleStream(spec, 11).sample(2_000_000)
    for s in (-1.0, 0.5, 2.0):
        mc = math.log(np.mean(np.exp(s * x)))
        assert pr.log_mgf(spec, s) == pytest.approx(mc, abs=3e-3)


def test_weibull_small_s_slope_is_mean():
    spec = pr.ProcessSpec.weibull(5, 2)
    s = 1e-6
    assert pr.log_mgf(spec, s) / s == pytest.approx(pr.mean(spec), rel=1e-6)


def test_weibull_heavy_tail_diverges():
    with pytest.raises(DivergenceError):
        pr.log_mgf(pr.ProcessSpec.weibull(0.5, 1.0), 0.1)


def test_constant_and_empirical():
    assert pr.log_mgf(pr.ProcessSpec.constant(3.0), 0.7) == pytest.approx(2.1)
    emp = pr.ProcessSpec.empirical([1.0, 2.0, 3.0])
    assert pr.log_mgf(emp, 0.3) == pytest.approx(math.log(np.mean(np.exp(0.3 * np.array([1, 2, 3])))))
    # large s: dominated by the maximum
    assert pr.log_mgf(emp, 1e3) / 1e3 == pytest.approx(3.0, rel=1e-3)


@pytest.mark.parametrize(
    "rec",
    [{"type": "weibull", "shape": 0}, {"type": "exponential"}, {"type": "constant", "value": -1},
     {"type": "empirical", "samples": []}, {"type": "gamma", "shape": 1}, {"shape": 1}],
)
def test_bad_records_rejected(rec):
    with pytest.raises(ParameterError):
        pr.ProcessSpec.from_dict(rec)


@given(st.sampled_from(["weibull", "exponential", "constant", "empirical"]),
       st.floats(0.2, 10), st.floats(0.1, 100))
def test_record_round_trip(kind, a, b):
    spec = {
        "weibull": pr.ProcessSpec.weibull(a, b),
        "exponential": pr.ProcessSpec.exponential(b),
        "constant": pr.ProcessSpec.constant(b),
        "empirical": pr.ProcessSpec.empirical([a, b]),
    }[kind]
    assert pr.ProcessSpec.from_dict(spec.to_dict()) == spec


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.lists(st.integers(1, 70_000), min_size=1, max_size=5))
def test_sampling_independent_of_chunking(seed, chunks):
    spec = pr.ProcessSpec.exponential(1.0)
    total = sum(chunks)
    whole = pr.SampleStream(spec, seed).sample(total)
    stream = pr.SampleStream(spec, seed)
    parts = np.concatenate([stream.sample(n) for n in chunks])
    assert np.array_equal(whole, parts)


def test_derived_seeds_differ():
    assert pr.derive_seed(1, "arrival") != pr.derive_seed(1, "demand")
    assert pr.derive_seed(1, "arrival") == pr.derive_seed(1, "arrival")


def test_moments_and_quantiles():
    w = pr.ProcessSpec.weibull(2.0, 1.0)
    assert pr.mean(w) == pytest.approx(math.sqrt(math.pi) / 2)
    assert pr.quantile(w, 1 - math.exp(-1)) == pytest.approx(1.0)
    x = pr.SampleStream(w, 3).sample(10**6)
    assert x.var() == pytest.approx(pr.variance(w), rel=1e-2)
