import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from irsagmac.errors import ValidationError
from irsagmac.protocol import (
    IrsaDistribution,
    LoadPoint,
    SaConfig,
    mean_degree,
    pgf_derivative,
    poisson_weighted_sum,
    sa_plr_asymptotic,
    sa_plr_finite,
)

from conftest import EXAMPLE1


def test_example1_efficiency():
    assert mean_degree(EXAMPLE1) == pytest.approx(2 * 0.5102 + 4 * 0.4898, rel=1e-15)
    assert EXAMPLE1.efficiency == pytest.approx(1 / 2.9796, rel=1e-12)
    assert EXAMPLE1.dmin == 2 and EXAMPLE1.dmax == 4 and EXAMPLE1.lambda1 == 0.0


def test_parse_roundtrip():
    d = IrsaDistribution.parse("1:0.1382, 2:0.8618")
    assert d.probs == (0.1382, 0.8618)
    assert IrsaDistribution.parse(d.to_text()) == d
    assert d.efficiency == pytest.approx(1 / 1.8618)


@pytest.mark.parametrize("text", ["2:0.5, 4:0.49", "2:0.5 2:0.5", "0:1", "x:1", "2-1"])
def test_parse_rejects(text):
    with pytest.raises(ValidationError):
        IrsaDistribution.parse(text)


def test_sum_error_names_field():
    with pytest.raises(ValidationError, match="sum to 0.99"):
        IrsaDistribution((0.0, 0.5, 0.0, 0.49))


def test_negative_probability():
    with pytest.raises(ValidationError):
        IrsaDistribution((1.1, -0.1))


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(lambda v: sum(v) > 0.1), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_pgf_properties(raw, x):
    total = math.fsum(raw)
    probs = [v / total for v in raw]
    probs[-1] = 1.0 - math.fsum(probs[:-1])
    if probs[-1] < 0:
        return
    d = IrsaDistribution(tuple(probs))
    assert d.pgf(1.0) == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= d.pgf(x) <= 1.0 + 1e-12
    assert pgf_derivative(d, 1.0) == pytest.approx(mean_degree(d), rel=1e-12)
    h = 1e-6
    if 2 * h < x < 1 - 2 * h:
        fd = (d.pgf(x + h) - d.pgf(x - h)) / (2 * h)
        assert pgf_derivative(d, x) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_sample_frequencies():
    rng = np.random.default_rng(3)
    s = EXAMPLE1.sample(rng, 200_000)
    assert set(np.unique(s)) == {2, 4}
    assert np.mean(s == 2) == pytest.approx(0.5102, abs=4e-3)


@given(st.floats(0.0, 30.0), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6))
@settings(max_examples=80, deadline=None)
def test_poisson_weighted_sum_matches_pmf(x, w):
    from scipy.stats import poisson

    ref = float(np.dot(w, poisson.pmf(np.arange(len(w)), x)))
    assert poisson_weighted_sum(x, w) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_load_point_consistency():
    lp = LoadPoint.from_users(200, 400)
    assert lp.g == 0.5
    with pytest.raises(ValidationError):
        LoadPoint(0.6, 200, 400)
    with pytest.raises(ValidationError):
        LoadPoint(0.0)


def test_sa_collision_channel_closed_form():
    # T = 1, no errors: throughput-style loss 1 - exp(-G)
    cfg = SaConfig.uniform(1, 0.0)
    for g in (0.1, 0.5, 1.0, 2.0):
        assert sa_plr_asymptotic(cfg, g) == pytest.approx(1 - math.exp(-g), rel=1e-14)


def test_sa_finite_matches_binomial_and_limit():
    cfg = SaConfig(3, (0.05, 0.1, 0.3))
    k, n = 120, 200
    p = binom.pmf(np.arange(3), k - 1, 1 / n)
    ref = 1 - float(np.dot(p, [0.95, 0.9, 0.7]))
    assert sa_plr_finite(cfg, k, n) == pytest.approx(ref, rel=1e-13)
    # large frame converges to the Poisson form
    big = sa_plr_finite(cfg, 600_000, 1_000_000)
    assert big == pytest.approx(sa_plr_asymptotic(cfg, 0.6), rel=1e-4)


def test_sa_config_validation():
    with pytest.raises(ValidationError):
        SaConfig(2, (0.1,))
    with pytest.raises(ValidationError, match="nondecreasing"):
        SaConfig(2, (0.2, 0.1))
