import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsagmac.density_evolution import (
    Convergence,
    DeParams,
    ErrorProfile,
    StabilityCondition,
    asymptotic_plr,
    error_floor,
    exit_chart,
    exit_crossings,
    fb,
    fs_collision,
    fs_derivative,
    fs_gmac,
    run_de,
    stability_check,
)
from irsagmac.errors import ValidationError
from irsagmac.protocol import IrsaDistribution

from conftest import EXAMPLE1


def fs_oracle(q, g, dbar, pe, gamma=1.0):
    """Slot update evaluated term by term in 40-digit arithmetic."""
    mp.mp.dps = 40
    q, g, dbar, gamma = map(mp.mpf, (q, g, dbar, gamma))
    x = g * dbar * q
    s = mp.fsum((1 - mp.mpf(p)) * x ** (t - 1) / mp.factorial(t - 1) for t, p in enumerate(pe, start=1))
    return float(1 - mp.exp(-g * dbar * (1 - gamma + gamma * q)) * s)


profiles = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).map(lambda v: tuple(sorted(v)))


@given(st.floats(0.0, 1.0), st.floats(0.01, 5.0), profiles, st.floats(0.05, 1.0))
@settings(max_examples=150, deadline=None)
def test_fs_matches_high_precision_oracle(q, g, pe, gamma):
    params = DeParams(EXAMPLE1, ErrorProfile(pe), g, gamma)
    ref = fs_oracle(q, g, params.mean_degree, pe, gamma)
    assert fs_gmac(q, params) == pytest.approx(ref, abs=1e-13)


@pytest.mark.parametrize("t", [1, 2, 4])
def test_fs_reduces_to_collision_channel(t):
    for g in (0.3, 1.0, 2.5):
        params = DeParams(EXAMPLE1, ErrorProfile.zeros(t), g)
        for q in np.linspace(0, 1, 101):
            assert abs(fs_gmac(q, params) - fs_collision(q, g, params.mean_degree, t)) <= 1e-14


@given(profiles, st.floats(0.01, 4.0))
@settings(max_examples=80, deadline=None)
def test_fs_nondecreasing_in_q(pe, g):
    # perfect SIC: the derivative is a Poisson mix of P_E|t+1 - P_E|t >= 0
    params = DeParams(EXAMPLE1, ErrorProfile(pe), g)
    vals = [fs_gmac(q, params) for q in np.linspace(0, 1, 201)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert fs_gmac(0.0, params) >= 0.0 and vals[-1] <= 1.0


@given(profiles, st.floats(0.01, 4.0), st.floats(0.01, 0.99))
@settings(max_examples=80, deadline=None)
def test_fs_derivative_central_difference(pe, g, q):
    params = DeParams(EXAMPLE1, ErrorProfile(pe), g)
    h = 1e-6
    fd = (fs_gmac(q + h, params) - fs_gmac(q - h, params)) / (2 * h)
    assert abs(fs_derivative(q, params) - fd) <= 1e-6


def test_fs_not_monotone_with_imperfect_sic():
    # residual interference makes the slot map dip near q = 0
    params = DeParams(EXAMPLE1, ErrorProfile((0.5, 0.5)), 1.0, 0.5)
    assert fs_gmac(0.01, params) < fs_gmac(0.0, params)


def test_fs_derivative_rejects_imperfect_sic():
    with pytest.raises(ValidationError):
        fs_derivative(0.5, DeParams(EXAMPLE1, ErrorProfile.zeros(2), 1.0, 0.9))


def test_fb_endpoints():
    d = IrsaDistribution.parse("1:0.2, 3:0.8")
    assert fb(1.0, d) == pytest.approx(1.0)
    # f_b(0) = Lambda_1 / dbar = eta Lambda_1
    assert fb(0.0, d) == pytest.approx(d.efficiency * 0.2)


def test_error_floor_example1():
    assert asymptotic_plr(0.2, EXAMPLE1) == pytest.approx(0.5102 * 0.04 + 0.4898 * 0.0016, rel=1e-14)
    assert error_floor(EXAMPLE1, ErrorProfile.uniform(2, 0.2)) == pytest.approx(0.0212, abs=5e-4)


def test_run_de_trajectory_is_monotone_and_converges():
    st_ = run_de(DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.2), 1.0))
    ps = [p for p, _ in st_.trajectory]
    assert all(b <= a for a, b in zip(ps, ps[1:]))
    assert st_.converged_reason is Convergence.FIXED_POINT
    # fixed point of the composed map
    params = DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.2), 1.0)
    assert fs_gmac(fb(st_.p_infinity, EXAMPLE1), params) == pytest.approx(st_.p_infinity, abs=1e-10)
    assert st_.p_infinity >= 0.2


def test_run_de_max_iters():
    st_ = run_de(DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.2), 1.47, max_iters=3))
    assert st_.converged_reason is Convergence.MAX_ITERS and st_.iterations == 3


def test_run_de_above_threshold_stalls_high():
    st_ = run_de(DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.2), 1.6))
    assert st_.p_infinity > 0.5


def test_de_state_csv(tmp_path):
    st_ = run_de(DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.2), 0.5))
    path = st_.to_csv(tmp_path / "traj.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,p,q" and len(lines) == len(st_.trajectory) + 1


def test_params_validation():
    with pytest.raises(ValidationError):
        DeParams(EXAMPLE1, ErrorProfile.zeros(2), 0.0)
    with pytest.raises(ValidationError):
        DeParams(EXAMPLE1, ErrorProfile.zeros(2), 1.0, sic_efficiency=0.0)
    with pytest.raises(ValidationError, match="nondecreasing"):
        ErrorProfile((0.2, 0.1))


def test_exit_chart_and_crossings(tmp_path):
    params = DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.2), 1.6)
    ch = exit_chart(params, 11)
    assert ch.p[0] == 0 and ch.p[-1] == 1 and len(ch.fs) == 11
    ch.to_csv(tmp_path / "fb.csv", tmp_path / "fs.csv")
    assert (tmp_path / "fs.csv").read_text().startswith("q,p\n")
    cr = exit_crossings(params)
    # above the threshold a stable fixed point sits far from P_E|1
    assert any(c.stable and c.p > 0.5 for c in cr)
    assert all(isinstance(c.stable, bool) for c in cr)
    below = exit_crossings(params.with_load(1.0))
    assert len(below) == 1 and below[0].stable and below[0].p < 0.25


def test_stability_conditions():
    pe = ErrorProfile((0.01, 0.011))
    assert stability_check(IrsaDistribution.parse("3:1"), pe, 1.0).condition is StabilityCondition.CONDITION_A
    v = stability_check(EXAMPLE1, pe, 1.0)
    assert v.condition is StabilityCondition.CONDITION_B
    assert v.ratio == pytest.approx(0.001 * 2 * 0.5102)
    assert stability_check(EXAMPLE1, ErrorProfile((0.01, 0.3)), 1.0).condition is StabilityCondition.NEITHER
    assert stability_check(EXAMPLE1, ErrorProfile((0.01,)), 1.0).condition is StabilityCondition.NEITHER


def test_imperfect_sic_raises_loss():
    base = run_de(DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.05), 0.8)).p_infinity
    worse = run_de(DeParams(EXAMPLE1, ErrorProfile.uniform(2, 0.05), 0.8, 0.95)).p_infinity
    assert worse > base
