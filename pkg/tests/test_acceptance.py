"""Acceptance criteria 1-10; each test records PASS/FAIL in ``conftest.ACCEPTANCE``.

Criteria with a sub-case the model cannot meet keep that sub-case in a
separate strict xfail, and the criterion is reported as FAIL.
"""
import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import poisson

from irsagmac import cli
from irsagmac.density_evolution import DeParams, ErrorProfile, asymptotic_plr, fs_collision, fs_derivative, fs_gmac, run_de
from irsagmac.errors import BracketInvalid
from irsagmac.montecarlo import FixedKa, SimConfig, estimate_plr
from irsagmac.phy import (
    energy_estimator_failure,
    mod2_information_density,
    mod2_sigma,
    mod2_stats,
    pilot_estimator_failure,
    wrapped_density,
)
from irsagmac.protocol import IrsaDistribution, SaConfig, sa_plr_finite
from irsagmac.threshold import (
    BoundaryQuery,
    ThresholdQuery,
    boundary_collision,
    boundary_gmac,
    g0_onset,
    open_tunnel_check,
    threshold_gmac,
)
from irsagmac.tradeoff import ScenarioSpec, boundary_ebno

from conftest import ACCEPTANCE, EXAMPLE1

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
G_TOL = 1e-6


def record(k, ok, detail):
    prev = ACCEPTANCE.get(k)
    if prev is not None:
        ok, detail = ok and prev[0], prev[1] + "; " + detail
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def test_criterion_1_error_floor():
    t0 = time.perf_counter()
    floor = asymptotic_plr(0.2, EXAMPLE1)
    plr = {t: run_de(DeParams(EXAMPLE1, ErrorProfile.uniform(t, 0.2), 0.5)).plr(EXAMPLE1) for t in (2, 3, 4)}
    dt = time.perf_counter() - t0
    ok = abs(floor - 0.0212) <= 5e-4 and all(abs(v / 0.0212 - 1) <= 0.1 for v in plr.values()) and dt < 1
    record(1, ok, f"floor={floor:.5f} de={ {t: round(v, 5) for t, v in plr.items()} } {dt:.2f}s")
    assert ok


def test_criterion_2_threshold():
    t0 = time.perf_counter()
    pe = ErrorProfile.uniform(2, 0.2)
    g0 = g0_onset(EXAMPLE1, pe, g_hi=10.0)
    gs = threshold_gmac(ThresholdQuery(EXAMPLE1, pe, 0.5))
    dt = time.perf_counter() - t0
    ok = 1.44 <= g0 <= 1.52 and 1.44 <= gs <= 1.52 and dt < 10
    record(2, ok, f"g0={g0:.4f} g*={gs:.4f} {dt:.2f}s")
    assert ok


def test_criterion_3_degree_one():
    d = IrsaDistribution.parse("1:0.1382, 2:0.8618")
    pe = ErrorProfile.uniform(2, 0.2)
    g = [1e-4, 2e-4, 5e-4, 1e-3, 5e-3, 0.01, 0.05]
    plr = [run_de(DeParams(d, pe, x)).plr(d) for x in g]
    ok = abs(d.efficiency - 0.5371) <= 1e-4 and abs(plr[0] - 0.0621) <= 1e-3
    ok = ok and all(b > a for a, b in zip(plr, plr[1:]))
    record(3, ok, f"eta={d.efficiency:.5f} plr(1e-4)={plr[0]:.5f} increasing={all(b > a for a, b in zip(plr, plr[1:]))}")
    assert ok


def _fs_poisson(q, g, dbar, probs):
    # perfect-SIC slot update written with the Poisson pmf of the residual count
    x = g * dbar * q
    return 1.0 - sum((1.0 - p) * poisson.pmf(t - 1, x) for t, p in enumerate(probs, start=1))


@pytest.mark.filterwarnings("ignore::irsagmac.threshold.ApproximateBoundaryWarning")
def test_criterion_4_reductions():
    qs = np.linspace(0.0, 1.0, 101)
    worst_a = worst_b = worst_c = 0.0
    for t in (1, 2, 4):
        for g in (0.3, 1.0, 2.5):
            params = DeParams(EXAMPLE1, ErrorProfile.zeros(t), g)
            worst_a = max(worst_a, max(abs(fs_gmac(q, params) - fs_collision(q, g, params.mean_degree, t)) for q in qs))
            pe = ErrorProfile(tuple(np.linspace(0.05, 0.3, t)))
            p2 = DeParams(EXAMPLE1, pe, g, sic_efficiency=1.0)
            worst_c = max(worst_c, max(abs(fs_gmac(q, p2) - _fs_poisson(q, g, p2.mean_degree, pe.probs)) for q in qs))
        for eta in (0.2, 1 / 3, 0.5):
            r = boundary_gmac(BoundaryQuery(eta, 0.0, ErrorProfile.zeros(t), 0.0))
            worst_b = max(worst_b, abs(r.g_cb - boundary_collision(eta, t)))
    ok = worst_a <= 1e-14 and worst_b <= 1e-10 and worst_c <= 1e-14
    record(4, ok, f"(a) {worst_a:.1e} (b) {worst_b:.1e} (c) {worst_c:.1e}")
    assert ok


def test_criterion_5_estimators():
    t0 = time.perf_counter()
    e = {t: energy_estimator_failure(t, 5.0, 200) for t in (1, 2, 3)}
    p = {n: pilot_estimator_failure(n, 5.0) for n in (1, 6)}
    dt = time.perf_counter() - t0
    ok = (e[1] < 1e-4 and abs(e[2] - 0.023) <= 2e-3 and abs(e[3] - 0.117) <= 5e-3
          and abs(p[1] - 0.2636) <= 5e-3 and p[6] < 0.01 and dt < 1)
    record(5, ok, f"energy t=1,2,3: {e[1]:.2e} {e[2]:.4f} {e[3]:.4f}; pilot 1,6: {p[1]:.4f} {p[6]:.2e}; {dt:.3f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="twelve pilots give 1.075e-4 under the exact sign-error model; the stated bound rounds")
def test_criterion_5_pilot_twelve():
    v = pilot_estimator_failure(12, 5.0)
    record(5, v < 1e-4, f"pilot n_p=12: {v:.4e} (needs < 1e-4)")
    assert v < 1e-4


MC_FRAMES = 20_000
_mc_cache = {}


def _mc_vs_de(g):
    if g not in _mc_cache:
        pe = ErrorProfile.uniform(2, 0.2)
        cfg = SimConfig(EXAMPLE1, pe, 400, FixedKa(int(round(g * 400))), MC_FRAMES, rng_seed=2024)
        res = estimate_plr(cfg)
        de = run_de(DeParams(EXAMPLE1, pe, g)).plr(EXAMPLE1)
        diff = abs(res.plr_mean - de)
        ok = diff <= res.plr_ci95_halfwidth or (de < 0.05 and diff <= 0.15 * de)
        _mc_cache[g] = (ok, f"G={g}: mc={res.plr_mean:.5f}+-{res.plr_ci95_halfwidth:.5f} de={de:.5f}")
    return _mc_cache[g]


def test_criterion_6_monte_carlo_vs_de():
    t0 = time.perf_counter()
    rows = [_mc_vs_de(g) for g in (0.8, 1.2)]
    dt = time.perf_counter() - t0
    ok = all(r[0] for r in rows) and dt < 300
    record(6, ok, "; ".join(r[1] for r in rows) + f" ({dt:.1f}s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="at G=1.4 a 400-slot frame is past its finite-length waterfall; DE describes N_s -> inf")
def test_criterion_6_near_threshold():
    ok, detail = _mc_vs_de(1.4)
    record(6, ok, detail)
    assert ok


def test_criterion_7_converse_ordering():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    checked, bad = 0, []
    while checked < 50:
        dmax = int(rng.integers(2, 9))
        raw = rng.random(dmax) * (rng.random(dmax) < 0.7)
        raw[0] *= 0.3
        if raw.sum() == 0:
            continue
        d = IrsaDistribution(tuple(raw / raw.sum()))
        t = int(rng.integers(1, 5))
        pe = ErrorProfile(tuple(np.sort(rng.uniform(0, 0.15, t))))
        e = float(rng.uniform(0.05, 1.5))
        if d.lambda1 > 0.5:
            continue
        q = BoundaryQuery(d.efficiency, d.lambda1, pe, e)
        if q.target >= 0.5 or q.eta > q.eta_cap:
            continue
        try:
            g = threshold_gmac(ThresholdQuery(d, pe, e, g_hi=20.0, g_tolerance=G_TOL))
        except BracketInvalid:
            continue
        g_cb = boundary_gmac(q).g_cb
        if not (g <= g_cb + G_TOL and open_tunnel_check(d, pe, 0.95 * g, e)
                and not open_tunnel_check(d, pe, 1.01 * g_cb, e)):
            bad.append((d.probs, t, pe.probs, e, g, g_cb))
        checked += 1
    dt = time.perf_counter() - t0
    ok = not bad and dt < 300
    record(7, ok, f"{checked} tuples, {len(bad)} violations, {dt:.1f}s")
    assert ok, bad[:3]


def test_criterion_8_boundary_ebno():
    t0 = time.perf_counter()
    vals = [boundary_ebno(ScenarioSpec(log2_m=100, target_eps=0.005, t_mpr=t, lambda1=0.0,
                                       spectrum_efficiency=1.0)).ebno_db for t in (2, 3, 4)]
    dt = time.perf_counter() - t0
    ok = all(6.5 <= v <= 8.5 for v in vals) and vals[0] > vals[1] > vals[2] and dt < 600
    record(8, ok, f"T=2,3,4: {', '.join(f'{v:.3f}' for v in vals)} dB ({dt:.1f}s)")
    assert ok


def test_criterion_9_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    checks = {}
    mono = deriv = True
    for _ in range(40):
        t = int(rng.integers(1, 5))
        pe = ErrorProfile(tuple(np.sort(rng.uniform(0, 0.4, t))))
        params = DeParams(EXAMPLE1, pe, float(rng.uniform(0.05, 3.0)))
        f = [fs_gmac(q, params) for q in np.linspace(0, 1, 201)]
        mono &= all(b >= a - 1e-15 for a, b in zip(f, f[1:]))
        for q in rng.uniform(0.01, 0.99, 5):
            h = 1e-5
            fd = (fs_gmac(q + h, params) - fs_gmac(q - h, params)) / (2 * h)
            deriv &= abs(fs_derivative(q, params) - fd) <= 1e-6
    checks["fs monotone"] = mono
    checks["fs derivative"] = deriv
    xs = np.linspace(-1, 1, 20001)
    norms = [abs(np.trapezoid(wrapped_density(xs, mod2_sigma(s)), xs) - 1.0) for s in (0.05, 1.0, 4.0, 16.0)]
    checks["wrapped density"] = max(norms) <= 1e-10
    mod2_ok = True
    for snr in (1.0, 4.0, 16.0):
        st = mod2_stats(snr)
        sigma = mod2_sigma(snr)
        z = (np.random.default_rng(int(snr)).normal(0.0, sigma, 400_000) + 1.0) % 2.0 - 1.0
        i = mod2_information_density(z, sigma)
        mod2_ok &= 0.0 <= st.capacity <= 1.0 and abs(i.mean() - st.capacity) <= 3 * i.std(ddof=1) / math.sqrt(i.size)
    checks["mod2 stats"] = mod2_ok
    sa = IrsaDistribution((1.0,))
    res = estimate_plr(SimConfig(sa, ErrorProfile((0.05, 0.1)), 100, FixedKa(80), 20_000, rng_seed=3))
    checks["SA finite"] = abs(res.plr_mean - sa_plr_finite(SaConfig(2, (0.05, 0.1)), 80, 100)) <= res.plr_ci95_halfwidth
    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 300
    record(9, ok, ", ".join(f"{k}={'ok' if v else 'no'}" for k, v in checks.items()) + f" ({dt:.1f}s)")
    assert ok


def test_criterion_10_determinism(tmp_path):
    cfg = CONFIGS / "fig3_mc.cfg"
    a = cli.run(cfg, tmp_path / "a")
    b = cli.run(cfg, tmp_path / "b")
    csvs = sorted(Path(p).name for p in a if str(p).endswith(".csv"))
    root_a, root_b = Path(a[0]).parent, Path(b[0]).parent
    match, mismatch, errors = filecmp.cmpfiles(root_a, root_b, csvs, shallow=False)
    ok = bool(csvs) and not mismatch and not errors
    record(10, ok, f"{len(match)}/{len(csvs)} CSV files byte-identical")
    assert ok
