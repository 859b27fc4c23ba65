"""Command-line front end: ``irsagmac run|validate <config>``.

Every run writes its CSV tables plus ``manifest.json`` (inputs, seed,
library versions, wall time, outputs) under ``--output-dir/<output>``.
Failures print one JSON line ``{"error": category, "message": ...}`` to
stderr and exit with the category's code.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__, csvio
from .config import Command, ExperimentConfig, load_config
from .density_evolution import DeParams, exit_chart, run_de
from .errors import ConfigParseError, Infeasible, IntegrationFailure, IrsaError, ValidationError
from .montecarlo import RNG_ALGORITHM, BernoulliLoad, FixedKa, SimConfig, estimate_plr, write_sweep
from .phy import db_to_lin, energy_estimator_failure, pilot_estimator_failure
from .threshold import BoundaryQuery, ThresholdQuery, g0_onset, threshold_gmac, write_boundary_sweep
from .tradeoff import ReferenceCurve, ScenarioSpec, gap_to_reference, sweep_ka, sweep_spectrum, write_tradeoff

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CODES = {
    ConfigParseError: 2,
    ValidationError: 3,
    Infeasible: 4,
    IntegrationFailure: 5,
}


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return EXIT_OTHER


def _g_tag(g: float) -> str:
    return format(g, "g").replace(".", "p")


# ---------------------------------------------------------------- commands


def _run_de(cfg: ExperimentConfig, out: Path, threads: int) -> list[Path]:
    job = cfg.job
    files = []
    for prof in job.protocol.profiles:
        rows = []
        for g in job.g:
            params = DeParams(job.protocol.dist, prof, g, job.sic_efficiency, job.max_iters, job.fp_tolerance)
            st = run_de(params)
            rows.append((g, st.p_infinity, st.plr(job.protocol.dist), st.iterations, st.converged_reason.value))
            if job.trajectories:
                files.append(st.to_csv(out / f"de_traj_T{prof.t_mpr}_g{_g_tag(g)}.csv"))
        files.append(csvio.write_csv(out / f"de_T{prof.t_mpr}.csv",
                                     ["g", "p_inf", "plr", "iterations", "reason"], rows))
    return files


def _run_exit(cfg, out, threads):
    job = cfg.job
    files = []
    for prof in job.protocol.profiles:
        for g in job.g:
            ch = exit_chart(DeParams(job.protocol.dist, prof, g), job.samples)
            fb_path = out / f"exit_fb_T{prof.t_mpr}_g{_g_tag(g)}.csv"
            fs_path = out / f"exit_fs_T{prof.t_mpr}_g{_g_tag(g)}.csv"
            ch.to_csv(fb_path, fs_path)
            files += [fb_path, fs_path]
    return files


def _run_threshold(cfg, out, threads):
    job = cfg.job
    rows = []
    for prof in job.protocol.profiles:
        g_star = threshold_gmac(ThresholdQuery(job.protocol.dist, prof, job.e, job.g_lo, job.g_hi, job.g_tolerance))
        g0 = g0_onset(job.protocol.dist, prof, job.g_hi, job.e_probe, job.g_tolerance) if job.onset else math.nan
        rows.append((prof.t_mpr, prof.pe1, job.e, g_star, g0))
    return [csvio.write_csv(out / "threshold.csv", ["t_mpr", "pe1", "e", "g_star", "g0"], rows)]


def _run_boundary(cfg, out, threads):
    job = cfg.job
    files = []
    for prof in job.protocol.profiles:
        queries = [BoundaryQuery(eta, job.lambda1, prof, job.e) for eta in job.eta]
        path = out / f"boundary_T{prof.t_mpr}.csv"
        write_boundary_sweep(path, "eta", job.eta, queries)
        files.append(path)
    return files


def _run_montecarlo(cfg, out, threads):
    job = cfg.job
    dist = job.protocol.dist
    files = []
    for prof in job.protocol.profiles:
        results = []
        sim = None
        for g in job.g:
            if job.load == "fixed":
                mode = FixedKa(int(round(g * job.n_slots)))
            else:
                mode = BernoulliLoad(min(1.0, g * job.n_slots / job.k_users), job.k_users)
            sim = SimConfig(dist, prof, job.n_slots, mode, job.n_frames, cfg.seed, job.max_sic_iters, job.coupling)
            results.append((sim.mean_load, estimate_plr(sim, threads)))
        files.append(write_sweep(out / f"mc_T{prof.t_mpr}.csv", results, sim))
        if job.de_curve:
            rows = [(g, run_de(DeParams(dist, prof, g)).plr(dist)) for g, _ in results]
            files.append(csvio.write_csv(out / f"de_T{prof.t_mpr}.csv", ["g", "plr"], rows))
    return files


def _run_tradeoff(cfg, out, threads):
    job = cfg.job
    files = []
    summary = []
    any_feasible = False
    for prof in job.protocol.profiles:
        spec = ScenarioSpec(
            log2_m=job.log2_m, target_eps=job.eps, t_mpr=prof.t_mpr, phy_option=job.phy_option,
            dist=job.protocol.dist if job.mode == "achievable" else None,
            lambda1=job.lambda1 if job.mode == "boundary" else None,
            eta_max=job.eta_max,
            spectrum_efficiency=job.s_grid[0] if job.s_grid else None,
            k_a=job.ka_grid[0] if job.ka_grid else None,
            frame_n=job.frame_n if job.ka_grid else None,
            redundancy_r=job.redundancy_r, n_grid=job.n_grid, e_grid=job.e_grid,
            rate_multiplier=job.rate_multiplier, simplified_e0=job.simplified_e0, ebno_bracket=job.ebno_bracket,
        )
        if job.s_grid:
            pts = sweep_spectrum(spec, job.s_grid, job.mode)
        else:
            pts = sweep_ka(spec, job.ka_grid, job.frame_n, job.mode)
        any_feasible |= any(p.feasible for p in pts)
        name = f"tradeoff_{job.mode}_{job.phy_option.value}_T{prof.t_mpr}.csv"
        files.append(write_tradeoff(out / name, pts))
        entry = {"file": name, "mode": job.mode, "phy_option": job.phy_option.value, "t_mpr": prof.t_mpr}
        if job.reference:
            ref = ReferenceCurve.from_csv(cfg.base_dir / job.reference)
            entry["gap_to_reference_db"] = gap_to_reference(pts, ref)
        summary.append(entry)
    path = out / "curves.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    files.append(path)
    if not any_feasible:
        exc = Infeasible("no grid point admits a feasible (n, e); tables hold only infeasible rows")
        exc.files = files
        raise exc
    return files


def _run_estimators(cfg, out, threads):
    job = cfg.job
    snr = db_to_lin(job.snr_db)
    rows = [("energy", t, energy_estimator_failure(t, snr, job.n)) for t in job.t]
    rows += [("pilot", p, pilot_estimator_failure(p, snr)) for p in job.n_pilots]
    return [csvio.write_csv(out / "estimators.csv", ["estimator", "param", "failure"], rows,
                            [f"n={job.n}", f"snr_db={job.snr_db!r}"])]


RUNNERS = {
    Command.DE: _run_de,
    Command.EXIT_CHART: _run_exit,
    Command.THRESHOLD: _run_threshold,
    Command.BOUNDARY: _run_boundary,
    Command.MONTE_CARLO: _run_montecarlo,
    Command.TRADEOFF: _run_tradeoff,
    Command.ESTIMATORS: _run_estimators,
}


# ---------------------------------------------------------------- entry points


def versions() -> dict:
    return {
        "irsagmac": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def run(config_path, output_dir="out", threads=1, seed=None) -> list[Path]:
    cfg = load_config(config_path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    out = Path(output_dir) / cfg.output
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    status, failure = "ok", None
    try:
        files = RUNNERS[cfg.command](cfg, out, max(1, int(threads)))
    except Infeasible as exc:
        # artifacts are still written; the manifest records the failed status
        files, status, failure = getattr(exc, "files", []), "infeasible", exc
    manifest = {
        "status": status,
        "command": cfg.command.value,
        "config": str(config_path),
        "config_sha256": cfg.digest,
        "seed": cfg.seed,
        "threads": threads,
        "rng": RNG_ALGORITHM,
        "versions": versions(),
        "started_utc": started,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": [str(Path(f).relative_to(out)) for f in files],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if failure is not None:
        raise failure
    return files


def validate(config_path) -> str:
    cfg = load_config(config_path)
    return f"ok: {cfg.command.value} ({config_path})"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="irsagmac", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="action", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default="out")
    p_run.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    p_run.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
    p_val = sub.add_parser("validate", help="check a config without computing")
    p_val.add_argument("config")
    args = ap.parse_args(argv)
    try:
        if args.action == "validate":
            print(validate(args.config))
        else:
            files = run(args.config, args.output_dir, args.threads, args.seed)
            print(f"ok: wrote {len(files)} file(s) under {Path(args.output_dir)}")
        return EXIT_OK
    except IrsaError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
