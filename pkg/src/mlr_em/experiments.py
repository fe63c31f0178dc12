"""Experiment drivers behind the CLI commands.

Each driver returns plain Python/NumPy results and, given an output
directory, writes CSV files plus a ``*.meta.json`` sidecar. Trials run on a
thread pool and are collected in trial order, so outputs do not depend on
scheduling.
"""
import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datagen import GenSpec, derive_seed, generate, sample_initial_with_angle, sample_unit_sphere, trial_rng
from .diagnostics import convergence_exponent, cycloid_residual
from .finite import EmConfig, run_pipeline
from .model import GroundTruth, mixing_from_probability
from .population import cycloid_point, recurrence_tan

__all__ = [
    "TrialSetup",
    "convergence",
    "mixing",
    "setup_trial",
    "statistical_error",
    "trajectory",
    "weights_compare",
]


def pmap(fn, items, workers=1):
    """Order-preserving map, threaded when ``workers > 1``."""
    items = list(items)
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_meta(path, meta):
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


@dataclass(frozen=True)
class TrialSetup:
    truth: GroundTruth
    dataset: object
    theta0: np.ndarray
    pi0: object
    config: EmConfig


def setup_trial(seed, k, d, snr, p1, n, iterations, varphi0=None, exact_noiseless=False,
                pi0=0.5, t_easy=0):
    """Ground truth, data and initial point for trial ``k``.

    With ``varphi0`` set, θ* is uniform on the sphere and θ⁰ sits at angle
    φ⁰. Without it, θ⁰ follows the planar-trajectory protocol: for d = 2,
    θ* = e₁ and θ⁰ ~ U[−2, 2]²; for d = 3 both are uniform on the sphere;
    otherwise θ* is on the sphere and θ⁰ ~ N(0, I). ``pi0=None`` draws
    π⁰(1) ~ U[0, 1].
    """
    if varphi0 is not None:
        ts = sample_unit_sphere(d, trial_rng(seed, k, 0))
        th0 = sample_initial_with_angle(ts, varphi0, trial_rng(seed, k, 1))
    elif d == 2:
        ts = np.array([1.0, 0.0])
        th0 = trial_rng(seed, k, 1).uniform(-2.0, 2.0, size=2)
    elif d == 3:
        ts = sample_unit_sphere(3, trial_rng(seed, k, 0))
        th0 = sample_unit_sphere(3, trial_rng(seed, k, 1))
    else:
        ts = sample_unit_sphere(d, trial_rng(seed, k, 0))
        th0 = trial_rng(seed, k, 1).standard_normal(d)
    snr_eff = math.inf if exact_noiseless else snr
    truth = GroundTruth.from_snr(ts, mixing_from_probability(p1), snr_eff)
    data = generate(GenSpec(n, d, truth, derive_seed(seed, k, 2)))
    p0 = float(trial_rng(seed, k, 3).uniform()) if pi0 is None else pi0
    mode = "exact_noiseless" if exact_noiseless else "finite_sigma"
    cfg = EmConfig(t_easy=t_easy, t_standard=iterations, sigma_mode=mode)
    return TrialSetup(truth, data, th0, mixing_from_probability(p0), cfg)


def _run(setup):
    return run_pipeline(setup.dataset, setup.theta0, setup.pi0, setup.config, truth=setup.truth)


def _padded(values, length):
    """Repeat the last value of a run that stopped at a fixed point."""
    v = np.asarray(values, dtype=float)
    if v.size >= length:
        return v[:length]
    return np.concatenate([v, np.full(length - v.size, v[-1])])


# -- planar trajectory ---------------------------------------------------------

def trajectory(cfg, exact_noiseless=False, workers=1, out_dir=None):
    """Finite-sample EM trajectories in the (ê₁, ê₂⁰) plane and their cycloid residuals."""

    def one(k):
        s = setup_trial(cfg.seed, k, cfg.d, cfg.snr, cfg.pi_star, cfg.n, cfg.iterations,
                        exact_noiseless=exact_noiseless, pi0=None)
        run = _run(s)
        ts = s.truth.theta_star
        e1 = ts / np.linalg.norm(ts)
        u0 = s.theta0 / np.linalg.norm(s.theta0)
        e2 = u0 - (u0 @ e1) * e1
        e2 = e2 / np.linalg.norm(e2)
        pts = []
        for t, th in enumerate(run.thetas):
            v = th / np.linalg.norm(ts)
            x, y = float(v @ e1), float(v @ e2)
            pts.append((k, t, x, y, float(np.linalg.norm(v - x * e1 - y * e2))))
        res = cycloid_residual(run, s.theta0, ts)
        summary = (k, run.angles[0].rho, res.in_plane, res.out_of_plane,
                   float(run.theta_rel_err[-1]), float(run.pi_l1_err[-1]), run.terminated_at)
        return pts, summary

    results = pmap(one, range(cfg.trials), workers)
    points = [p for r in results for p in r[0]]
    summary = [r[1] for r in results]
    curve = []
    for i in range(500):
        phi = math.pi * i / 499
        x, y = cycloid_point(phi, 1.0)
        curve.append((phi, x, y))
    med = float(np.median([s[2] for s in summary]))
    if out_dir is not None:
        write_csv(os.path.join(out_dir, "trajectory_points.csv"),
                  ("trial", "t", "x", "y", "out_of_plane"), points)
        write_csv(os.path.join(out_dir, "cycloid_curve.csv"), ("phi", "x", "y"), curve)
        write_csv(os.path.join(out_dir, "trajectory_summary.csv"),
                  ("trial", "rho0", "cycloid_residual", "out_of_plane", "final_theta_rel_err",
                   "final_pi_l1_err", "iterations"), summary)
        write_meta(os.path.join(out_dir, "trajectory.meta.json"),
                   {"command": "trajectory", **vars(cfg), "exact_noiseless": exact_noiseless,
                    "median_cycloid_residual": med,
                    "cycloid_curve_sign": "+1 (mirror x for runs with rho0 < 0)"})
    return {"points": points, "summary": summary, "curve": curve, "median_residual": med}


# -- quadratic convergence of the angle ----------------------------------------

def _s_of_tan(tan_v):
    return (math.pi / 2) * (np.asarray(tan_v) - math.pi / 4)


def convergence(cfg, exact_noiseless=False, workers=1, out_dir=None):
    """Mean of (π/2)(tan φ^t − π/4) over trials per SNR and its log-log slope."""
    results = {}
    if cfg.population_mode:
        tans = [math.tan(cfg.varphi0)]
        for _ in range(cfg.iterations):
            tans.append(recurrence_tan(tans[-1], math.atan(tans[-1])))
        s = _s_of_tan(tans)
        results["population"] = (np.array(tans), s, *convergence_exponent(s))
    else:
        for snr in cfg.snr_list:
            def one(k, snr=snr):
                st = setup_trial(cfg.seed, k, cfg.d, snr, cfg.pi_star, cfg.n, cfg.iterations,
                                 varphi0=cfg.varphi0, exact_noiseless=exact_noiseless)
                return _padded(_run(st).tan_varphi, cfg.iterations + 1)

            tans = np.mean(pmap(one, range(cfg.trials), workers), axis=0)
            s = _s_of_tan(tans)
            results[snr] = (tans, s, *convergence_exponent(s))
    if out_dir is not None:
        rows = []
        fits = []
        for key, (tans, s, slope, icpt) in results.items():
            for t in range(len(s)):
                rows.append((key, t, tans[t], s[t], math.log(s[t])))
            fits.append((key, slope, icpt))
        write_csv(os.path.join(out_dir, "convergence.csv"),
                  ("snr", "t", "mean_tan_varphi", "s", "log_s"), rows)
        write_csv(os.path.join(out_dir, "convergence_fit.csv"), ("snr", "slope", "intercept"), fits)
        write_meta(os.path.join(out_dir, "convergence.meta.json"),
                   {"command": "convergence", **vars(cfg), "exact_noiseless": exact_noiseless})
    return results


# -- mixing-weight error against the angle -------------------------------------

def mixing(cfg, exact_noiseless=False, workers=1, out_dir=None):
    """Pairs (‖π^t − π̄*‖₁, π/2 − φ^{t−1}) with their correlation and fitted line."""
    ref = (2.0 / math.pi) * abs(2.0 * cfg.pi_star - 1.0)
    results = {}
    for snr in cfg.snr_list:
        def one(k, snr=snr):
            st = setup_trial(cfg.seed, k, cfg.d, snr, cfg.pi_star, cfg.n, cfg.iterations,
                             varphi0=cfg.varphi0, exact_noiseless=exact_noiseless)
            run = _run(st)
            gaps = math.pi / 2 - run.varphi
            return [(k, t, float(run.pi_l1_err[t]), float(gaps[t - 1]))
                    for t in range(1, len(run.thetas))]

        pairs = [p for rows in pmap(one, range(cfg.trials), workers) for p in rows]
        err = np.array([p[2] for p in pairs])
        gap = np.array([p[3] for p in pairs])
        slope, icpt = np.polyfit(gap, err, 1)
        corr = float(np.corrcoef(gap, err)[0, 1])
        results[snr] = {"pairs": pairs, "slope": float(slope), "intercept": float(icpt),
                        "pearson": corr, "reference_slope": ref}
    if out_dir is not None:
        rows = [(snr, *p) for snr, r in results.items() for p in r["pairs"]]
        write_csv(os.path.join(out_dir, "mixing_pairs.csv"),
                  ("snr", "trial", "t", "pi_l1_err", "angle_gap"), rows)
        write_csv(os.path.join(out_dir, "mixing_fit.csv"),
                  ("snr", "slope", "intercept", "pearson", "reference_slope"),
                  [(snr, r["slope"], r["intercept"], r["pearson"], r["reference_slope"])
                   for snr, r in results.items()])
        write_meta(os.path.join(out_dir, "mixing.meta.json"),
                   {"command": "mixing", **vars(cfg), "exact_noiseless": exact_noiseless})
    return results


# -- error curves for several true mixing weights ------------------------------

def weights_compare(cfg, exact_noiseless=False, workers=1, out_dir=None):
    """θ- and π-error per iteration for each π*; trials share seeds across π*."""
    length = cfg.iterations + 1
    results = {}
    for p1 in cfg.pi_star_list:
        def one(k, p1=p1):
            st = setup_trial(cfg.seed, k, cfg.d, cfg.snr, p1, cfg.n, cfg.iterations,
                             varphi0=cfg.varphi0, exact_noiseless=exact_noiseless)
            run = _run(st)
            return _padded(run.theta_rel_err, length), _padded(run.pi_l1_err, length)

        runs = pmap(one, range(cfg.trials), workers)
        th = np.array([r[0] for r in runs])
        pe = np.array([r[1] for r in runs])
        results[p1] = {
            "mean_theta_err": th.mean(axis=0),
            "mean_pi_err": pe.mean(axis=0),
            "median_theta_err": np.median(th, axis=0),
            "median_pi_err": np.median(pe, axis=0),
        }
    if out_dir is not None:
        rows = []
        for p1, r in results.items():
            for t in range(length):
                rows.append((p1, t, r["mean_theta_err"][t], r["mean_pi_err"][t],
                             r["median_theta_err"][t], r["median_pi_err"][t]))
        write_csv(os.path.join(out_dir, "weights_compare.csv"),
                  ("pi_star", "t", "mean_theta_err", "mean_pi_err", "median_theta_err",
                   "median_pi_err"), rows)
        write_meta(os.path.join(out_dir, "weights_compare.meta.json"),
                   {"command": "weights-compare", **vars(cfg), "exact_noiseless": exact_noiseless})
    return results


# -- final error against sample size -------------------------------------------

def statistical_error(n_list, d=50, snr=1e8, varphi0=0.3, trials=50, seed=0, pi_star=0.7,
                      t_easy=None, t_standard=20, workers=1):
    """Median final relative θ error over trials for each n.

    Uses the staged schedule: ``t_easy`` easy-EM steps (default
    ⌈log₂(n/ln 20)⌉) then ``t_standard`` standard steps on the same data.
    """
    out = {}
    for n in n_list:
        def one(k, n=n):
            st = setup_trial(seed, k, d, snr, pi_star, n, t_standard, varphi0=varphi0)
            cfg = EmConfig(t_easy=t_easy, t_standard=t_standard)
            run = run_pipeline(st.dataset, st.theta0, st.pi0, cfg, truth=st.truth)
            return float(run.theta_rel_err[-1])

        out[n] = float(np.median(pmap(one, range(trials), workers)))
    return out

