"""Config-driven experiment runner.

Subcommands::

    gpcert run      --config cfg.json [--seed N] [--workers N] [--out DIR]
    gpcert validate --config cfg.json

Experiments: ``tracking`` (closed-loop certificate on the benchmark),
``density_sweep`` (bound decay against data density at fixed kappa),
``episodic`` (iterative data generation to a target bound),
``validate_bounds`` (Monte-Carlo coverage of the uniform error bound), and
``validate_lipschitz`` (coverage of the prior Lipschitz constant).

Exit codes: 0 success, 2 config error, 3 certificate violation, 4 numerical
failure.  Trajectories go to CSV, scalars to JSON; identical configs and
seeds reproduce artifacts byte for byte, and every summary embeds the fully
resolved config so a run can be reproduced from its own output.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import json
import math
import os
import sys

import numpy as np
import scipy.linalg

from . import bounds as bnd
from . import density as dens
from . import episodic as epi
from . import kernels as kern
from . import tracking as trk
from .errors import GPCertError
from .gp import TrainingSet, fit
from .kernels import KernelSpec
from .simulation import ReferenceSpec, benchmark_system, run_closed_loop
from .tracking import LinearPlant, closed_loop

EXPERIMENTS = ("tracking", "density_sweep", "episodic", "validate_bounds", "validate_lipschitz")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_NUMERICAL = 4


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "kernel": {"family": kern.SQUARED_EXPONENTIAL, "signal_variance": 1.0, "lengthscales": [1.0, 1.0]},
    "plant": {"A": [[0.0, 1.0], [0.0, 0.0]], "b": [0.0, 1.0]},
    "domain": {"dimension": 2, "edge": 10.0, "center": [0.0, 0.0]},
    "bound": {"tau": 0.01, "delta": 0.01, "L_f": 2.0, "delta_L": 0.01},
    "reference": {"amplitude": 2.0, "frequency": 1.0},
    "noise_variance": 0.01,
    "seeds": [0],
    "out_dir": "runs",
}


def load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _merged(config: dict) -> dict:
    cfg = copy.deepcopy(_DEFAULTS)
    for key, value in config.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = copy.deepcopy(value)
    return cfg


def validate(config: dict) -> list[str]:
    """Schema and cross-field checks; returns diagnostics (empty = valid)."""
    problems = []
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        problems.append(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
    cfg = _merged(config)
    kb = cfg["kernel"]
    if kb.get("family") not in (kern.SQUARED_EXPONENTIAL, kern.MATERN32, kern.MATERN52, kern.LINEAR):
        problems.append(f"kernel.family: unknown family {kb.get('family')!r}")
    if not (isinstance(kb.get("signal_variance"), (int, float)) and kb["signal_variance"] > 0):
        problems.append("kernel.signal_variance: must be a positive number")
    ls = kb.get("lengthscales", [])
    if not (isinstance(ls, list) and ls and all(isinstance(l, (int, float)) and l > 0 for l in ls)):
        problems.append("kernel.lengthscales: must be a nonempty list of positive numbers")
    bb = cfg["bound"]
    for name in ("delta", "delta_L"):
        v = bb.get(name)
        if v is not None and not (isinstance(v, (int, float)) and 0 < v < 1):
            problems.append(f"bound.{name}: must lie in (0, 1), got {v!r}")
    tau = bb.get("tau")
    if tau != "auto" and not (isinstance(tau, (int, float)) and tau > 0):
        problems.append(f"bound.tau: must be positive or 'auto', got {tau!r}")
    lf = bb.get("L_f")
    if lf == "probabilistic":
        if kb.get("family") == kern.MATERN32:
            problems.append("bound.L_f: probabilistic Lipschitz constants need fourth-order "
                            "smoothness; Matern 3/2 is not smooth enough")
    elif not (isinstance(lf, (int, float)) and lf >= 0):
        problems.append(f"bound.L_f: must be a nonnegative number or 'probabilistic', got {lf!r}")
    if not (isinstance(cfg["noise_variance"], (int, float)) and cfg["noise_variance"] > 0):
        problems.append("noise_variance: must be a positive number")
    seeds = cfg["seeds"]
    if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds)):
        problems.append("seeds: must be a nonempty list of integers")
    if exp == "tracking" and "gains" not in config:
        problems.append("tracking: missing 'gains' block (theta or theta1/theta2)")
    if exp == "density_sweep":
        sw = config.get("sweep", {})
        if not sw.get("pitches"):
            problems.append("density_sweep: missing sweep.pitches list")
    if exp == "episodic":
        ep = config.get("episodic", {})
        xi = ep.get("xi", 0.95)
        if not (isinstance(xi, (int, float)) and 0 < xi < 1):
            problems.append(f"episodic.xi: must lie in (0, 1), got {xi!r}")
        if not (isinstance(ep.get("target_error"), (int, float)) and ep.get("target_error", 0) > 0):
            problems.append("episodic.target_error: must be a positive number")
    return problems


def _kernel_from(cfg: dict) -> KernelSpec:
    kb = cfg["kernel"]
    return KernelSpec(kb["family"], kb["signal_variance"], tuple(kb["lengthscales"]))


def _plant_from(cfg: dict) -> LinearPlant:
    pb = cfg["plant"]
    return LinearPlant(np.asarray(pb["A"], dtype=float), np.asarray(pb["b"], dtype=float))


def _box_from(cfg: dict) -> bnd.DomainBox:
    db = cfg["domain"]
    return bnd.DomainBox(db["dimension"], db["edge"], np.asarray(db["center"], dtype=float))


def _reference_from(cfg: dict) -> ReferenceSpec:
    rb = cfg["reference"]
    return ReferenceSpec(rb["amplitude"], rb["frequency"])


def _theta_from(cfg: dict) -> np.ndarray:
    gb = cfg["gains"]
    if "theta" in gb:
        return np.asarray(gb["theta"], dtype=float)
    t1, t2 = float(gb["theta1"]), float(gb["theta2"])
    return np.array([t1 * t2, t2])


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _eta_half_grid(model, rep, ref: ReferenceSpec, horizon: float, dt: float):
    """sigma and eta along the reference on the half-step grid RK4 needs."""
    n = int(round(horizon / dt))
    t_half = np.arange(2 * n + 1) * (dt / 2.0)
    sigma = model.predict_stddev(ref.state(t_half))
    eta = math.sqrt(rep.beta) * sigma + rep.gamma
    return t_half, sigma, eta


def _lookup(values: np.ndarray, dt: float):
    def f(t: float) -> float:
        return float(values[int(round(2.0 * t / dt))])

    return f


# ---------------------------------------------------------------------------
# tracking experiment (closed-loop certificate)
# ---------------------------------------------------------------------------

def _resolve_bound_block(cfg: dict, model, box) -> tuple[bnd.BoundParams, dict]:
    bb = cfg["bound"]
    spec = model.kernel
    if bb["L_f"] == "probabilistic":
        L_f = bnd.probabilistic_lipschitz(spec, box, bb["delta_L"])
        source = "probabilistic"
    else:
        L_f = float(bb["L_f"])
        source = "given"
    if bb["tau"] == "auto":
        tau = bnd.auto_tau(model, bb["delta"], L_f, box).tau
    else:
        tau = float(bb["tau"])
    params = bnd.BoundParams(tau=tau, delta=bb["delta"], L_f=L_f, delta_L=bb.get("delta_L"), L_f_source=source)
    resolved = dict(bb)
    resolved["tau"] = tau
    resolved["L_f"] = L_f
    resolved["L_f_source"] = source
    return params, resolved


def _tracking_grid(cfg: dict) -> np.ndarray:
    gb = cfg.get("data_grid", {"x1": [0.0, 3.0, 5], "x2": [-4.0, 4.0, 5]})
    ax1 = np.linspace(gb["x1"][0], gb["x1"][1], int(gb["x1"][2]))
    ax2 = np.linspace(gb["x2"][0], gb["x2"][1], int(gb["x2"][2]))
    g1, g2 = np.meshgrid(ax1, ax2, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def _run_tracking_seed(cfg: dict, seed: int, out_dir: str) -> dict:
    spec = _kernel_from(cfg)
    plant = _plant_from(cfg)
    box = _box_from(cfg)
    ref = _reference_from(cfg)
    f, g, _ = benchmark_system()
    horizon = float(cfg.get("horizon", 30.0))
    dt = float(cfg.get("fine_dt", 3e-4))
    noise = float(cfg["noise_variance"])

    grid = _tracking_grid(cfg)
    rng = np.random.default_rng(seed)
    y = f(grid) + rng.normal(0.0, math.sqrt(noise), size=grid.shape[0])
    data = TrainingSet(grid, y, noise)
    model = fit(spec, data)

    params, resolved_bound = _resolve_bound_block(cfg, model, box)
    rep = bnd.bound_constants(model, params, box)
    loop = closed_loop(plant, _theta_from(cfg))
    L_sigma = rep.L_sigma if rep.L_sigma is not None else 0.0
    stable = trk.gain_condition(loop, L_sigma, rep.beta)

    t_half, sigma_half, eta_half = _eta_half_grid(model, rep, ref, horizon, dt)
    upsilon = trk.tracking_bound_ode(
        loop, _lookup(eta_half, dt), L_sigma, rep.beta, v0=0.0, horizon=horizon, dt=dt
    )
    sim = run_closed_loop(loop, model, ref, horizon, dt, seed, f, input_gain=g, noise_variance=noise)
    e = sim.error_norms
    certified = bool(np.all(e <= upsilon + 1e-12))

    # phase structure: the worst tracking error should fall in the same
    # half-period of the reference as the worst posterior uncertainty
    period = ref.period
    t_e = float(sim.times[int(np.argmax(e))]) % period
    t_sig = float(t_half[int(np.argmax(sigma_half[: int(round(2 * period / dt)) + 1]))]) % period
    same_half = (t_e < period / 2.0) == (t_sig < period / 2.0)

    eta_grid = eta_half[::2]
    sigma_grid = sigma_half[::2]
    _write_csv(
        os.path.join(out_dir, f"tracking_run_seed{seed}.csv"),
        ["t", "e_norm", "upsilon", "eta_ref", "sigma_ref"],
        zip(sim.times, e, upsilon, eta_grid, sigma_grid),
    )
    _write_csv(
        os.path.join(out_dir, f"sim_run_seed{seed}.csv"),
        ["t", "x_1", "x_2", "xref_1", "xref_2", "u", "e_norm"],
        zip(sim.times, sim.states[:, 0], sim.states[:, 1],
            sim.reference_states[:, 0], sim.reference_states[:, 1], sim.controls, e),
    )
    data.to_csv(os.path.join(out_dir, f"training_data_seed{seed}.csv"))
    return {
        "seed": seed,
        "certified": certified,
        "gain_condition": stable,
        "max_error": float(e.max()),
        "max_upsilon": float(upsilon.max()),
        "argmax_error_time": t_e,
        "argmax_sigma_time": t_sig,
        "error_peak_in_uncertain_half_period": bool(same_half),
        "bound": rep.to_json_dict(),
        "resolved_bound": resolved_bound,
        "zeta": loop.zeta,
        "lambda_max": loop.lambda_max,
        "L_sigma": L_sigma,
        "L_k": rep.L_k,
    }


def _tracking_worker(args):
    cfg, seed, out_dir = args
    return _run_tracking_seed(cfg, seed, out_dir)


def run_tracking(cfg: dict, out_dir: str, workers: int) -> int:
    seeds = cfg["seeds"]
    jobs = [(cfg, s, out_dir) for s in seeds]
    if workers > 1 and len(seeds) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_tracking_worker, jobs))
    else:
        results = [_tracking_worker(j) for j in jobs]
    results.sort(key=lambda r: r["seed"])
    ok = all(r["certified"] for r in results)
    summary = {
        "experiment": "tracking",
        "resolved_config": _resolved_config(cfg, results[0]["resolved_bound"]),
        "per_seed": results,
        "all_certified": ok,
        "phase_agreement_fraction": float(np.mean([r["error_peak_in_uncertain_half_period"] for r in results])),
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return EXIT_OK if ok else EXIT_CERTIFICATE


def _resolved_config(cfg: dict, resolved_bound: dict | None = None) -> dict:
    out = copy.deepcopy(cfg)
    if resolved_bound is not None:
        out["bound"] = resolved_bound
    return out


# ---------------------------------------------------------------------------
# density sweep (bound decay against data density, kappa fixed)
# ---------------------------------------------------------------------------

def run_density_sweep(cfg: dict, out_dir: str, workers: int) -> int:
    spec = _kernel_from(cfg)
    plant = _plant_from(cfg)
    box = _box_from(cfg)
    ref = _reference_from(cfg)
    f, g, _ = benchmark_system()
    sw = cfg["sweep"]
    pitches = [float(p) for p in sw["pitches"]]
    kappa_target = float(sw.get("kappa", 10.0))
    lo, hi = sw.get("extent", [-4.0, 4.0])
    horizon = float(cfg.get("horizon", 2.0 * math.pi))
    dt = float(cfg.get("sim_dt", 1e-3))
    noise = float(cfg["noise_variance"])
    delta = float(cfg["bound"]["delta"])
    L_f = float(cfg["bound"]["L_f"])
    seed = cfg["seeds"][0]

    L_k = kern.kernel_lipschitz(spec, box)
    L_sigma = kern.stddev_lipschitz(spec, box)
    n_profile = 128
    t_profile = np.arange(n_profile) * (ref.period / n_profile)
    profile_points = ref.state(t_profile)

    rows = []
    violations = 0
    for j, pitch in enumerate(pitches):
        n_axis = int(round((hi - lo) / pitch)) + 1
        ax = np.linspace(lo, hi, n_axis)
        g1, g2 = np.meshgrid(ax, ax, indexing="ij")
        grid = np.column_stack([g1.ravel(), g2.ravel()])
        rng = np.random.default_rng(seed + j)
        data = TrainingSet(grid, f(grid) + rng.normal(0.0, math.sqrt(noise), grid.shape[0]), noise)
        model = fit(spec, data)

        rho = dens.data_density_batch(model, profile_points)
        rho_min = float(rho.min())
        tau = trk.tau_for_density(model, rho_min, box, delta, L_f, L_k)
        beta = bnd.beta(tau, delta, box)
        loop = trk.gains_for_kappa(plant, kappa_target, L_sigma, beta)

        L_mu = bnd.mean_lipschitz(model, L_k)
        om = bnd.stddev_modulus(spec, tau, L_k, L_sigma)
        gam = bnd.gamma(tau, L_mu, L_f, beta, om)
        n_steps = int(round(horizon / dt))
        t_half = np.arange(2 * n_steps + 1) * (dt / 2.0)
        sigma_ref = model.predict_stddev(ref.state(t_half))
        sup_eta = 1.05 * float(np.max(math.sqrt(beta) * sigma_ref + gam))
        upsilon_bar = trk.max_tracking_bound(loop, sup_eta, L_sigma, beta)

        sim = run_closed_loop(loop, model, ref, horizon, dt, seed + j, f, input_gain=g, noise_variance=noise)
        e_max = float(sim.error_norms.max())
        if e_max > upsilon_bar:
            violations += 1

        sigma_profile = model.predict_stddev(profile_points)
        density_sd_bound = np.where(
            rho > 0, np.sqrt(2.0 / (np.maximum(rho, 1e-300) * spec.signal_variance)), np.inf
        )
        _write_csv(
            os.path.join(out_dir, f"density_profile_pitch{j}.csv"),
            ["x_1", "x_2", "rho", "sigma_exact", "sigma_bound_prop10"],
            zip(profile_points[:, 0], profile_points[:, 1], rho, sigma_profile, density_sd_bound),
        )
        rows.append({
            "pitch": pitch, "n_train": len(data), "rho_min": rho_min,
            "upsilon_bar": upsilon_bar, "e_max": e_max, "tau": tau, "beta": beta,
            "gamma": gam, "L_mu": L_mu, "lambda_max": loop.lambda_max, "zeta": loop.zeta,
            "kappa": trk.kappa(loop, L_sigma, beta),
        })

    _write_csv(
        os.path.join(out_dir, "density_sweep.csv"),
        ["rho_min", "upsilon_bar", "e_max", "pitch", "n_train", "tau", "beta", "lambda_max", "zeta", "kappa"],
        [(r["rho_min"], r["upsilon_bar"], r["e_max"], r["pitch"], r["n_train"],
          r["tau"], r["beta"], r["lambda_max"], r["zeta"], r["kappa"]) for r in rows],
    )
    logr = np.log([r["rho_min"] for r in rows])
    slope_bound = float(np.polyfit(logr, np.log([r["upsilon_bar"] for r in rows]), 1)[0])
    slope_observed = float(np.polyfit(logr, np.log([r["e_max"] for r in rows]), 1)[0])
    summary = {
        "experiment": "density_sweep",
        "resolved_config": _resolved_config(cfg),
        "kappa_target": kappa_target,
        "L_k": L_k,
        "L_sigma": L_sigma,
        "rows": rows,
        "slope_log_upsilon_vs_log_rho": slope_bound,
        "slope_log_e_max_vs_log_rho": slope_observed,
        "certificate_violations": violations,
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return EXIT_OK if violations == 0 else EXIT_CERTIFICATE


# ---------------------------------------------------------------------------
# episodic experiment
# ---------------------------------------------------------------------------

def run_episodic(cfg: dict, out_dir: str, workers: int) -> int:
    spec = _kernel_from(cfg)
    plant = _plant_from(cfg)
    box = _box_from(cfg)
    ref = _reference_from(cfg)
    f, g, _ = benchmark_system()
    ep = cfg.get("episodic", {})
    config = epi.EpisodeConfig(
        target_error=float(ep["target_error"]),
        xi=float(ep.get("xi", 0.95)),
        horizon=float(ep.get("horizon", 2.0 * math.pi)),
        fine_dt=float(ep.get("fine_dt", 3e-4)),
        delta=float(cfg["bound"]["delta"]),
        kernel=spec,
        plant=plant,
        reference=ref,
        domain=box,
        noise_variance=float(cfg["noise_variance"]),
        L_f=float(cfg["bound"]["L_f"]),
        nonlinearity=f,
        input_gain=g,
        seed=int(cfg["seeds"][0]),
        max_episodes=int(ep.get("max_episodes", epi.EPISODE_CAP_DEFAULT)),
    )
    reports = epi.learn_control(config)
    with open(os.path.join(out_dir, "episodes.jsonl"), "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_json_dict(), sort_keys=True) + "\n")

    L_dk = kern.gradient_lipschitz(spec)
    n_e = epi.episode_count_bound(config.target_error, L_dk, spec.signal_variance, config.xi)
    violations = sum(
        1
        for prev, cur in zip(reports, reports[1:])
        if cur.observed_max_error is not None and cur.observed_max_error > prev.certified_bound
    )
    summary = {
        "experiment": "episodic",
        "resolved_config": _resolved_config(cfg),
        "episodes_run": len(reports) - 1,
        "N_E": n_e,
        "total_confidence": 1.0 - n_e * config.delta,
        "terminated": reports[-1].certified_bound <= config.target_error,
        "final_upsilon_bar": reports[-1].certified_bound,
        "upsilon_bar_0": reports[0].certified_bound,
        "certificate_violations": violations,
        "L_dk": L_dk,
        "L_k": kern.kernel_lipschitz(spec, box),
        "L_sigma": kern.stddev_lipschitz(spec, box),
        "xi": config.xi,
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return EXIT_OK if violations == 0 else EXIT_CERTIFICATE


# ---------------------------------------------------------------------------
# Monte-Carlo validation of the uniform bound (prior draws)
# ---------------------------------------------------------------------------

def _axis_fd_slope(values: np.ndarray, shape: tuple[int, ...], pitch: float) -> float:
    """Max finite-difference slope of grid values along the coordinate axes."""
    v = values.reshape(shape)
    worst = 0.0
    for axis in range(v.ndim):
        d = np.abs(np.diff(v, axis=axis)) / pitch
        if d.size:
            worst = max(worst, float(d.max()))
    return worst


def run_validate_bounds(cfg: dict, out_dir: str, workers: int) -> int:
    spec = _kernel_from(cfg)
    box = _box_from(cfg)
    vb = cfg.get("validation", {})
    trials = int(vb.get("trials", 200))
    n_axis = int(vb.get("grid_points_per_axis", 41))
    n_train = int(vb.get("train_points", 25))
    noise = float(cfg["noise_variance"])
    delta = float(cfg["bound"]["delta"])
    tau = float(cfg["bound"]["tau"])
    seed0 = int(cfg["seeds"][0])

    d = box.dimension
    axes = [np.linspace(c - box.edge / 2.0, c + box.edge / 2.0, n_axis) for c in box.center]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.column_stack([m.ravel() for m in mesh])
    pitch = box.edge / (n_axis - 1)

    K = kern.gram(spec, grid) + 1e-10 * np.eye(grid.shape[0])
    L = scipy.linalg.cholesky(K, lower=True)
    L_k = kern.kernel_lipschitz(spec, box)
    L_sigma = kern.stddev_lipschitz(spec, box) if spec.stationary else None
    beta = bnd.beta(tau, delta, box)
    om = bnd.stddev_modulus(spec, tau, L_k, L_sigma)

    rows = []
    covered_n = 0
    for t in range(trials):
        rng = np.random.default_rng(seed0 + t)
        fvals = L @ rng.standard_normal(grid.shape[0])
        idx = rng.choice(grid.shape[0], size=n_train, replace=False)
        y = fvals[idx] + rng.normal(0.0, math.sqrt(noise), n_train)
        model = fit(spec, TrainingSet(grid[idx], y, noise))
        L_f = _axis_fd_slope(fvals, tuple([n_axis] * d), pitch)
        gam = bnd.gamma(tau, bnd.mean_lipschitz(model, L_k), L_f, beta, om)
        eta = math.sqrt(beta) * model.predict_stddev(grid) + gam
        err = np.abs(fvals - model.predict_mean(grid))
        margin = float(np.min(eta - err))
        covered = margin >= 0.0
        covered_n += covered
        rows.append((t, L_f, gam, float(err.max()), margin, int(covered)))

    coverage = covered_n / trials
    _write_csv(os.path.join(out_dir, "bound_trials.csv"),
               ["trial", "L_f", "gamma", "max_error", "min_margin", "covered"], rows)
    summary = {
        "experiment": "validate_bounds",
        "resolved_config": _resolved_config(cfg),
        "trials": trials,
        "coverage": coverage,
        "required_coverage": 1.0 - delta,
        "beta": beta,
        "tau": tau,
        "omega_sigma": om,
        "L_k": L_k,
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return EXIT_OK if coverage >= 1.0 - delta else EXIT_CERTIFICATE


def run_validate_lipschitz(cfg: dict, out_dir: str, workers: int) -> int:
    spec = _kernel_from(cfg)
    box = _box_from(cfg)
    vb = cfg.get("validation", {})
    draws = int(vb.get("draws", 500))
    delta_L = float(cfg["bound"]["delta_L"])
    seed0 = int(cfg["seeds"][0])
    if box.dimension != 1 or spec.dim != 1:
        raise ValueError("validate_lipschitz runs on a one-dimensional domain")

    L_hat = bnd.probabilistic_lipschitz(spec, box, delta_L)
    pitch = spec.ell_min / 8.0
    n = int(round(box.edge / pitch)) + 1
    grid = np.linspace(box.center[0] - box.edge / 2.0, box.center[0] + box.edge / 2.0, n)[:, None]
    pitch = float(grid[1, 0] - grid[0, 0])
    K = kern.gram(spec, grid) + 1e-10 * np.eye(n)
    L = scipy.linalg.cholesky(K, lower=True)

    slopes = np.empty(draws)
    for t in range(draws):
        f = L @ np.random.default_rng(seed0 + t).standard_normal(n)
        slopes[t] = float(np.abs(np.diff(f)).max() / pitch)
    covered = slopes <= L_hat
    coverage = float(covered.mean())
    _write_csv(os.path.join(out_dir, "lipschitz_trials.csv"),
               ["trial", "max_slope", "covered"],
               [(t, slopes[t], int(covered[t])) for t in range(draws)])
    summary = {
        "experiment": "validate_lipschitz",
        "resolved_config": _resolved_config(cfg),
        "draws": draws,
        "coverage": coverage,
        "required_coverage": 1.0 - delta_L,
        "L_f_hat": L_hat,
        "max_observed_slope": float(slopes.max()),
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return EXIT_OK if coverage >= 1.0 - delta_L else EXIT_CERTIFICATE


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

_RUNNERS = {
    "tracking": run_tracking,
    "density_sweep": run_density_sweep,
    "episodic": run_episodic,
    "validate_bounds": run_validate_bounds,
    "validate_lipschitz": run_validate_lipschitz,
}


def run(config: dict, workers: int = 1) -> int:
    """Validate, dispatch, and write artifacts; returns the process exit code."""
    problems = validate(config)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = _merged(config)
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    try:
        return _RUNNERS[cfg["experiment"]](cfg, out_dir, workers)
    except GPCertError as exc:
        print(f"numerical failure in {cfg['experiment']}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gpcert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the experiment config JSON")
        if name == "run":
            p.add_argument("--seed", type=int, default=None, help="override: run this single seed")
            p.add_argument("--workers", type=int, default=1, help="seed-level parallelism")
            p.add_argument("--out", default=None, help="override the output directory")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        problems = validate(config)
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        if not problems:
            print("config OK")
        return EXIT_OK if not problems else EXIT_CONFIG

    if args.seed is not None:
        config["seeds"] = [args.seed]
    if args.out is not None:
        config["out_dir"] = args.out
    return run(config, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
