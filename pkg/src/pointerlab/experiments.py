"""Experiment orchestration: run one configured study, write data + manifest.

Each runner returns plain tables (lists of flat dicts), a summary dict, and
a list of named threshold checks; run_experiment serializes those. Output
bytes depend only on (config, seed): floats are written with repr round-trip
formatting, no timestamps or absolute paths appear anywhere, and the worker
pool only distributes items whose random streams are fixed by item index, so
--threads can change wall time but never bytes.

Threshold checks record pass/fail against the quantitative targets each
study is built around; a failed check is a recorded result, not a crash, so
the exit status stays 0 whenever the computation itself completed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from .analysis import density_width, fit_exponential_tail, width_vs_kappa
from .coefficients import (
    basin_map,
    coefficient_state,
    n2_analytics,
    sample_coefficient_ensemble,
    saturated_positions,
    simplex_sample,
)
from .config import ExperimentConfig
from .dynamics import (
    EvolutionConfig,
    classical_trajectory,
    evolve_nonlinear,
    expectation_values,
    soliton_seed,
    suggest_discretization,
)
from .errors import ConfigError, FitError
from .grids import ComplexField, RngStream, SpatialGrid, gaussian_field, normalize, spectral_shift
from .kernels import MomentumKernel
from .oracles import (
    BlochState,
    Hamiltonian,
    compare_ensemble,
    dephasing_pointer_flow,
    dephasing_solution,
    evolve_master_equation,
    pure_density_matrix,
    qmc_trajectory,
)
from .stats import OutcomeHistogram, binomial_sigma, chi_square_quantile, chi_square_statistic, relative_entropy
from .unraveling import sample_ensemble


# ---------------------------------------------------------------------------
# deterministic serialization

def _plain(obj):
    """Recursively strip numpy types so json and csv see stock Python."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, rows: list[dict]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if rows:
        header = list(rows[0])
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[k]) for k in header])
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(buffer.getvalue())


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_plain(payload), handle, indent=2)
        handle.write("\n")


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _map_indexed(fn, items, threads: int) -> list:
    """Apply fn(index, item) preserving order; identical results for any
    thread count because every item derives its streams from its index."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i, item) for i, item in enumerate(items)]
    results = [None] * len(items)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, i, item): i for i, item in enumerate(items)}
        for future in futures:
            results[futures[future]] = future.result()
    return results


# ---------------------------------------------------------------------------
# shared preparation steps

def _converged_soliton(kappa: float, gamma: float = 1.0, t_max: float = 400.0):
    """Self-localized stationary state on an auto-chosen grid."""
    grid, dt = suggest_discretization(kappa)
    kernel = MomentumKernel(grid, gamma=gamma)
    cfg = EvolutionConfig(kappa=kappa, dt=dt, t_max=t_max)
    result = evolve_nonlinear(soliton_seed(grid, kappa), cfg, kernel)
    return result, grid, dt, kernel


def _place(field: ComplexField, x0: float) -> np.ndarray:
    # the interpolant is evaluated at y + s, which recenters a packet to -s
    return spectral_shift(field.grid, field.amplitudes, -x0)


def _momentum_width(field: ComplexField) -> float:
    weights = np.abs(np.fft.fft(field.amplitudes)) ** 2
    weights /= weights.sum()
    q = field.grid.wavenumbers
    mean = float((q * weights).sum())
    return float(np.sqrt(((q - mean) ** 2 * weights).sum()))


def _field_rows(field: ComplexField) -> list[dict]:
    return [
        {"y": float(y), "re_psi": float(a.real), "im_psi": float(a.imag)}
        for y, a in zip(field.grid.positions, field.amplitudes)
    ]


# ---------------------------------------------------------------------------
# runners

def _run_dephasing(config: ExperimentConfig):
    theta0 = config.option("theta0")
    t_max = config.option("t_max")
    n_times = config.option("n_times")
    gamma = config.gamma
    a0 = BlochState(np.array([math.sin(theta0), 0.0, math.cos(theta0)]))

    bloch_rows = []
    for t in np.linspace(0.0, t_max, n_times):
        a = dephasing_solution(a0, gamma, float(t)).a
        bloch_rows.append({
            "t": float(t),
            "ax": float(a[0]), "ay": float(a[1]), "az": float(a[2]),
            "theta_flow": dephasing_pointer_flow(theta0, gamma, float(t)),
        })
    theta_end = bloch_rows[-1]["theta_flow"]

    # stochastic outcomes on the two-slot reduction; far-apart slots make
    # the off-diagonal decay rate exactly 2*gamma
    p_up = math.cos(theta0 / 2.0) ** 2
    state = coefficient_state(
        [math.cos(theta0 / 2.0), math.sin(theta0 / 2.0)],
        saturated_positions(2), gamma=2.0 * gamma)
    outcomes = sample_coefficient_ensemble(state, config.seed, config.n_trajectories)
    n_up = sum(1 for o in outcomes if o.asymptotic_index == 1)
    frac_up = n_up / len(outcomes)
    sigma = binomial_sigma(len(outcomes), p_up)
    outcome_rows = [
        {"outcome": 1, "count": n_up, "expected": p_up},
        {"outcome": 2, "count": len(outcomes) - n_up, "expected": 1.0 - p_up},
    ]

    summary = {
        "theta0": theta0, "gamma": gamma,
        "theta_end": theta_end,
        "p_up": p_up, "frac_up": frac_up, "binomial_sigma": sigma,
        "n_trajectories": len(outcomes),
    }
    checks = [
        _check("pointer-flow-reaches-north-pole", theta_end < 1e-3,
               f"theta({t_max:g}) = {theta_end:.3e}"),
        _check("two-level-outcomes-within-3-sigma",
               abs(frac_up - p_up) <= 3.0 * sigma,
               f"|{frac_up:.6g} - {p_up:.6g}| vs 3*sigma = {3*sigma:.3e}"),
    ]
    return {"bloch": bloch_rows, "two_level_outcomes": outcome_rows}, summary, checks


def _run_soliton_formation(config: ExperimentConfig):
    weight = config.option("weight")
    separation = config.option("separation")
    if not (0.0 < weight < 1.0):
        raise ConfigError(f"[experiment] weight: must lie in (0, 1), got {weight}")
    base, grid, dt, kernel = _converged_soliton(config.kappa, config.gamma)
    phi = base.final_field
    width = density_width(phi)
    p_width = _momentum_width(phi)

    half = separation / 2.0
    two = normalize(ComplexField(grid,
        math.sqrt(weight) * _place(phi, -half)
        + math.sqrt(1.0 - weight) * _place(phi, +half)))
    cfg = EvolutionConfig(kappa=config.kappa, dt=dt, t_max=config.option("t_max"))
    run = evolve_nonlinear(two, cfg, kernel)
    mean_y, mean_p = expectation_values(run.final_field)
    target = -half if weight >= 0.5 else +half

    track_rows = [{"tau": float(r[0]), "y": float(r[1]), "p": float(r[2])}
                  for r in run.expectation_track]
    summary = {
        "kappa": config.kappa, "weight": weight, "separation": separation,
        "converged": run.converged, "convergence_time": run.convergence_time,
        "survivor_y": mean_y, "survivor_p": mean_p,
        "target_y": target, "soliton_width": width, "momentum_width": p_width,
    }
    checks = [
        _check("converges-within-tau-50",
               run.converged and run.convergence_time <= 50.0,
               f"converged={run.converged} at tau={run.convergence_time:.4g}"),
        _check("survivor-inherits-larger-packet",
               abs(mean_y - target) < width and abs(mean_p) < p_width,
               f"<y>={mean_y:.6g} vs {target:g} (width {width:.4g}), "
               f"<p>={mean_p:.3e} (momentum width {p_width:.4g})"),
    ]
    tables = {"track": track_rows, "final_field": _field_rows(run.final_field)}
    return tables, summary, checks


def _run_tail_fit(config: ExperimentConfig):
    kappas = config.option("kappas")

    def one(index, kappa):
        result, grid, dt, kernel = _converged_soliton(kappa, config.gamma)
        slope, r_squared = fit_exponential_tail(result.final_field)
        return {
            "kappa": kappa, "converged": result.converged,
            "slope": slope, "r_squared": r_squared,
            "width": density_width(result.final_field),
        }
    rows = _map_indexed(one, kappas, config.threads)

    # control: a Gaussian of matching width on the first grid must be
    # rejected by the same straight-line tail test
    grid, _ = suggest_discretization(kappas[0])
    control = gaussian_field(grid, width=rows[0]["width"])
    try:
        _, control_r2 = fit_exponential_tail(control)
    except FitError:
        control_r2 = float("nan")
    control_fails = not (control_r2 > 0.999)

    checks = [
        _check(f"tail-r2-above-0.999-kappa-{row['kappa']:g}",
               row["r_squared"] > 0.999,
               f"R^2 = {row['r_squared']:.6f}")
        for row in rows
    ]
    checks.append(_check("gaussian-control-fails-tail-test", control_fails,
                         f"control R^2 = {control_r2:.6f}"))
    summary = {
        "kappas": list(kappas),
        "r_squared": [row["r_squared"] for row in rows],
        "control_r_squared": control_r2,
    }
    return {"tails": rows}, summary, checks


def _run_width_sweep(config: ExperimentConfig):
    sweep = width_vs_kappa(config.option("kappas"), t_max=config.option("t_max"))
    a = sweep.a_loc
    rows = [{
        "kappa": p.kappa, "sigma_pi": p.sigma_pi,
        "model_sigma": a + p.kappa / (4.0 * a),
        "converged": p.converged, "convergence_time": p.convergence_time,
    } for p in sweep.points]
    rel_rms = sweep.residual_rms / sweep.mean_width
    summary = {
        "a_loc": a, "residual_rms": sweep.residual_rms,
        "mean_width": sweep.mean_width, "relative_rms": rel_rms,
    }
    checks = [
        _check("a-loc-in-0.3-0.5", 0.3 <= a <= 0.5, f"a_loc = {a:.4f}"),
        _check("residual-rms-below-10-percent", rel_rms < 0.10,
               f"relative rms = {rel_rms:.4f}"),
    ]
    return {"widths": rows}, summary, checks


def _quartic_period(potential, x0: float, kappa: float) -> float:
    """Oscillation period for a rest start at x0, from the leapfrog track."""
    track = classical_trajectory(x0, 0.0, potential, t_max=2000.0, dt=1e-3,
                                 kappa=kappa, record_every=1)
    u = track[:, 2]
    sign0 = np.sign(u[np.nonzero(u)[0][0]]) if np.any(u) else 0.0
    if sign0 == 0.0:
        raise ConfigError("[experiment] x0: classical start point does not move")
    # first return of the velocity through zero is the half period
    flips = np.nonzero((np.sign(u[:-1]) == sign0) & (np.sign(u[1:]) != sign0))[0]
    if flips.size == 0:
        raise ConfigError("[experiment] x0: no turning point found within the scan")
    k = flips[0]
    frac = u[k] / (u[k] - u[k + 1])
    return 2.0 * float(track[k, 0] + frac * (track[k + 1, 0] - track[k, 0]))


def _run_potential_dynamics(config: ExperimentConfig):
    a, b = config.option("quartic_a"), config.option("quartic_b")
    x0 = config.option("x0")
    grid = SpatialGrid(config.n_points, config.length)
    dt = config.dt
    potential = lambda y: a * y**4 - b * y**2

    period = _quartic_period(potential, x0, config.kappa)
    free_kernel = MomentumKernel(grid, gamma=config.gamma)
    base = evolve_nonlinear(
        soliton_seed(grid, config.kappa),
        EvolutionConfig(kappa=config.kappa, dt=dt, t_max=400.0), free_kernel)
    width = density_width(base.final_field)
    p_width = _momentum_width(base.final_field)
    init = normalize(ComplexField(grid, _place(base.final_field, x0)))

    def run(gamma: float, periods: float):
        cfg = EvolutionConfig(kappa=config.kappa, dt=dt, t_max=periods * period,
                              potential=potential(grid.positions),
                              record_every=100, stop_on_convergence=False)
        result = evolve_nonlinear(init, cfg, MomentumKernel(grid, gamma=gamma))
        reference = classical_trajectory(x0, 0.0, potential,
                                         t_max=periods * period, dt=1e-3,
                                         kappa=config.kappa, record_every=10)
        track = result.expectation_track
        y_cl = np.interp(track[:, 0], reference[:, 0], reference[:, 1])
        p_cl = np.interp(track[:, 0], reference[:, 0], reference[:, 2])
        rows = [{
            "tau": float(t), "y": float(y), "p": float(p),
            "y_classical": float(yc), "p_classical": float(pc),
        } for t, y, p, yc, pc in zip(track[:, 0], track[:, 1], track[:, 2], y_cl, p_cl)]
        dev_x = np.abs(track[:, 1] - y_cl) / width
        dev_p = np.abs(track[:, 2] - p_cl) / p_width
        return rows, track[:, 0], dev_x, dev_p, result

    rows1, times1, dev_x1, dev_p1, run1 = run(config.gamma, config.option("periods"))
    one_period = times1 <= period * (1.0 + 1e-9)
    tracked = max(float(dev_x1[one_period].max()), float(dev_p1[one_period].max()))

    rows0, _, dev_x0, _, run0 = run(0.0, config.option("control_periods"))
    control_dev = float(dev_x0.max())

    summary = {
        "period": period, "soliton_width": width, "momentum_width": p_width,
        "max_tracking_deviation_widths": tracked,
        "control_max_deviation_widths": control_dev,
        "final_width": density_width(run1.final_field),
        "control_final_width": density_width(run0.final_field),
    }
    checks = [
        _check("tracks-classical-within-half-width", tracked < 0.5,
               f"max deviation over one period = {tracked:.4g} widths"),
        _check("free-packet-disperses-beyond-two-widths", control_dev > 2.0,
               f"gamma=0 deviation = {control_dev:.4g} widths over "
               f"{config.option('control_periods'):g} periods"),
    ]
    tables = {"track": rows1, "control_track": rows0}
    return tables, summary, checks


def _run_basin_map(config: ExperimentConfig):
    saturated = config.option("saturated")
    positions = None if saturated else tuple(config.option("positions"))
    result = basin_map(resolution=config.option("resolution"),
                       saturated=saturated, positions=positions,
                       gamma=config.gamma, t_max=config.option("t_max"),
                       step=config.option("step"))

    rows = []
    classified = agree = stalled = outside = 0
    for i in range(result.resolution):
        for j in range(result.resolution):
            index = int(result.indices[i, j])
            if index < 0:
                outside += 1
                continue
            weights = result.cell_weights(i, j)
            largest = int(np.argmax(weights)) + 1
            rows.append({
                "i": i, "j": j,
                "w1": float(weights[0]), "w2": float(weights[1]),
                "w3": float(weights[2]),
                "basin": index, "argmax": largest,
            })
            if index == 0:
                stalled += 1
            else:
                classified += 1
                agree += int(index == largest)
    differ = classified - agree
    frac_differ = differ / classified if classified else float("nan")

    summary = {
        "saturated": saturated, "resolution": result.resolution,
        "classified": classified, "stalled": stalled, "outside": outside,
        "agree_with_argmax": agree, "fraction_differing": frac_differ,
    }
    if saturated:
        checks = [_check("saturated-basins-equal-argmax", differ == 0,
                         f"{differ} of {classified} classified cells differ")]
    else:
        checks = [_check("unsaturated-basins-differ-1-percent", frac_differ >= 0.01,
                         f"fraction differing = {frac_differ:.4f}")]
    return {"map": rows}, summary, checks


def _run_weights_n2(config: ExperimentConfig):
    targets = config.option("c1sq")
    n = config.n_trajectories

    def one(index, c1sq):
        if not (0.0 < c1sq < 0.5):
            raise ConfigError(f"[experiment] c1sq: must lie in (0, 0.5), got {c1sq}")
        state = coefficient_state(
            [math.sqrt(c1sq), math.sqrt(1.0 - c1sq)],
            saturated_positions(2), gamma=config.gamma)
        outcomes = sample_coefficient_ensemble(
            state, config.seed, n, base_stream_id=index * 10_000_000)
        odd = sum(1 for o in outcomes if o.jump_count % 2 == 1)
        minority = sum(1 for o in outcomes if o.asymptotic_index == 1)
        mu_hat = sum(o.jump_count for o in outcomes) / n
        mu_inf, prob_odd = n2_analytics(c1sq)
        return {
            "c1sq": c1sq,
            "prob_odd_empirical": odd / n,
            "prob_odd_theory": prob_odd,
            "minority_fraction": minority / n,
            "binomial_sigma": binomial_sigma(n, c1sq),
            "mu_hat": mu_hat, "mu_theory": mu_inf,
            "mu_relative_error": abs(mu_hat - mu_inf) / mu_inf,
        }
    rows = _map_indexed(one, targets, config.threads)

    checks = []
    for row in rows:
        tag = f"c1sq-{row['c1sq']:g}"
        checks.append(_check(
            f"odd-jump-fraction-within-3-sigma-{tag}",
            abs(row["prob_odd_empirical"] - row["c1sq"]) <= 3.0 * row["binomial_sigma"],
            f"|{row['prob_odd_empirical']:.6g} - {row['c1sq']:g}| vs "
            f"3*sigma = {3*row['binomial_sigma']:.3e}"))
        checks.append(_check(
            f"mean-jump-count-within-5-percent-{tag}",
            row["mu_relative_error"] < 0.05,
            f"mu_hat = {row['mu_hat']:.6g} vs {row['mu_theory']:.6g} "
            f"({100*row['mu_relative_error']:.2f}%)"))
    summary = {"n_trajectories": n, "results": rows}
    return {"weights": rows}, summary, checks


def _run_weights_nN(config: ExperimentConfig):
    n_states = config.option("n_states")
    n_min, n_max = config.option("n_min"), config.option("n_max")
    calibration_n = config.option("calibration_n")
    n = config.n_trajectories
    if not (2 < n_min <= n_max):
        raise ConfigError(f"[experiment] n_min: need 2 < n_min <= n_max, "
                          f"got {n_min}..{n_max}")
    span = n_max - n_min + 1

    def one(index, _):
        n_slots = n_min + index % span
        draw = RngStream(config.seed, 777_000 + index)
        state = simplex_sample(n_slots, draw, gamma=config.gamma)
        base = (index + 1) * 2_000_000
        outcomes = sample_coefficient_ensemble(state, config.seed, n,
                                               base_stream_id=base)
        counts = np.bincount([o.asymptotic_index - 1 for o in outcomes],
                             minlength=n_slots)
        entropy = relative_entropy(OutcomeHistogram(counts, state.weights))

        calibration = sample_coefficient_ensemble(
            state, config.seed, calibration_n, base_stream_id=base + 1_000_000)
        cal_counts = np.bincount([o.asymptotic_index - 1 for o in calibration],
                                 minlength=n_slots)
        chi2 = chi_square_statistic(OutcomeHistogram(cal_counts, state.weights))
        return {
            "state": index, "n_slots": n_slots,
            "relative_entropy": entropy, "chi_square": chi2,
            "dof": n_slots - 1,
        }
    rows = _map_indexed(one, range(n_states), config.threads)

    n_small = sum(1 for r in rows if r["relative_entropy"] < 4e-3)
    exceed = {alpha: 0 for alpha in (0.9, 0.99, 0.999)}
    for row in rows:
        for alpha in exceed:
            if row["chi_square"] > chi_square_quantile(row["dof"], alpha):
                exceed[alpha] += 1

    summary = {
        "n_states": n_states, "n_trajectories": n,
        "entropy_below_4e-3": n_small,
        "chi2_exceed_q90": exceed[0.9],
        "chi2_exceed_q99": exceed[0.99],
        "chi2_exceed_q999": exceed[0.999],
    }
    checks = [
        _check("relative-entropy-below-4e-3-in-95-states",
               n_small >= max(1, math.ceil(0.95 * n_states)),
               f"{n_small} of {n_states} states below 4e-3"),
        # binomial bands around the expected 10 / 1 / 0.1 counts per 100
        _check("chi2-calibration-counts-pattern",
               3 <= exceed[0.9] <= 19 and exceed[0.99] <= 4 and exceed[0.999] <= 1,
               f"counts over Q0.9/Q0.99/Q0.999 = "
               f"{exceed[0.9]}/{exceed[0.99]}/{exceed[0.999]}"),
    ]
    return {"states": rows}, summary, checks


def _run_oracle_compare(config: ExperimentConfig):
    grid = SpatialGrid(config.n_points, config.length)
    dt = config.dt
    kernel = MomentumKernel(grid, gamma=config.gamma)
    hamiltonian = Hamiltonian(config.kappa)
    hamiltonian.validate_for_grid(grid, dt)
    times = tuple(sorted(config.option("times")))
    t_max = times[-1]
    n = config.n_trajectories
    n_bootstrap = config.option("n_bootstrap")

    half = config.option("packet_separation") / 2.0
    width = config.option("packet_width")
    initial = normalize(ComplexField(grid,
        gaussian_field(grid, -half, width).amplitudes
        + gaussian_field(grid, +half, width).amplitudes))

    rho0 = pure_density_matrix(initial)
    reference = dict(evolve_master_equation(rho0, kernel, t_max, dt,
                                            hamiltonian=hamiltonian,
                                            record_times=times))

    cfg = EvolutionConfig(kappa=config.kappa, dt=dt, t_max=t_max,
                          stop_on_convergence=False)
    orth = sample_ensemble(initial, t_max, cfg, config.seed, n,
                           kernel=kernel, record_times=times)

    def one_qmc(index, _):
        stream = RngStream(config.seed, 5_000_000 + index)
        return qmc_trajectory(initial, kernel, t_max, stream,
                              hamiltonian=hamiltonian, record_times=times)
    qmc = _map_indexed(one_qmc, range(n), config.threads)

    def fields_at(trajectories, t):
        out = []
        for trajectory in trajectories:
            for when, field in trajectory.snapshots:
                if abs(when - t) <= 1e-9:
                    out.append(field)
                    break
        return out

    rows, checks = [], []
    for label, trajectories in (("orthogonal", orth), ("qmc", qmc)):
        for k, t in enumerate(times):
            fields = fields_at(trajectories, t)
            stream = RngStream(config.seed,
                               9_100_000 + 10 * k + (0 if label == "orthogonal" else 1))
            comparison = compare_ensemble(fields, reference[t], t, stream,
                                          n_bootstrap=n_bootstrap)
            ratio = comparison.trace_distance / comparison.mc_error
            record = comparison.as_record()
            record["method"] = label
            record["ratio"] = ratio
            rows.append(record)
            checks.append(_check(
                f"{label}-matches-master-equation-t-{t:g}", ratio < 3.0,
                f"trace distance {comparison.trace_distance:.4e} vs "
                f"mc error {comparison.mc_error:.4e} (ratio {ratio:.2f})"))

    # with the coherent part switched off the off-diagonal decay factor is
    # applied in closed form, so the oracle must reproduce it exactly
    decay = dict(evolve_master_equation(rho0, kernel, 1.0, dt, record_times=(1.0,)))
    y = grid.positions
    separation = y[:, None] - y[None, :]
    separation -= grid.length * np.round(separation / grid.length)
    expected = rho0.matrix * np.exp(-kernel.localization_rate(separation))
    exact_dev = float(np.abs(decay[1.0].matrix - expected).max())
    checks.append(_check("coherence-decay-exact-to-1e-8", exact_dev < 1e-8,
                         f"max deviation = {exact_dev:.3e}"))

    summary = {
        "times": list(times), "n_trajectories": n,
        "ratios": [row["ratio"] for row in rows],
        "coherence_decay_deviation": exact_dev,
    }
    return {"comparisons": rows}, summary, checks


_RUNNERS = {
    "dephasing": _run_dephasing,
    "soliton-formation": _run_soliton_formation,
    "tail-fit": _run_tail_fit,
    "width-sweep": _run_width_sweep,
    "potential-dynamics": _run_potential_dynamics,
    "basin-map": _run_basin_map,
    "weights-n2": _run_weights_n2,
    "weights-nN": _run_weights_nN,
    "oracle-compare": _run_oracle_compare,
}


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute one experiment and write its outputs under
    out_dir/experiment/. Returns the manifest dict."""
    tables, summary, checks = _RUNNERS[config.experiment](config)

    out_dir = os.path.join(config.out_dir, config.experiment)
    os.makedirs(out_dir, exist_ok=True)
    outputs = []
    for name, rows in tables.items():
        filename = f"{name}.{config.format}"
        path = os.path.join(out_dir, filename)
        if config.format == "csv":
            _write_csv(path, [_plain(r) for r in rows])
        else:
            _write_json(path, rows)
        outputs.append(filename)

    _write_json(os.path.join(out_dir, "summary.json"),
                {"experiment": config.experiment, "summary": summary,
                 "checks": checks})
    outputs.append("summary.json")

    sections = _plain(config.as_sections())
    digest = hashlib.sha256(
        json.dumps(sections, sort_keys=True).encode("utf-8")).hexdigest()
    manifest = {
        "experiment": config.experiment,
        "seed": config.seed,
        "config": sections,
        "config_sha256": digest,
        "versions": {
            "artifact": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": outputs,
        "checks": checks,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest
