"""The four scenario runs.

Two-packet scenarios (``crossing``, ``fast_recorder``, ``spin_recorder``)
share one driver: the packets are propagated as separate branches plus their
sum with a common stepper.  The sum guides two ensembles, one sampled from a
named packet and one from the full initial density.  ``protective`` relaxes a
box ground state, couples it slowly to a heavy pointer and reads the pointer
momentum.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import __version__, kernels
from ..analysis import LineageRecord, equivariance_test, non_crossing_check
from ..errors import ValidationError
from ..guidance import Ensemble, FieldFrame, Recorder, sample_initial_positions, velocities
from ..propagator import Box, InteractionWindow, Ramp, SplitStepper, _steps_between, evolve, relax_ground_state
from ..wavecore import GaussianPacketSpec, WaveFunction, local_fields
from .config import validate
from .report import ScenarioReport

EXIT_SHARE = 0.99
# tail trajectories may end where neither branch holds 99% of the density
MAX_UNCLASSIFIED = 0.01
BRANCHES = ("left", "right")


@dataclass(eq=False)
class ScenarioRun:
    """A finished run: the report plus the artifacts needed for post-analysis and export.

    ``snapshots`` maps dump times to the full state; ``lineage`` holds the
    branches at the dump times, the overlap time and the final time.
    """

    config: object
    report: ScenarioReport
    trajectories: object
    equilibrium_final: object = None
    lineage: object = None
    environment: str = None
    recorded_branch: str = None
    sampled_branch: str = None
    free_environment: object = None
    snapshots: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    final_state: object = None


def stream_seed(seed, stream):
    """Independent integer seed for a named random stream of a run."""
    return int(np.random.SeedSequence([int(seed), int(stream)]).generate_state(1)[0])


def _normalize(amp, dv):
    return amp / math.sqrt(float(np.sum(np.abs(amp) ** 2)) * dv)


def _packet_branches(cfg, grid):
    """Unit-sum branch amplitudes for the two packets, keyed ``left``/``right``."""
    off = cfg.offset
    spin = cfg.scenario == "spin_recorder"
    out = {}
    for name, cx, k, w, ysign in (("left", cfg.center_left, cfg.wavevector, cfg.weight_left, -1),
                                  ("right", cfg.center_right, -cfg.wavevector, cfg.weight_right, 1)):
        if grid.dims == 1:
            spec = GaussianPacketSpec(cx + off, cfg.sigma, k)
        elif cfg.scenario == "fast_recorder":
            spec = GaussianPacketSpec((cx + off, cfg.pointer_center), (cfg.sigma, cfg.pointer_sigma), (k, 0.0))
        else:
            spec = GaussianPacketSpec((cx + off, 0.5 * ysign * cfg.transverse_offset),
                                      (cfg.sigma, cfg.transverse_sigma), (k, 0.0))
        amp = w * _normalize(spec.amplitudes(grid), grid.cell_volume)
        out[name] = np.stack([amp, np.zeros_like(amp)]) if spin else amp[None]
    norm = math.sqrt(float(np.sum(np.abs(out["left"] + out["right"]) ** 2)) * grid.cell_volume)
    return {k: v / norm for k, v in out.items()}


def _x_centroid(amp, grid):
    rho = np.sum(np.abs(amp) ** 2, axis=0)
    if grid.dims == 2:
        rho = rho.sum(axis=1)
    return float(np.sum(grid.axis(0) * rho) / np.sum(rho))


def _pointer_stats(amp, grid):
    rho = np.sum(np.abs(amp) ** 2, axis=0).sum(axis=0)
    y = grid.axis(1)
    m = float(np.sum(y * rho) / np.sum(rho))
    return m, float(np.sqrt(np.sum((y - m) ** 2 * rho) / np.sum(rho)))


def _runtime(t0):
    return {"wall_seconds": time.perf_counter() - t0, "backend": kernels.BACKEND_NAME, "version": __version__}


def _equivariance(cfg, ensemble, psi):
    if ensemble is None:
        return None
    return equivariance_test(ensemble.points(), psi, 0, cfg.ks_threshold)


def run_two_packet(cfg):
    """Shared driver of the crossing and recorder scenarios; returns a :class:`ScenarioRun`."""
    validate(cfg)
    t_start = time.perf_counter()
    grid = cfg.grid()
    if cfg.scenario == "fast_recorder":
        mass = (1.0, cfg.pointer_mass)
    else:
        mass = (1.0,) * grid.dims
    amps = _packet_branches(cfg, grid)
    levels = amps["left"].shape[0]
    off = cfg.offset

    potential = []
    environment = {"fast_recorder": "pointer", "spin_recorder": "spin"}.get(cfg.scenario)
    window_center = cfg.window_center + off
    if environment is not None and cfg.coupling != 0.0:
        potential.append(InteractionWindow(
            center=window_center, width=cfg.window_width, coupling=cfg.coupling,
            target=environment, edge=cfg.window_edge or None, t_on=cfg.window_t_on, t_off=cfg.window_t_off,
        ))
    centers = {"left": cfg.center_left + off, "right": cfg.center_right + off}
    recorded = min(BRANCHES, key=lambda b: abs(centers[b] - window_center)) if environment else None
    sampled = cfg.sample_from
    x_sym = 0.5 * (centers["left"] + centers["right"])

    stepper = SplitStepper(grid, potential, cfg.dt, mass)
    stepper.check_target(levels)
    n_steps = _steps_between(0.0, cfg.t_final, cfg.dt)

    def state(a):
        return WaveFunction(grid, a, mass)

    total = amps["left"] + amps["right"]
    psi0 = state(total)
    named_state = state(amps[sampled]).normalized()
    starts = sample_initial_positions(named_state, cfg.n_trajectories, stream_seed(cfg.seed, 0))
    ens = Ensemble(grid, mass, starts, 0.0)
    rec = Recorder(ens, cfg.report_every)
    eq = None
    if cfg.n_equilibrium:
        eq = Ensemble(grid, mass, sample_initial_positions(psi0, cfg.n_equilibrium, stream_seed(cfg.seed, 1)), 0.0)

    side0 = np.sign(starts[:, 0] - x_sym)
    crossed = np.zeros(cfg.n_trajectories, dtype=bool)
    lo_w, hi_w = window_center - 0.5 * cfg.window_width, window_center + 0.5 * cfg.window_width

    def window_gap(x):
        return np.maximum(0.0, np.maximum(lo_w - x, x - hi_w))

    nearest = window_gap(starts[:, 0])
    series = {k: [] for k in ("t", "x_left", "x_right", "y_left", "y_right")}
    dumps = sorted(float(t) for t in cfg.dump_times)
    snapshots = {}
    lineage_frames = {}
    best_gap = math.inf
    overlap = None

    def observe(t, total, amps):
        nonlocal best_gap, overlap
        xl, xr = _x_centroid(amps["left"], grid), _x_centroid(amps["right"], grid)
        series["t"].append(t)
        series["x_left"].append(xl)
        series["x_right"].append(xr)
        if environment == "pointer":
            series["y_left"].append(_pointer_stats(amps["left"], grid)[0])
            series["y_right"].append(_pointer_stats(amps["right"], grid)[0])
        if abs(xl - xr) < best_gap:
            best_gap = abs(xl - xr)
            overlap = (t, {k: a.copy() for k, a in amps.items()}, total.copy())
        if any(abs(t - d) <= 0.5 * cfg.dt for d in dumps):
            snapshots[t] = state(total)
            lineage_frames[t] = (total.copy(), {k: a.copy() for k, a in amps.items()})

    observe(0.0, total, amps)
    frame = FieldFrame.from_state(psi0, 0.0)
    done = 0
    while done < n_steps:
        k = min(cfg.frame_every, n_steps - done)
        t0 = done * cfg.dt
        total = stepper.run(total, t0, k)
        amps = {b: stepper.run(a, t0, k) for b, a in amps.items()}
        done += k
        t = done * cfg.dt
        new = FieldFrame.from_state(state(total), t)
        ens.advance(frame, new)
        rec.step()
        if eq is not None:
            eq.advance(frame, new)
        frame = new
        x = ens.points()[:, 0]
        live = ~np.isnan(x)
        crossed[live] |= np.sign(x[live] - x_sym) != side0[live]
        nearest[live] = np.minimum(nearest[live], window_gap(x[live]))
        observe(t, total, amps)

    t_final = done * cfg.dt
    psi_t = state(total)
    lineage_frames[t_final] = (total.copy(), {k: a.copy() for k, a in amps.items()})
    snapshots.setdefault(t_final, psi_t)
    t_overlap, overlap_amps, overlap_total = overlap
    lineage_frames.setdefault(t_overlap, (overlap_total, overlap_amps))
    lineage = LineageRecord()
    for t in sorted(lineage_frames):
        tot, br = lineage_frames[t]
        lineage.add(t, state(tot), {b: state(a) for b, a in br.items()})

    # the packets must have passed each other
    if np.sign(series["x_left"][-1] - series["x_right"][-1]) == np.sign(series["x_left"][0] - series["x_right"][0]):
        raise ValidationError("packets did not cross before t_final; increase t_final", "t_final")

    bundle = rec.bundle()
    final = ens.last_points()
    alive = ens.status == 0
    v_final = velocities(psi_t, final)[:, 0]
    k_sign = 1.0 if sampled == "left" else -1.0
    valid = alive & np.isfinite(v_final)
    if not valid.any():
        raise ValidationError("no trajectory survived to t_final", "t_final")
    swapped = np.sign(v_final) == -k_sign
    swap_fraction = float(np.mean(swapped[valid]))

    rho_tot, _ = local_fields(psi_t, final)
    shares = {b: local_fields(state(amps[b]), final)[0] / np.maximum(rho_tot, 1e-300) for b in BRANCHES}
    exit_branch = np.full(cfg.n_trajectories, "", dtype=object)
    for b in BRANCHES:
        exit_branch[shares[b] > EXIT_SHARE] = b
    unclassified = int(np.sum(valid & (exit_branch == "")))
    if unclassified > MAX_UNCLASSIFIED * np.sum(valid):
        raise ValidationError(
            f"{unclassified} trajectories end where branches still overlap; choose a later t_final", "t_final")
    other = "right" if sampled == "left" else "left"

    report = ScenarioReport(scenario=cfg.scenario, seed=cfg.seed)
    report.swap_fraction = swap_fraction
    report.n_trajectories = cfg.n_trajectories
    report.truncated = int(np.sum(~alive))
    report.node_encounters = int(ens.nodes.sum())
    report.clamped_steps = int(ens.clamps.sum())
    report.symmetry_axis_crossings = int(crossed.sum())
    report.overlap_time = float(t_overlap)
    report.linearity_error = lineage.linearity_error
    report.norm_drift = max(abs(1.0 - psi_t.norm()), abs(1.0 - psi0.norm()))
    report.extra["exit_with_other_branch"] = float(np.mean(exit_branch[valid] == other))
    report.extra["unclassified_exits"] = unclassified
    test = _equivariance(cfg, eq, psi_t)
    if test is not None:
        report.equivariance_ks = test.value
        report.equivariance = test.as_dict()
    if grid.dims == 1:
        check = non_crossing_check(bundle)
        report.non_crossing = {"passed": check.passed, "violation_time": check.violation_time,
                               "checked": cfg.n_trajectories}

    mismatch = 0.0
    if environment == "spin" and cfg.coupling != 0.0:
        rec_state = state(amps[recorded])
        flipped = float(np.sum(np.abs(rec_state.amplitudes[1]) ** 2) / np.sum(np.abs(rec_state.amplitudes) ** 2))
        report.extra["flipped_weight"] = flipped
        if flipped < cfg.min_flip_weight:
            raise ValidationError(
                f"recorded branch is only {flipped:.4f} flipped (< {cfg.min_flip_weight}); check coupling", "coupling")
        lvl1 = np.abs(psi_t.amplitudes[1]) ** 2
        flip_share = local_fields(psi_t.with_amplitudes(np.stack([psi_t.amplitudes[1], 0 * lvl1])), final)[0]
        flip_share = flip_share / np.maximum(rho_tot, 1e-300)
        far = nearest > 3 * cfg.sigma
        mismatch = float(np.mean((far & (flip_share >= EXIT_SHARE))[valid]))
    elif environment == "pointer" and cfg.coupling != 0.0:
        far = nearest > 3 * cfg.sigma
        mismatch = float(np.mean((far & (exit_branch == recorded))[valid]))
    report.trajectory_record_mismatch = mismatch

    free_env = None
    if environment == "pointer":
        yl, sl = _pointer_stats(overlap_amps["left" if recorded == "right" else "right"], grid)
        yr, _ = _pointer_stats(overlap_amps[recorded], grid)
        report.pointer_separation = abs(yr - yl) / sl
        report.branch_pointer_momentum = {b: state(amps[b]).mean_momentum(1) for b in BRANCHES}
        report.pointer_shift = report.branch_pointer_momentum[recorded] - report.branch_pointer_momentum[
            "left" if recorded == "right" else "right"]
        if cfg.coupling != 0.0 and report.pointer_separation < cfg.min_pointer_separation:
            raise ValidationError(
                f"pointer branches separate by {report.pointer_separation:.2f} widths at overlap, "
                f"below {cfg.min_pointer_separation}; raise coupling or pointer speed", "coupling")
        ygrid = grid.axis_grid(1)
        chi = WaveFunction(ygrid, GaussianPacketSpec(cfg.pointer_center, cfg.pointer_sigma).amplitudes(ygrid),
                           cfg.pointer_mass).normalized()
        free_env = evolve(chi, None, 0.0, t_final, cfg.dt, store_every=n_steps or 1).frames[-1]

    run = ScenarioRun(
        config=cfg, report=report, trajectories=bundle, equilibrium_final=None if eq is None else eq.points(),
        lineage=lineage, environment=environment, recorded_branch=recorded, sampled_branch=sampled,
        free_environment=free_env, snapshots=snapshots,
        series={k: np.array(v) for k, v in series.items() if v}, final_state=psi_t,
    )
    from .conditions import analyze_conditions

    report.conditions = analyze_conditions(report, run)
    report.config = cfg.as_dict()
    report.runtime = _runtime(t_start)
    return run


def run_crossing(config):
    """Head-on crossing of two mirror packets without any recorder."""
    if config.scenario != "crossing":
        raise ValidationError("run_crossing needs scenario = crossing", "scenario")
    return run_two_packet(config)


def run_fast_recorder(config):
    """Crossing in (particle, pointer) space with a pointer kicked on the empty path."""
    if config.scenario != "fast_recorder":
        raise ValidationError("run_fast_recorder needs scenario = fast_recorder", "scenario")
    return run_two_packet(config)


def run_spin_recorder(config):
    """Crossing with an internal-level flip on the empty path."""
    if config.scenario != "spin_recorder":
        raise ValidationError("run_spin_recorder needs scenario = spin_recorder", "scenario")
    return run_two_packet(config)


def run_protective(config):
    """Adiabatic weak coupling of a box ground state to a heavy pointer.

    The coupling ``-g(t) Pi_B(x) y`` with ``g(t) = g0 sin^2(pi t / T)`` shifts
    the pointer momentum by ``g_int <Pi_B>`` to first order, where
    ``g_int = g0 T / 2``.  One trajectory starts at ``point_a`` on the pointer
    center; an equilibrium ensemble checks equivariance.
    """
    cfg = validate(config)
    if cfg.scenario != "protective":
        raise ValidationError("run_protective needs scenario = protective", "scenario")
    t_start = time.perf_counter()
    grid = cfg.grid()
    off = cfg.offset
    mass = (1.0, cfg.pointer_mass)
    if cfg.t_final < cfg.ramp_duration:
        raise ValidationError("t_final must cover the whole ramp", "t_final")
    box = Box(cfg.box_left + off, cfg.box_right + off, cfg.box_height)
    gx = grid.axis_grid(0)
    phi, energy = relax_ground_state(box, gx, tolerance=cfg.relax_tolerance, refine_dt=cfg.dt)
    ygrid = grid.axis_grid(1)
    chi = _normalize(GaussianPacketSpec(cfg.pointer_center, cfg.pointer_sigma).amplitudes(ygrid), ygrid.cell_volume)
    psi0 = WaveFunction(grid, (phi.amplitudes[0][:, None] * chi[None, :])[None], mass)

    window = InteractionWindow(
        center=cfg.window_center + off, width=cfg.window_width, coupling=cfg.coupling, target="pointer",
        edge=cfg.window_edge or None, ramp=Ramp(cfg.ramp_duration),
    )
    profile = window.profile(grid)
    occupation = float(np.sum(profile * phi.density()) * gx.cell_volume)
    g_int = cfg.coupling * Ramp(cfg.ramp_duration).integral()
    predicted = g_int * occupation

    stepper = SplitStepper(grid, [box, window], cfg.dt, mass)
    n_steps = _steps_between(0.0, cfg.t_final, cfg.dt)
    start_a = np.array([[cfg.point_a + off, cfg.pointer_center]])
    ens = Ensemble(grid, mass, start_a, 0.0)
    rec = Recorder(ens, cfg.report_every)
    eq = None
    if cfg.n_equilibrium:
        eq = Ensemble(grid, mass, sample_initial_positions(psi0, cfg.n_equilibrium, stream_seed(cfg.seed, 1)), 0.0)

    p0 = psi0.mean_momentum(1)
    series = {"t": [0.0], "pointer_momentum": [p0], "coupling": [0.0], "x_a": [float(start_a[0, 0])]}
    dumps = sorted(float(t) for t in cfg.dump_times)
    snapshots = {0.0: psi0} if any(abs(d) <= 0.5 * cfg.dt for d in dumps) else {}
    amp = psi0.amplitudes
    frame = FieldFrame.from_state(psi0, 0.0)
    max_disp = 0.0
    done = 0
    while done < n_steps:
        k = min(cfg.frame_every, n_steps - done)
        amp = stepper.run(amp, done * cfg.dt, k)
        done += k
        t = done * cfg.dt
        psi = WaveFunction(grid, amp, mass)
        new = FieldFrame.from_state(psi, t)
        ens.advance(frame, new)
        rec.step()
        if eq is not None:
            eq.advance(frame, new)
        frame = new
        xa = float(ens.last_points()[0, 0])
        max_disp = max(max_disp, abs(xa - start_a[0, 0]))
        series["t"].append(t)
        series["pointer_momentum"].append(psi.mean_momentum(1))
        series["coupling"].append(window.strength(t))
        series["x_a"].append(xa)
        if any(abs(t - d) <= 0.5 * cfg.dt for d in dumps):
            snapshots[t] = psi

    psi_t = WaveFunction(grid, amp, mass)
    snapshots.setdefault(done * cfg.dt, psi_t)
    shift = psi_t.mean_momentum(1) - p0
    # fidelity of the reduced particle state to the ground state
    proj = np.tensordot(np.conj(phi.amplitudes[0]), amp[0], axes=(0, 0)) * gx.cell_volume
    fidelity = float(np.sum(np.abs(proj) ** 2) * ygrid.cell_volume)

    report = ScenarioReport(scenario=cfg.scenario, seed=cfg.seed)
    report.pointer_shift = float(shift)
    report.predicted_shift = float(predicted)
    report.window_occupation = occupation
    report.adiabatic_fidelity = fidelity
    report.max_bohm_displacement = max_disp
    report.n_trajectories = 1
    report.truncated = int(np.sum(ens.status != 0))
    report.node_encounters = int(ens.nodes.sum())
    report.clamped_steps = int(ens.clamps.sum())
    report.norm_drift = abs(1.0 - psi_t.norm())
    report.extra.update({"ground_energy": energy, "g_int": g_int,
                         "displacement_limit": cfg.displacement_fraction * abs(cfg.window_center - cfg.point_a)})
    if predicted != 0.0:
        report.shift_relative_error = abs(shift / predicted - 1.0)
    test = _equivariance(cfg, eq, psi_t)
    if test is not None:
        report.equivariance_ks = test.value
        report.equivariance = test.as_dict()
    if fidelity < cfg.adiabatic_min_fidelity:
        raise ValidationError(
            f"adiabaticity violated: final ground-state fidelity {fidelity:.4f} < {cfg.adiabatic_min_fidelity}",
            "ramp_duration")
    if report.shift_relative_error is not None and report.shift_relative_error > cfg.weak_max_error:
        raise ValidationError(
            f"coupling too strong: pointer shift deviates {report.shift_relative_error:.0%} from first order",
            "coupling")
    report.config = cfg.as_dict()
    report.runtime = _runtime(t_start)
    return ScenarioRun(
        config=cfg, report=report, trajectories=rec.bundle(),
        equilibrium_final=None if eq is None else eq.points(), snapshots=snapshots,
        series={k: np.array(v) for k, v in series.items()}, final_state=psi_t,
    )


RUNNERS = {
    "crossing": run_crossing,
    "fast_recorder": run_fast_recorder,
    "spin_recorder": run_spin_recorder,
    "protective": run_protective,
}


def run_scenario(config):
    validate(config)
    return RUNNERS[config.scenario](config)
