"""Command-line front-end.

::

    bohmlab run <config> <outdir> [key=value ...]
    bohmlab list-scenarios
    bohmlab export-plotdata <outdir>

Exit status is 0 on success, 2 for parse errors, 3 for validation errors and
4 for runtime errors.  Failures also print one JSON line on stderr with the
error category, message and, when known, the offending field and line.

A run directory holds ``report.json``, ``trajectories.csv``, ``series.csv``,
``equilibrium.csv`` (if an equilibrium ensemble ran), columnar state dumps in
``frames/`` and, written last, ``manifest.json``.
"""

import argparse
import glob
import json
import os
import sys
import time
from importlib import resources

import numpy as np

from . import __version__
from .errors import BohmLabError, MissingArtifactsError
from .guidance import read_trajectories, write_trajectories
from .propagator import read_frame, write_frame
from .scenarios import DESCRIPTIONS, SCENARIO_IDS, apply_overrides, load_config, run_scenario, validate
from .scenarios.report import dumps, read_report, write_report

EXIT_CODES = {"parse": 2, "validation": 3, "runtime": 4}
# branch outlines enclose density above this fraction of the branch maximum
OUTLINE_FRACTION = 1e-2


def _g(v):
    return repr(float(v))


def default_config_path(scenario):
    return str(resources.files("bohmlab") / "configs" / f"{scenario}.cfg")


def _frame_name(label, t):
    return f"{label}_t{t:.6f}.dat"


def _write_series(path, series):
    keys = list(series)
    data = np.column_stack([np.asarray(series[k], dtype=float) for k in keys])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=",".join(keys), comments="")


def write_run(run, outdir, config_path=None, started=None):
    """Write every artifact of ``run`` into ``outdir``; returns the manifest dict."""
    os.makedirs(os.path.join(outdir, "frames"), exist_ok=True)
    artifacts = []

    def add(name):
        artifacts.append(name)
        return os.path.join(outdir, name)

    write_trajectories(add("trajectories.csv"), run.trajectories)
    if run.series:
        _write_series(add("series.csv"), run.series)
    if run.equilibrium_final is not None:
        pts = run.equilibrium_final
        cols = ["x", "y"][: pts.shape[1]]
        np.savetxt(add("equilibrium.csv"), pts, delimiter=",", fmt="%.17g", header=",".join(cols), comments="")
    for t in sorted(run.snapshots):
        write_frame(add(f"frames/{_frame_name('total', t)}"), run.snapshots[t], t)
    if run.lineage is not None:
        for name, states in run.lineage.branches.items():
            for t, psi in zip(run.lineage.times, states):
                write_frame(add(f"frames/{_frame_name('branch-' + name, t)}"), psi, t)

    report = run.report
    report.artifacts = {"files": ["report.json"] + artifacts}
    write_report(add("report.json"), report)

    manifest = {
        "config": None if config_path is None else os.path.abspath(config_path),
        "outdir": os.path.abspath(outdir),
        "scenario": report.scenario,
        "seed": report.seed,
        "artifacts": artifacts,
        "version": __version__,
        "runtime_s": None if started is None else time.perf_counter() - started,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        fh.write(dumps(manifest) + "\n")
    return manifest


def cmd_run(config_path, outdir, overrides=()):
    """Run the scenario described by ``config_path``; returns the manifest."""
    started = time.perf_counter()
    config = validate(apply_overrides(load_config(config_path), list(overrides)))
    run = run_scenario(config)
    return write_run(run, outdir, config_path, started)


def cmd_list_scenarios():
    """One line per scenario: id, default config path, description."""
    return "\n".join(f"{s}\t{default_config_path(s)}\t{DESCRIPTIONS[s]}" for s in SCENARIO_IDS)


def _require(outdir, name):
    path = os.path.join(outdir, name)
    if not os.path.exists(path):
        raise MissingArtifactsError(f"{path} not found; is {outdir} a completed run directory?")
    return path


def _branch_outline(rows, label, t, pos, rho):
    """Append support outline rows: x intervals in 1D, per-column y ranges in 2D."""
    inside = rho >= OUTLINE_FRACTION * rho.max()
    if len(pos) == 1:
        x = pos[0]
        edges = np.diff(np.concatenate([[0], inside.astype(np.int8), [0]]))
        for a, b in zip(np.nonzero(edges == 1)[0], np.nonzero(edges == -1)[0] - 1):
            rows.append(f"{label} {_g(t)} {_g(x[a])} {_g(x[b])}")
        return
    x, y = pos
    for i in np.nonzero(inside.any(axis=1))[0]:
        ys = y[i][inside[i]]
        rows.append(f"{label} {_g(t)} {_g(x[i, 0])} {_g(ys.min())} {_g(ys.max())}")


def cmd_export_plotdata(outdir):
    """Write plot-ready columnar text into ``outdir/plot``; returns the written paths."""
    _require(outdir, "manifest.json")
    report = read_report(_require(outdir, "report.json"))
    tracks = read_trajectories(_require(outdir, "trajectories.csv"))
    plot = os.path.join(outdir, "plot")
    os.makedirs(plot, exist_ok=True)
    written = []

    # (a) trajectory polylines with finite-difference velocities, one gnuplot block per trajectory
    path = os.path.join(plot, "trajectories.dat")
    with open(path, "w") as fh:
        dims = next(iter(tracks.values()))[1].shape[1] if tracks else 1
        names = ["x", "y"][:dims]
        fh.write(f"# id t {' '.join(names)} {' '.join('v' + n for n in names)}\n")
        for tid, (times, pos, _) in tracks.items():
            vel = np.gradient(pos, times, axis=0) if len(times) > 1 else np.zeros_like(pos)
            for t, p, v in zip(times, pos, vel):
                fh.write(f"{tid} {_g(t)} {' '.join(map(_g, p))} {' '.join(map(_g, v))}\n")
            fh.write("\n\n")
    written.append(path)

    # (b) density heat maps and (c) branch support outlines
    outline = []
    for frame in sorted(glob.glob(os.path.join(outdir, "frames", "*.dat"))):
        label = os.path.basename(frame).rsplit("_t", 1)[0]
        t, pos, amp = read_frame(frame)
        rho = np.sum(np.abs(amp) ** 2, axis=0)
        if label == "total":
            path = os.path.join(plot, f"density_t{t:.6f}.dat")
            cols = [p.ravel() for p in pos] + [rho.ravel()]
            names = ["x", "y"][: len(pos)]
            np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=" ".join(names + ["density"]))
            written.append(path)
        elif label.startswith("branch-"):
            _branch_outline(outline, label[len("branch-"):], t, pos, rho)
    if outline:
        dims = len(pos)
        path = os.path.join(plot, "branch_outlines.dat")
        head = "# branch t x_lo x_hi" if dims == 1 else "# branch t x y_lo y_hi"
        with open(path, "w") as fh:
            fh.write(head + "\n" + "\n".join(outline) + "\n")
        written.append(path)

    # pointer record
    series_path = os.path.join(outdir, "series.csv")
    if os.path.exists(series_path):
        with open(series_path) as fh:
            keys = fh.readline().strip().split(",")
        data = np.loadtxt(series_path, delimiter=",", skiprows=1, ndmin=2)
        want = [k for k in ("pointer_momentum", "coupling", "y_left", "y_right") if k in keys]
        if want:
            path = os.path.join(plot, "pointer_series.dat")
            cols = [data[:, keys.index("t")]] + [data[:, keys.index(k)] for k in want]
            np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=" ".join(["t"] + want))
            written.append(path)

    with open(os.path.join(plot, "index.json"), "w") as fh:
        fh.write(dumps({"scenario": report["scenario"], "files": [os.path.basename(p) for p in written]}) + "\n")
    return written


def _error_line(exc):
    info = {"error": getattr(exc, "category", "runtime"), "type": type(exc).__name__, "message": str(exc)}
    for key in ("field", "line"):
        if getattr(exc, key, None) is not None:
            info[key] = getattr(exc, key)
    return json.dumps(info)


def build_parser():
    parser = argparse.ArgumentParser(prog="bohmlab", description="Bohmian trajectory scenarios.")
    parser.add_argument("--version", action="version", version=f"bohmlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario config and write its artifacts")
    p.add_argument("config")
    p.add_argument("outdir")
    p.add_argument("overrides", nargs="*", metavar="key=value")
    sub.add_parser("list-scenarios", help="list scenario ids with their default configs")
    p = sub.add_parser("export-plotdata", help="write plot-ready text files for a finished run")
    p.add_argument("outdir")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            manifest = cmd_run(args.config, args.outdir, args.overrides)
            print(os.path.join(manifest["outdir"], "manifest.json"))
        elif args.command == "list-scenarios":
            print(cmd_list_scenarios())
        else:
            for path in cmd_export_plotdata(args.outdir):
                print(path)
    except (BohmLabError, OSError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return EXIT_CODES.get(getattr(exc, "category", "runtime"), 4)
    return 0


if __name__ == "__main__":
    sys.exit(main())
