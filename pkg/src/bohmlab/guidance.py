"""Bohmian guidance: velocity field, ensemble integration and equilibrium sampling.

The velocity is ``v = j / rho`` (hbar = 1, per-axis mass inside ``j``).  An
ensemble is integrated with classical RK4, one step per interval between two
stored frames, with the velocity field interpolated linearly in time between
them.

Near nodes (``rho < 1e-12 * max rho`` of the frame), or where the velocity
changes too fast across a step, the step is retried with 2, 4, ... 256
substeps; if even the finest split still touches a node, the
step is taken with ``rho`` floored at the threshold and speed clamped to one
grid spacing per frame interval.  Node encounters and clamped substeps are
counted per trajectory.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NodeSingularityError, SamplingError, ValidationError
from .wavecore import _check_point, lattice_fields, local_fields

NODE_RELATIVE = 1e-12
MAX_HALVINGS = 8
STEP_TOL = 1e-3

ALIVE, ESCAPED, NODE = 0, 1, 2
STATUS_NAMES = {ALIVE: "ok", ESCAPED: "escaped", NODE: "node"}

# bit values of the ``flags`` column in trajectory tables
FLAG_NODE = 1
FLAG_CLAMP = 2
FLAG_TRUNCATED = 4


@dataclass(frozen=True)
class BohmConfig:
    position: tuple
    time: float = 0.0


def node_threshold(psi):
    return NODE_RELATIVE * float(np.max(psi.density()))


def velocity_field(psi, point):
    """Guidance velocity ``j / rho`` at ``point``, one component per axis."""
    p = _check_point(psi.grid, point)
    rho, j = local_fields(psi, p[None])
    if rho[0] < node_threshold(psi):
        raise NodeSingularityError(f"density {rho[0]:.3g} below node threshold at {p.tolist()}")
    return j[:, 0] / rho[0]


def velocities(psi, points, fields=None):
    """Vectorized ``j / rho`` at points ``(m, dims)``; NaN where rho is below the node threshold."""
    rho, j = local_fields(psi, points, fields)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(rho >= node_threshold(psi), j / rho, np.nan)
    return v.T


@dataclass(frozen=True, eq=False)
class FieldFrame:
    """A stored state prepared for velocity queries."""

    t: float
    rho: np.ndarray
    j: np.ndarray
    eps: float

    @classmethod
    def from_state(cls, psi, t):
        rho, j = lattice_fields(psi)
        return cls(float(t), np.ascontiguousarray(rho), np.ascontiguousarray(j), NODE_RELATIVE * float(rho.max()))


class Ensemble:
    """Positions of many trajectories advanced frame by frame.

    Parameters
    ----------
    grid, mass
        Configuration space and per-axis masses of the guiding states.
    positions : array (n, dims)
        Starting points at time ``t0``.
    node_budget : int
        Consecutive finest-level substeps allowed on a node before the
        trajectory is stopped with status ``node``.
    step_tol : float
        A step is split when ``substep * (max - min)`` of its four RK4 slopes
        exceeds ``step_tol`` grid spacings.
    """

    def __init__(self, grid, mass, positions, t0=0.0, node_budget=4 << MAX_HALVINGS, step_tol=STEP_TOL,
                 backend=None):
        pos = np.array(positions, dtype=float).reshape(-1, grid.dims)
        for p in pos:
            _check_point(grid, p)
        self.grid = grid
        self.mass = tuple(np.broadcast_to(np.asarray(mass, dtype=float), (grid.dims,)))
        self.n = pos.shape[0]
        self.positions = pos[:, 0].copy() if grid.dims == 1 else pos.copy()
        self.status = np.zeros(self.n, dtype=np.int64)
        self.nodes = np.zeros(self.n, dtype=np.int64)
        self.clamps = np.zeros(self.n, dtype=np.int64)
        self._stuck = np.zeros(self.n, dtype=np.int64)
        self.t = float(t0)
        self.node_budget = int(node_budget)
        self.step_tol = float(step_tol)
        self.backend = kernels.backend if backend is None else backend

    def points(self):
        """Current positions as ``(n, dims)``; NaN for stopped trajectories."""
        p = self.positions.reshape(self.n, -1).copy()
        p[self.status != ALIVE] = np.nan
        return p

    def last_points(self):
        """Current positions as ``(n, dims)``, including where stopped trajectories halted."""
        return self.positions.reshape(self.n, -1).copy()

    def advance(self, frame_a, frame_b):
        """Integrate all live trajectories from ``frame_a.t`` to ``frame_b.t``."""
        h = frame_b.t - frame_a.t
        if not h > 0:
            raise ValidationError("frames must be in increasing time order", "t")
        g = self.grid
        (x0, x1), dx = g.extent[0], g.spacing[0]
        if g.dims == 1:
            self.backend.advance_1d(
                self.positions, self.status, self.nodes, self.clamps, self._stuck,
                frame_a.rho, frame_a.j[0], frame_b.rho, frame_b.j[0],
                frame_a.eps, frame_b.eps, x0, dx, x0, x1, h, dx / h, self.step_tol * dx,
                MAX_HALVINGS, self.node_budget,
            )
        else:
            (y0, y1), dy = g.extent[1], g.spacing[1]
            self.backend.advance_2d(
                self.positions, self.status, self.nodes, self.clamps, self._stuck,
                frame_a.rho, frame_a.j[0], frame_a.j[1], frame_b.rho, frame_b.j[0], frame_b.j[1],
                frame_a.eps, frame_b.eps, x0, dx, y0, dy, x0, x1, y0, y1,
                h, dx / h, dy / h, self.step_tol * min(dx, dy), MAX_HALVINGS, self.node_budget,
            )
        self.t = frame_b.t

    def flags(self):
        return ((self.nodes > 0) * FLAG_NODE + (self.clamps > 0) * FLAG_CLAMP
                + (self.status != ALIVE) * FLAG_TRUNCATED)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions of one trajectory at every reporting time.

    ``positions`` has shape ``(len(times), dims)``; a trajectory that left the
    grid or died on a node stops early and ``times`` ends at its last report.
    """

    times: np.ndarray
    positions: np.ndarray
    seed: int
    node_count: int
    clamp_count: int
    status: str = "ok"

    @property
    def samples(self):
        return [BohmConfig(tuple(p), float(t)) for t, p in zip(self.times, self.positions)]

    @property
    def truncated(self):
        return self.status != "ok"

    @property
    def flags(self):
        return ((self.node_count > 0) * FLAG_NODE + (self.clamp_count > 0) * FLAG_CLAMP
                + self.truncated * FLAG_TRUNCATED)


@dataclass(frozen=True, eq=False)
class TrajectoryBundle:
    """Many trajectories on a common time base.

    ``positions`` is ``(len(times), n, dims)`` with NaN after a trajectory stops.
    """

    times: np.ndarray
    positions: np.ndarray
    seeds: np.ndarray
    nodes: np.ndarray
    clamps: np.ndarray
    status: np.ndarray

    def __len__(self):
        return self.positions.shape[1]

    def __getitem__(self, i):
        keep = ~np.isnan(self.positions[:, i, 0])
        return Trajectory(self.times[keep], self.positions[keep, i], int(self.seeds[i]),
                          int(self.nodes[i]), int(self.clamps[i]), STATUS_NAMES[int(self.status[i])])

    @property
    def final(self):
        return self.positions[-1]

    @property
    def alive(self):
        return self.status == ALIVE

    def flags(self):
        return ((self.nodes > 0) * FLAG_NODE + (self.clamps > 0) * FLAG_CLAMP
                + (self.status != ALIVE) * FLAG_TRUNCATED)


class Recorder:
    """Snapshots of an :class:`Ensemble` every ``every`` frame intervals."""

    def __init__(self, ensemble, every=1):
        self.ensemble = ensemble
        self.every = max(1, int(every))
        self._count = 0
        self.times = [ensemble.t]
        self.snapshots = [ensemble.points()]

    def step(self):
        self._count += 1
        if self._count % self.every == 0:
            self.times.append(self.ensemble.t)
            self.snapshots.append(self.ensemble.points())

    def bundle(self, seeds=None):
        e = self.ensemble
        seeds = np.arange(e.n) if seeds is None else np.asarray(seeds)
        return TrajectoryBundle(np.array(self.times), np.stack(self.snapshots), seeds,
                                e.nodes.copy(), e.clamps.copy(), e.status.copy())


def report_stride(frame_dt, report_dt):
    if report_dt is None:
        return 1
    k = int(round(report_dt / frame_dt))
    if k < 1 or abs(k * frame_dt - report_dt) > 1e-9 * report_dt:
        raise ValidationError(f"report_dt {report_dt} must be a positive multiple of the frame interval {frame_dt}",
                              "report_dt")
    return k


def integrate_ensemble(record, starts, report_dt=None, seeds=None, backend=None):
    """Integrate trajectories from ``starts`` (n, dims) through all frames of ``record``."""
    grid = record.grid
    ens = Ensemble(grid, record.frames[0].mass, starts, record.times[0], backend=backend)
    rec = Recorder(ens, report_stride(record.dt, report_dt))
    prev = FieldFrame.from_state(record.frames[0], record.times[0])
    for t, psi in zip(record.times[1:], record.frames[1:]):
        cur = FieldFrame.from_state(psi, t)
        ens.advance(prev, cur)
        rec.step()
        prev = cur
    return rec.bundle(seeds)


def integrate_trajectory(record, start, report_dt=None, seed=0):
    """Single-trajectory form of :func:`integrate_ensemble`."""
    if isinstance(start, BohmConfig):
        if abs(start.time - record.times[0]) > 1e-12:
            raise ValidationError("start time must equal the record's first time", "time")
        start = start.position
    bundle = integrate_ensemble(record, np.atleast_1d(np.asarray(start, dtype=float))[None], report_dt, [seed])
    return bundle[0]


def _cell_masses(psi):
    """Probability per lattice cell, density taken as the corner average (periodic)."""
    rho = psi.density()
    if psi.grid.dims == 1:
        w = 0.5 * (rho + np.roll(rho, -1))
    else:
        r1 = rho + np.roll(rho, -1, axis=0)
        w = 0.25 * (r1 + np.roll(r1, -1, axis=1))
    return w / w.sum()


def lattice_cdf(psi, axis=0):
    """Nodes and CDF values of the piecewise-linear marginal CDF used for sampling and KS tests."""
    w = _cell_masses(psi)
    if psi.grid.dims == 2:
        w = w.sum(axis=1 - axis)
    lo = psi.grid.extent[axis][0]
    nodes = lo + psi.grid.spacing[axis] * np.arange(w.size + 1)
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    return nodes, cdf


def _inverse(u, nodes, cdf):
    # position of probability u on a piecewise-linear CDF (cells with zero mass are skipped)
    i = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, cdf.size - 2)
    span = cdf[i + 1] - cdf[i]
    f = np.where(span > 0, (u - cdf[i]) / np.where(span > 0, span, 1.0), 0.5)
    return nodes[i] + f * (nodes[i + 1] - nodes[i])


def sample_initial_positions(psi, n, master_seed, min_acceptance=1e-4):
    """Draw ``n`` points from ``|psi|^2``; returns an ``(n, dims)`` array.

    Point ``i`` uses its own generator spawned from ``master_seed`` so each
    point is independent of ``n`` and of evaluation order.  1D states and 2D
    product states use the inverse CDF per axis.  Other 2D states use
    rejection sampling with the product of the axis marginals as envelope.
    """
    n = int(n)
    if n < 1:
        raise ValidationError("need at least one sample", "n")
    children = np.random.SeedSequence(int(master_seed)).spawn(n)
    if psi.grid.dims == 1:
        nodes, cdf = lattice_cdf(psi)
        u = np.array([np.random.Generator(np.random.PCG64(c)).random() for c in children])
        return _inverse(u, nodes, cdf)[:, None]

    w = _cell_masses(psi)
    wx, wy = w.sum(axis=1), w.sum(axis=0)
    env = np.outer(wx, wy)
    nx, cx = lattice_cdf(psi, 0)
    ny, cy = lattice_cdf(psi, 1)
    if np.max(np.abs(w - env)) <= 1e-12 * np.max(w):
        u = np.array([np.random.Generator(np.random.PCG64(c)).random(2) for c in children])
        return np.column_stack([_inverse(u[:, 0], nx, cx), _inverse(u[:, 1], ny, cy)])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, w / env, 0.0)
    bound = float(ratio.max())
    if 1.0 / bound < min_acceptance:
        raise SamplingError(f"rejection acceptance {1.0 / bound:.2e} below {min_acceptance:.0e}")
    dx, dy = psi.grid.spacing
    x0, y0 = psi.grid.extent[0][0], psi.grid.extent[1][0]
    max_tries = int(50 * bound) + 1000
    out = np.empty((n, 2))
    for k, c in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(c))
        for _ in range(max_tries):
            u = rng.random(3)
            x, y = _inverse(u[0], nx, cx), _inverse(u[1], ny, cy)
            i = min(int((x - x0) / dx), w.shape[0] - 1)
            j = min(int((y - y0) / dy), w.shape[1] - 1)
            if u[2] * bound < ratio[i, j]:
                out[k] = x, y
                break
        else:
            raise SamplingError(f"rejection sampling exhausted {max_tries} tries for point {k}")
    return out


def write_trajectories(path, bundle):
    """Comma-separated table: ``id,t,x[,y],flags`` with one row per trajectory per reported time."""
    dims = bundle.positions.shape[2]
    cols = ["id", "t", "x", "y"][: 2 + dims] + ["flags"]
    flags = bundle.flags()
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(bundle)):
            pos = bundle.positions[:, i]
            for t, p in zip(bundle.times, pos):
                if np.isnan(p[0]):
                    break
                fh.write(f"{bundle.seeds[i]},{float(t)!r},{','.join(repr(float(v)) for v in p)},{flags[i]}\n")


def read_trajectories(path):
    """Load a table written by :func:`write_trajectories` as a dict ``id -> (times, positions, flags)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = {}
    for tid in np.unique(data[:, 0]).astype(int):
        rows = data[data[:, 0] == tid]
        out[int(tid)] = (rows[:, 1], rows[:, 2:-1], int(rows[0, -1]))
    return out
