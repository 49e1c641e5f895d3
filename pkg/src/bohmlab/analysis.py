"""Statistical checks on trajectory ensembles and branch-lineage bookkeeping."""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import LineageError, TimeBaseMismatchError, TooFewSamplesError, ValidationError
from .guidance import lattice_cdf
from .propagator import SplitStepper, _steps_between
from .wavecore import _check_point

MIN_KS_SAMPLES = 100


@dataclass(frozen=True)
class DistributionTest:
    kind: str
    value: float
    n: int
    threshold: float

    @property
    def passed(self):
        return self.value < self.threshold

    def as_dict(self):
        return {"kind": self.kind, "value": self.value, "n": self.n, "threshold": self.threshold,
                "passed": self.passed}


def equivariance_test(positions, psi, axis=0, threshold=0.02):
    """Kolmogorov-Smirnov distance between sample positions and the ``|psi|^2`` marginal on ``axis``.

    ``positions`` is ``(n,)`` or ``(n, dims)``; NaN rows (stopped trajectories) are dropped.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 2:
        pos = pos[:, axis]
    pos = pos[~np.isnan(pos)]
    if pos.size < MIN_KS_SAMPLES:
        raise TooFewSamplesError(f"need at least {MIN_KS_SAMPLES} samples, got {pos.size}")
    nodes, cdf = lattice_cdf(psi, axis)
    res = stats.kstest(pos, lambda x: np.interp(x, nodes, cdf))
    return DistributionTest("KS", float(res.statistic), int(pos.size), float(threshold))


@dataclass(frozen=True)
class CrossingCheck:
    passed: bool
    violation_time: float = None
    pair: tuple = None


def non_crossing_check(trajectories):
    """Check that 1D trajectories keep their initial order at every reported time.

    Accepts a :class:`~bohmlab.guidance.TrajectoryBundle` or a list of
    :class:`~bohmlab.guidance.Trajectory`.  Stopped trajectories are ignored
    from the time they stop.
    """
    if hasattr(trajectories, "positions") and np.ndim(trajectories.positions) == 3:
        times = trajectories.times
        pos = trajectories.positions
        if pos.shape[2] != 1:
            raise ValidationError("non-crossing applies to 1D trajectories", "dims")
        x = pos[:, :, 0]
    else:
        trajectories = list(trajectories)
        if not trajectories:
            return CrossingCheck(True)
        times = trajectories[0].times
        rows = []
        for tr in trajectories:
            if tr.positions.shape[1] != 1:
                raise ValidationError("non-crossing applies to 1D trajectories", "dims")
            k = len(tr.times)
            if k > len(times) or not np.array_equal(tr.times, times[:k]):
                raise TimeBaseMismatchError("trajectories do not share a time base")
            col = np.full(len(times), np.nan)
            col[:k] = tr.positions[:, 0]
            rows.append(col)
        x = np.column_stack(rows)
    order = np.argsort(x[0], kind="stable")
    xs = x[:, order]
    for ti in range(xs.shape[0]):
        row = xs[ti]
        live = np.nonzero(~np.isnan(row))[0]
        d = np.diff(row[live])
        bad = np.nonzero(d < 0)[0]
        if bad.size:
            a, b = order[live[bad[0]]], order[live[bad[0] + 1]]
            return CrossingCheck(False, float(times[ti]), (int(a), int(b)))
    return CrossingCheck(True)


@dataclass(eq=False)
class LineageRecord:
    """Separately propagated branches stored alongside the full state.

    ``branches`` maps a lineage id to a list of states, one per entry of
    ``times``; ``total`` holds the full state at the same times.
    """

    times: list = field(default_factory=list)
    total: list = field(default_factory=list)
    branches: dict = field(default_factory=dict)
    linearity_error: float = 0.0

    def add(self, t, total, branches):
        if self.times and t <= self.times[-1]:
            raise ValidationError("lineage frames must be added in time order", "t")
        self.times.append(float(t))
        self.total.append(total)
        for name, psi in branches.items():
            self.branches.setdefault(name, []).append(psi)
        s = sum(psi.amplitudes for psi in branches.values())
        self.linearity_error = max(self.linearity_error, float(np.max(np.abs(s - total.amplitudes))))

    def branch(self, lineage_id, t):
        """Branch state at a stored time."""
        frames = self._frames(lineage_id)
        i = self._index(t)
        return frames[i]

    def _frames(self, lineage_id):
        try:
            return self.branches[lineage_id]
        except KeyError:
            raise LineageError(f"unknown lineage id {lineage_id!r}; known: {sorted(self.branches)}") from None

    def _index(self, t):
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValidationError(f"no stored frame at t = {t}", "t")
        return i


def branch_density(record, lineage_id, point, t):
    """Density of one branch at ``point`` and time ``t``.

    Between stored frames the density is interpolated linearly in time.
    """
    from .wavecore import density

    frames = record._frames(lineage_id)
    times = np.asarray(record.times)
    if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
        raise ValidationError(f"t = {t} outside the lineage record [{times[0]}, {times[-1]}]", "t")
    _check_point(frames[0].grid, point)
    i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 1))
    if i == len(times) - 1 or abs(times[i] - t) <= 1e-12:
        return density(frames[i], point)
    s = (t - times[i]) / (times[i + 1] - times[i])
    return (1 - s) * density(frames[i], point) + s * density(frames[i + 1], point)


def evolve_lineage(branches, potential, t0, t1, dt, store_every=1):
    """Propagate each branch and their sum with one shared stepper.

    ``branches`` maps lineage ids to :class:`~bohmlab.wavecore.WaveFunction`
    objects on a common grid.  Every ``store_every`` steps the full state and
    all branches are stored in the returned :class:`LineageRecord`.
    """
    if not branches:
        raise LineageError("no branches to track")
    first = next(iter(branches.values()))
    stepper = SplitStepper(first.grid, potential, dt, first.mass)
    stepper.check_target(first.spin_levels)
    n = _steps_between(t0, t1, dt)
    amps = {k: np.array(v.amplitudes) for k, v in branches.items()}
    total = sum(amps.values())
    rec = LineageRecord()
    rec.add(t0, first.with_amplitudes(total), {k: first.with_amplitudes(a) for k, a in amps.items()})
    done = 0
    store_every = max(1, int(store_every))
    while done < n:
        k = min(store_every, n - done)
        t = t0 + done * dt
        total = stepper.run(total, t, k)
        amps = {name: stepper.run(a, t, k) for name, a in amps.items()}
        done += k
        rec.add(t0 + done * dt, first.with_amplitudes(total), {name: first.with_amplitudes(a) for name, a in amps.items()})
    return rec
