"""Three diagnostics for whether an empty wave can have an observable effect.

``record_orthogonality``
    ``1 - |<unperturbed environment | recorded-branch environment>|`` at the
    final time, from the reduced environment state of the recorded branch.
``in_empty_wave``
    Fraction of trajectories leaving with the branch they did not start in;
    identical to the report's ``swap_fraction``.
``environment_displacement``
    Distance between the environment centroids of the two branches at the
    overlap time, in units of the unrecorded branch's environment width.  An
    internal-level record has no spatial extent, so this is 0.
"""

import numpy as np

from ..errors import LineageError


def _pointer_centroid(psi):
    rho = psi.density().sum(axis=0)
    y = psi.grid.axis(1)
    m = float(np.sum(y * rho) / np.sum(rho))
    return m, float(np.sqrt(np.sum((y - m) ** 2 * rho) / np.sum(rho)))


def record_overlap(branch, environment, free_environment=None):
    """``|<unperturbed environment | environment of branch>|`` from the reduced state."""
    amp = branch.amplitudes
    if environment == "spin":
        weights = np.sum(np.abs(amp) ** 2, axis=tuple(range(1, amp.ndim)))
        return float(np.sqrt(weights[0] / weights.sum()))
    if environment == "pointer":
        chi = free_environment.amplitudes[0]
        dy = branch.grid.spacing[1]
        proj = amp[0] @ np.conj(chi) * dy  # (nx,)
        f = np.sum(np.abs(proj) ** 2) / (np.sum(np.abs(amp) ** 2) * dy)
        return float(np.sqrt(f))
    return 1.0


def analyze_conditions(report, run):
    """Return the three named metrics for a finished two-branch run."""
    lineage = getattr(run, "lineage", None)
    if lineage is None or not lineage.branches:
        raise LineageError(f"scenario {report.scenario!r} does not track branch lineage")
    env = run.environment
    ii = report.swap_fraction
    if env is None or run.recorded_branch is None:
        return {"record_orthogonality": 0.0, "in_empty_wave": ii, "environment_displacement": 0.0}
    t_end = lineage.times[-1]
    branch = lineage.branch(run.recorded_branch, t_end)
    i = 1.0 - record_overlap(branch, env, run.free_environment)
    iii = 0.0
    if env == "pointer":
        other = "left" if run.recorded_branch == "right" else "right"
        rec_y, _ = _pointer_centroid(lineage.branch(run.recorded_branch, report.overlap_time))
        oth_y, width = _pointer_centroid(lineage.branch(other, report.overlap_time))
        iii = abs(rec_y - oth_y) / width
    return {"record_orthogonality": float(i), "in_empty_wave": ii, "environment_displacement": float(iii)}
