import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmlab.analysis import (LineageRecord, branch_density, equivariance_test, evolve_lineage,
                              non_crossing_check)
from bohmlab.errors import LineageError, TimeBaseMismatchError, TooFewSamplesError
from bohmlab.guidance import Trajectory, TrajectoryBundle, sample_initial_positions
from bohmlab.wavecore import GaussianPacketSpec, WaveFunction, build_state, density, make_grid

GRID = make_grid(1, 1024, [-50, 50])


@pytest.fixture(scope="module")
def crossing_lineage():
    left = build_state([GaussianPacketSpec(-10, 2, 4.0)], GRID)
    right = build_state([GaussianPacketSpec(10, 2, -4.0)], GRID)
    s = 1 / np.sqrt(2)
    branches = {"left": left.with_amplitudes(s * left.amplitudes), "right": right.with_amplitudes(s * right.amplitudes)}
    return evolve_lineage(branches, None, 0.0, 5.0, 0.005, store_every=50)


class TestEquivariance:
    def test_direct_samples_pass(self):
        psi = build_state([GaussianPacketSpec(-3, 1, 0), GaussianPacketSpec(4, 2, 0, weight=0.6)], GRID)
        x = sample_initial_positions(psi, 10_000, 8)
        t = equivariance_test(x, psi)
        assert t.passed and t.value < 0.02 and t.n == 10_000 and t.kind == "KS"

    def test_point_mass_fails(self):
        psi = build_state([GaussianPacketSpec(0, 3, 0)], GRID)
        t = equivariance_test(np.full(500, 20.0), psi)
        assert t.value > 0.99 and not t.passed

    def test_too_few(self):
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        with pytest.raises(TooFewSamplesError):
            equivariance_test(np.zeros(99), psi)

    def test_nan_rows_dropped(self):
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        x = sample_initial_positions(psi, 1000, 1)
        t = equivariance_test(np.vstack([x, np.full((50, 1), np.nan)]), psi)
        assert t.n == 1000

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-20, 20))
    def test_translation_invariant(self, offset):
        # shift by whole cells so the lattice CDF is translated exactly
        shift = round(offset / GRID.spacing[0]) * GRID.spacing[0]
        psi = build_state([GaussianPacketSpec(0, 1, 0.5)], GRID)
        moved = WaveFunction(GRID.translated(shift), psi.amplitudes)
        x = sample_initial_positions(psi, 500, 4)
        a = equivariance_test(x, psi).value
        b = equivariance_test(x + shift, moved).value
        assert abs(a - b) < 1e-12

    def test_2d_marginal(self):
        grid = make_grid(2, [64, 64], [[-8, 8], [-8, 8]])
        psi = build_state([GaussianPacketSpec([1, -1], 1, 0)], grid)
        p = sample_initial_positions(psi, 5000, 2)
        assert equivariance_test(p, psi, axis=1).value < 0.03
        assert equivariance_test(p[:, ::-1], psi, axis=1).value > 0.3


def bundle_from(x, times=None):
    x = np.asarray(x, dtype=float)
    times = np.arange(x.shape[0], dtype=float) if times is None else times
    n = x.shape[1]
    return TrajectoryBundle(times, x[:, :, None], np.arange(n), np.zeros(n, int), np.zeros(n, int),
                            np.zeros(n, int))


class TestNonCrossing:
    def test_constant_trajectories(self):
        assert non_crossing_check(bundle_from([[0.0, 1.0, 2.0]] * 5)).passed

    def test_swapped_pair(self):
        x = np.array([[0.0, 1.0], [0.4, 0.6], [0.7, 0.3], [1.0, 0.0]])
        check = non_crossing_check(bundle_from(x, np.array([0.0, 0.1, 0.2, 0.3])))
        assert not check.passed
        assert check.violation_time == pytest.approx(0.2)
        assert set(check.pair) == {0, 1}

    def test_trajectory_list(self):
        t = np.arange(4.0)
        trs = [Trajectory(t, np.full((4, 1), v), i, 0, 0) for i, v in enumerate((0.0, 2.0, 1.0))]
        assert non_crossing_check(trs).passed
        bad = trs + [Trajectory(t, np.linspace(-1, 3, 4)[:, None], 9, 0, 0)]
        assert not non_crossing_check(bad).passed

    def test_stopped_trajectory_ignored_after_stop(self):
        x = np.array([[0.0, 1.0], [0.5, np.nan], [0.5, np.nan]])
        assert non_crossing_check(bundle_from(x)).passed

    def test_mismatched_time_base(self):
        a = Trajectory(np.arange(3.0), np.zeros((3, 1)), 0, 0, 0)
        b = Trajectory(np.arange(3.0) * 2, np.ones((3, 1)), 1, 0, 0)
        with pytest.raises(TimeBaseMismatchError):
            non_crossing_check([a, b])


class TestLineage:
    def test_linearity(self, crossing_lineage):
        assert crossing_lineage.linearity_error < 1e-8

    def test_before_overlap_branch_is_total(self, crossing_lineage):
        assert branch_density(crossing_lineage, "left", -10.0, 0.0) == pytest.approx(
            density(crossing_lineage.total[0], -10.0), abs=1e-6)

    def test_overlap_midpoint(self, crossing_lineage):
        # mirror symmetry makes psi_left(0) = psi_right(0): each branch carries half of rho1 + rho2
        # and the total, 4 |psi_left(0)|^2, is twice their sum
        i = crossing_lineage.times.index(2.5)
        t = crossing_lineage.times[i]
        r1 = branch_density(crossing_lineage, "left", 0.0, t)
        r2 = branch_density(crossing_lineage, "right", 0.0, t)
        total = density(crossing_lineage.total[i], 0.0)
        assert r1 == pytest.approx(0.5 * (r1 + r2), rel=1e-10)
        assert total == pytest.approx(2 * (r1 + r2), rel=1e-8)

    def test_after_separation(self, crossing_lineage):
        t = crossing_lineage.times[-1]
        for x in (-11.0, -10.0, 9.5, 10.0, 11.0):
            s = sum(branch_density(crossing_lineage, b, x, t) for b in ("left", "right"))
            assert s == pytest.approx(density(crossing_lineage.total[-1], x), abs=1e-6)

    def test_time_interpolation(self, crossing_lineage):
        t0, t1 = crossing_lineage.times[3], crossing_lineage.times[4]
        a = branch_density(crossing_lineage, "left", -3.0, t0)
        b = branch_density(crossing_lineage, "left", -3.0, t1)
        assert branch_density(crossing_lineage, "left", -3.0, 0.25 * t0 + 0.75 * t1) == pytest.approx(
            0.25 * a + 0.75 * b, rel=1e-12)

    def test_unknown_lineage(self, crossing_lineage):
        with pytest.raises(LineageError):
            branch_density(crossing_lineage, "middle", 0.0, 0.0)
        with pytest.raises(LineageError):
            evolve_lineage({}, None, 0.0, 1.0, 0.1)

    def test_stored_frame_lookup(self, crossing_lineage):
        psi = crossing_lineage.branch("right", 0.5)
        assert isinstance(psi, WaveFunction)
        with pytest.raises(Exception):
            crossing_lineage.branch("right", 0.51)

    def test_add_requires_time_order(self):
        rec = LineageRecord()
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        rec.add(1.0, psi, {"a": psi})
        with pytest.raises(Exception):
            rec.add(0.5, psi, {"a": psi})
