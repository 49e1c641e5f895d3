import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmlab.errors import GridError, OutOfExtentError, StateError
from bohmlab.propagator import Box, relax_ground_state
from bohmlab.wavecore import (GaussianPacketSpec, WaveFunction, build_state, current, density, lattice_fields,
                              local_fields, make_grid)

GRID = make_grid(1, 1024, [-50, 50])


def mirror_pair(grid=GRID, c=10.0, k=1.0):
    return build_state([GaussianPacketSpec(-c, 1.0, k), GaussianPacketSpec(c, 1.0, -k)], grid)


class TestGrid:
    def test_1d_spacing(self):
        assert GRID.spacing[0] == pytest.approx(100 / 1024, rel=1e-15)
        assert GRID.shape == (1024,)

    def test_2d_spacings(self):
        g = make_grid(2, [512, 256], [[-40, 40], [-20, 20]])
        assert g.dims == 2
        assert g.spacing == (0.15625, 0.15625)

    def test_too_few_points(self):
        with pytest.raises(GridError) as err:
            make_grid(1, 4, [0, 1])
        assert err.value.code == "invalid-points"

    def test_degenerate_extent(self):
        with pytest.raises(GridError) as err:
            make_grid(1, 64, [1, 1])
        assert err.value.code == "invalid-extent"

    def test_translated(self):
        g = GRID.translated(3.0)
        assert g.extent[0] == (-47.0, 53.0)
        assert np.allclose(g.axis(0) - GRID.axis(0), 3.0)


class TestBuildState:
    def test_single_packet_norm_and_mean(self):
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        assert abs(psi.norm() - 1) < 1e-9
        assert abs(psi.mean_position()) < 1e-12

    def test_mean_momentum_equals_wavevector(self):
        psi = build_state([GaussianPacketSpec(0, 1, 2.0)], GRID)
        assert psi.mean_momentum() == pytest.approx(2.0, abs=1e-6)

    def test_two_packets_split_weight(self):
        psi = mirror_pair()
        rho = psi.density() * GRID.spacing[0]
        x = GRID.axis(0)
        assert abs(rho[x < 0].sum() - 0.5) < 1e-9
        assert abs(rho[x >= 0].sum() - 0.5) < 1e-9

    def test_support_overflow(self):
        with pytest.raises(StateError) as err:
            build_state([GaussianPacketSpec(47, 1, 0)], GRID)
        assert err.value.code == "support-overflow"

    def test_empty_spec_list(self):
        with pytest.raises(StateError) as err:
            build_state([], GRID)
        assert err.value.code == "empty-spec-list"

    def test_non_positive_sigma(self):
        with pytest.raises(StateError):
            build_state([GaussianPacketSpec(0, -1, 0)], GRID)

    def test_spin_levels_follow_specs(self):
        psi = build_state([GaussianPacketSpec(-10, 1, 1, spin_level=0), GaussianPacketSpec(10, 1, -1, spin_level=1)],
                          GRID)
        assert psi.spin_levels == 2
        assert abs(psi.norm() - 1) < 1e-12

    def test_amplitudes_are_read_only(self):
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        with pytest.raises(ValueError):
            psi.amplitudes[0, 0] = 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(StateError):
            WaveFunction(GRID, np.full(GRID.shape, np.nan))


class TestDensity:
    def test_gaussian_peak(self):
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        assert density(psi, 0.0) == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-4)

    def test_gaussian_off_lattice(self):
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        f, dx = 0.3, GRID.spacing[0]
        x = 7 * dx + f * dx
        exact = np.exp(-x**2 / 2) / np.sqrt(2 * np.pi)
        # linear interpolation error f (1 - f) dx^2 / 2 * |rho''|, with |rho''| <= 1/sqrt(2 pi)
        bound = f * (1 - f) * dx**2 / 2 / np.sqrt(2 * np.pi)
        assert abs(density(psi, x) - exact) <= bound

    def test_box_ground_state_midpoint(self):
        grid = make_grid(1, 128, [-0.25, 1.25])
        phi, _ = relax_ground_state(Box(0, 1), grid)
        assert density(phi, 0.5) == pytest.approx(2.0, rel=0.01)

    def test_node_is_nearly_zero(self):
        # cos(2x) envelope: nodes at x = pi/4 + n pi/2
        psi = build_state([GaussianPacketSpec(0, 3, 2.0), GaussianPacketSpec(0, 3, -2.0)], GRID)
        grad = np.abs(psi.gradient()[0, 0])
        bound = 0.25 * GRID.spacing[0] ** 2 * grad.max() ** 2
        assert density(psi, np.pi / 4) < bound

    def test_out_of_extent(self):
        psi = build_state([GaussianPacketSpec(0, 1, 0)], GRID)
        with pytest.raises(OutOfExtentError):
            density(psi, 60.0)
        with pytest.raises(OutOfExtentError):
            current(psi, -51.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-50, 50))
    def test_non_negative(self, x):
        psi = mirror_pair(k=3.0)
        assert density(psi, x) >= 0.0


class TestCurrent:
    def test_real_state_has_no_current(self):
        grid = make_grid(1, 128, [-0.25, 1.25])
        phi, _ = relax_ground_state(Box(0, 1), grid)
        phi = phi.with_amplitudes(np.abs(phi.amplitudes))
        assert np.max(np.abs(phi.current())) < 1e-10

    def test_packet_center(self):
        psi = build_state([GaussianPacketSpec(0, 1, 2.0)], GRID)
        assert current(psi, 0.0)[0] == pytest.approx(2 * density(psi, 0.0), abs=1e-4)

    def test_mirror_symmetry_point(self):
        psi = mirror_pair(c=2.0, k=1.5)
        assert abs(current(psi, 0.0)[0]) < 1e-10

    def test_mass_scales_current(self):
        psi = build_state([GaussianPacketSpec(0, 1, 2.0)], GRID)
        heavy = WaveFunction(GRID, psi.amplitudes, 4.0)
        assert current(heavy, 0.3)[0] == pytest.approx(current(psi, 0.3)[0] / 4, rel=1e-12)

    def test_2d_components(self):
        g = make_grid(2, 64, [-10, 10])
        psi = build_state([GaussianPacketSpec([0, 0], 1, [1.0, -2.0])], g)
        j = current(psi, [0.0, 0.0])
        rho = density(psi, [0.0, 0.0])
        assert j == pytest.approx([rho, -2 * rho], abs=1e-4)


class TestSpinSums:
    def test_density_and_current_are_level_sums(self):
        s0 = GaussianPacketSpec(-1, 1, 1.0, spin_level=0)
        s1 = GaussianPacketSpec(1.5, 1, -2.0, weight=0.7j, spin_level=1)
        both = build_state([s0, s1], GRID)
        scale = both.amplitudes
        lvl0 = WaveFunction(GRID, np.stack([scale[0], 0 * scale[0]]))
        lvl1 = WaveFunction(GRID, np.stack([0 * scale[1], scale[1]]))
        pts = np.linspace(-5, 5, 37)[:, None]
        r, j = local_fields(both, pts)
        r0, j0 = local_fields(lvl0, pts)
        r1, j1 = local_fields(lvl1, pts)
        assert np.max(np.abs(r - r0 - r1)) < 1e-14
        assert np.max(np.abs(j - j0 - j1)) < 1e-14


def test_interpolation_hits_lattice_values():
    psi = mirror_pair(c=1.0, k=2.0)
    rho, j = lattice_fields(psi)
    x = GRID.axis(0)[400:420]
    r, c = local_fields(psi, x[:, None])
    assert np.allclose(r, rho[400:420], rtol=0, atol=1e-15)
    assert np.allclose(c[0], j[0, 400:420], rtol=0, atol=1e-15)
