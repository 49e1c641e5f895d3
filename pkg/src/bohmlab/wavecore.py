"""Grids, wave functions and pointwise observables.

Natural units (hbar = 1) are used throughout; masses default to 1 per axis.

A :class:`Grid` is a uniform periodic lattice: axis ``a`` has points
``extent[a][0] + i * spacing[a]`` for ``i = 0 .. points[a] - 1``.  Gradients
are spectral.  Density and current are formed on the lattice and then
(bi)linearly interpolated to off-lattice points, which is exact for the
current-to-density ratio of a plane wave at any grid spacing.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridError, OutOfExtentError, StateError
from .kernels import _numpy as _interp

MIN_POINTS = 8
NORM_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    points: tuple
    extent: tuple

    def __post_init__(self):
        if len(self.points) not in (1, 2) or len(self.points) != len(self.extent):
            raise GridError("invalid-points", "grid must have 1 or 2 axes with matching extents")
        for n in self.points:
            if int(n) != n or n < MIN_POINTS:
                raise GridError("invalid-points", f"need at least {MIN_POINTS} points per axis, got {n}")
        for lo, hi in self.extent:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise GridError("invalid-extent", f"extent [{lo}, {hi}] is degenerate")

    @property
    def dims(self):
        return len(self.points)

    @property
    def shape(self):
        return tuple(self.points)

    @property
    def spacing(self):
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.extent, self.points))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axis(self, a):
        lo = self.extent[a][0]
        return lo + self.spacing[a] * np.arange(self.points[a])

    def mesh(self):
        """Coordinate arrays broadcastable to ``shape``."""
        if self.dims == 1:
            return (self.axis(0),)
        return tuple(np.meshgrid(self.axis(0), self.axis(1), indexing="ij"))

    def wavenumbers(self, a):
        return 2.0 * np.pi * np.fft.fftfreq(self.points[a], self.spacing[a])

    def k_mesh(self):
        ks = [self.wavenumbers(a) for a in range(self.dims)]
        if self.dims == 1:
            return tuple(ks)
        return tuple(np.meshgrid(*ks, indexing="ij"))

    def derivative_wavenumbers(self, a):
        """Wavenumbers for spectral differentiation, with the unpaired Nyquist mode zeroed."""
        k = self.wavenumbers(a)
        if self.points[a] % 2 == 0:
            k[self.points[a] // 2] = 0.0
        return k

    def axis_grid(self, a):
        return Grid((self.points[a],), (self.extent[a],))

    def translated(self, offset):
        offset = _per_axis(offset, self.dims, "offset")
        return Grid(self.points, tuple((lo + o, hi + o) for (lo, hi), o in zip(self.extent, offset)))

    def contains(self, point):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return point.shape == (self.dims,) and all(
            lo <= p <= hi for p, (lo, hi) in zip(point, self.extent)
        )


def make_grid(dims, points_per_axis, extent):
    """Build a :class:`Grid`.

    ``points_per_axis`` is an int (shared) or one int per axis; ``extent`` is
    ``[min, max]`` (shared) or one pair per axis.

    >>> make_grid(1, 1024, [-50, 50]).spacing
    (0.09765625,)
    """
    if dims not in (1, 2):
        raise GridError("invalid-points", f"dims must be 1 or 2, got {dims}")
    if np.ndim(points_per_axis) == 0:
        points = (int(points_per_axis),) * dims
    else:
        points = tuple(int(n) for n in points_per_axis)
    ext = np.asarray(extent, dtype=float)
    if ext.ndim == 1:
        ext = np.tile(ext, (dims, 1))
    if ext.shape != (dims, 2) or len(points) != dims:
        raise GridError("invalid-extent", "extent must be [min, max] per axis")
    return Grid(points, tuple((float(lo), float(hi)) for lo, hi in ext))


def _per_axis(value, dims, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, dims)
    if arr.shape != (dims,):
        raise StateError("bad-shape", f"{name} needs {dims} component(s), got {arr.size}")
    return arr


@dataclass(frozen=True)
class GaussianPacketSpec:
    """psi ~ weight * exp(-(x - center)^2 / (4 sigma^2) + i wavevector . (x - center)) on ``spin_level``.

    The phase is zero at the center, so translating every packet of a state
    translates the state without changing the relative phases between packets.
    Scalars are broadcast over the grid's axes.
    """

    center: object = 0.0
    sigma: object = 1.0
    wavevector: object = 0.0
    weight: complex = 1.0
    spin_level: int = 0

    def amplitudes(self, grid):
        c = _per_axis(self.center, grid.dims, "center")
        s = _per_axis(self.sigma, grid.dims, "sigma")
        k = _per_axis(self.wavevector, grid.dims, "wavevector")
        if np.any(s <= 0):
            raise StateError("invalid-sigma", f"sigma must be positive, got {self.sigma}")
        for a, (lo, hi) in enumerate(grid.extent):
            if c[a] - 5 * s[a] < lo or c[a] + 5 * s[a] > hi:
                raise StateError(
                    "support-overflow",
                    f"packet center {c[a]} +/- 5 sigma leaves extent [{lo}, {hi}] on axis {a}",
                )
        out = np.ones(grid.shape, dtype=complex)
        for a, x in enumerate(grid.mesh()):
            out = out * np.exp(-((x - c[a]) ** 2) / (4 * s[a] ** 2) + 1j * k[a] * (x - c[a]))
        return out


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Immutable amplitudes with shape ``(spin_levels, *grid.shape)``."""

    grid: Grid
    amplitudes: np.ndarray
    mass: tuple = field(default=None)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex)
        if amp.shape == self.grid.shape:
            amp = amp[None]
        if amp.ndim != self.grid.dims + 1 or amp.shape[1:] != self.grid.shape or amp.shape[0] not in (1, 2):
            raise StateError("bad-shape", f"amplitude shape {amp.shape} does not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(amp)):
            raise StateError("non-finite", "amplitudes must be finite")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)
        mass = tuple(float(m) for m in _per_axis(1.0 if self.mass is None else self.mass, self.grid.dims, "mass"))
        if any(m <= 0 for m in mass):
            raise StateError("invalid-mass", "mass must be positive")
        object.__setattr__(self, "mass", mass)

    @property
    def spin_levels(self):
        return self.amplitudes.shape[0]

    def with_amplitudes(self, amplitudes):
        return WaveFunction(self.grid, amplitudes, self.mass)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_volume))

    def normalized(self):
        return self.with_amplitudes(self.amplitudes / self.norm())

    def density(self):
        """Spin-summed |psi|^2 on the lattice."""
        a = self.amplitudes
        return np.sum(a.real**2 + a.imag**2, axis=0)

    def level_density(self):
        a = self.amplitudes
        return a.real**2 + a.imag**2

    def gradient(self):
        """Spectral gradient, shape ``(dims, spin_levels, *grid.shape)``."""
        return spectral_gradient(self.amplitudes, self.grid)

    def current(self):
        """Spin-summed probability current on the lattice, shape ``(dims, *grid.shape)``."""
        g = self.gradient()
        a = self.amplitudes
        j = np.sum(a.real[None] * g.imag - a.imag[None] * g.real, axis=1)
        return j / np.reshape(self.mass, (-1,) + (1,) * self.grid.dims)

    def marginal(self, axis=0):
        """Density marginal on ``axis`` (integrated over the other axis and spin)."""
        rho = self.density()
        if self.grid.dims == 2:
            other = 1 - axis
            rho = rho.sum(axis=other) * self.grid.spacing[other]
        return rho

    def mean_position(self, axis=0):
        return float(np.sum(self.grid.axis(axis) * self.marginal(axis)) * self.grid.spacing[axis] / self.norm() ** 2)

    def position_std(self, axis=0):
        x = self.grid.axis(axis)
        w = self.marginal(axis) * self.grid.spacing[axis] / self.norm() ** 2
        m = np.sum(x * w)
        return float(np.sqrt(np.sum((x - m) ** 2 * w)))

    def mean_momentum(self, axis=0):
        """Spectral expectation of the momentum along ``axis``."""
        ak = np.fft.fftn(self.amplitudes, axes=_space_axes(self.grid))
        w = np.abs(ak) ** 2
        k = self.grid.k_mesh()[axis]
        return float(np.sum(w * k[None]) / np.sum(w))

    def overlap(self, other):
        """<self|other> summed over spin levels."""
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.cell_volume)

    def fidelity(self, other):
        return abs(self.overlap(other)) / (self.norm() * other.norm())


def _space_axes(grid):
    return tuple(range(1, grid.dims + 1))


def spectral_gradient(amplitudes, grid):
    axes = _space_axes(grid)
    ak = np.fft.fftn(amplitudes, axes=axes)
    return np.stack(
        [np.fft.ifftn(1j * _kd(grid, a)[None] * ak, axes=axes) for a in range(grid.dims)]
    )


def _kd(grid, a):
    k = grid.derivative_wavenumbers(a)
    if grid.dims == 1:
        return k
    return k[:, None] if a == 0 else k[None, :]


def build_state(specs: Sequence[GaussianPacketSpec], grid, mass=1.0, spin_levels=None):
    """Superpose Gaussian packets (each unit-normalized, then weighted) and renormalize."""
    specs = list(specs)
    if not specs:
        raise StateError("empty-spec-list", "at least one packet spec is required")
    top = max(s.spin_level for s in specs)
    levels = top + 1 if spin_levels is None else int(spin_levels)
    if levels not in (1, 2) or top >= levels or min(s.spin_level for s in specs) < 0:
        raise StateError("invalid-spin-level", "spin levels must be 0 or 1 within spin_levels <= 2")
    amp = np.zeros((levels,) + grid.shape, dtype=complex)
    for s in specs:
        packet = s.amplitudes(grid)
        packet /= np.sqrt(np.sum(np.abs(packet) ** 2) * grid.cell_volume)
        amp[s.spin_level] += complex(s.weight) * packet
    psi = WaveFunction(grid, amp, mass)
    n = psi.norm()
    if n == 0:
        raise StateError("zero-norm", "packet weights cancel to a zero state")
    return psi.with_amplitudes(amp / n)


def _check_point(grid, point):
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if not grid.contains(p):
        raise OutOfExtentError(f"point {p.tolist()} outside grid extent {grid.extent}")
    return p


def lattice_fields(psi):
    """Density (shape) and current (dims, shape) on the lattice."""
    return psi.density(), psi.current()


def local_fields(psi, points, fields=None):
    """Interpolated density (m,) and current (dims, m) at an array of points (m, dims).

    ``fields`` may carry precomputed :func:`lattice_fields`.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, psi.grid.dims)
    rho, j = lattice_fields(psi) if fields is None else fields
    grid = psi.grid
    if grid.dims == 1:
        return _interp.field_1d(pts[:, 0], rho, j[0], grid.extent[0][0], grid.spacing[0])
    return _interp.field_2d(pts, rho, j[0], j[1], grid.extent[0][0], grid.spacing[0],
                            grid.extent[1][0], grid.spacing[1])


def density(psi, point):
    """Spin-summed density at an off-lattice point."""
    p = _check_point(psi.grid, point)
    rho, _ = local_fields(psi, p[None])
    return float(rho[0])


def current(psi, point):
    """Spin-summed probability current vector at an off-lattice point."""
    p = _check_point(psi.grid, point)
    _, j = local_fields(psi, p[None])
    return j[:, 0]
