"""Split-operator time evolution and imaginary-time relaxation.

A potential is a sequence of terms (:class:`Box`, :class:`Harmonic`,
:class:`Bump`, :class:`InteractionWindow`; ``None`` or :class:`Zero` for the
free particle).  Real-time stepping is Strang splitting

    psi(t + dt) = K_half  P(t + dt/2)  K_half  psi(t)

where ``K_half = exp(-i dt T / 2)`` acts in the spectral basis and ``P``
multiplies by ``exp(-i dt V)`` and applies interaction windows.  Between
stored frames consecutive kinetic halves are merged, which is the same map
with half the FFTs.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConvergenceError, NonFiniteError, StabilityError, TargetMismatchError, ValidationError
from .wavecore import WaveFunction, _space_axes

PHASE_GUARD = 0.5
NORM_FLAG = 1e-9
# 1%..99% of a tanh step spans 4.6 units of its argument
_TANH_SPAN = 2 * np.arctanh(0.98)


@dataclass(frozen=True)
class Ramp:
    """g(t) = sin^2(pi (t - start) / duration) on [start, start + duration], zero elsewhere."""

    duration: float
    start: float = 0.0

    def __call__(self, t):
        s = (t - self.start) / self.duration
        if s <= 0.0 or s >= 1.0:
            return 0.0
        return float(np.sin(np.pi * s) ** 2)

    def integral(self):
        return 0.5 * self.duration


def smooth_step(u, width):
    """0 -> 1 across u = 0; 1%..99% rise spans ``width``."""
    return 0.5 * (1.0 + np.tanh(u * (_TANH_SPAN / width)))


def window_profile(x, center, width, edge):
    """Flat-top window of full width ``width`` with tanh edges (1%..99% over ``edge``)."""
    return smooth_step(x - (center - 0.5 * width), edge) - smooth_step(x - (center + 0.5 * width), edge)


@dataclass(frozen=True)
class Zero:
    kind = "zero"
    time_dependent = False

    def values(self, grid, t, mass):
        return np.zeros(grid.shape)

    def validate(self, grid):
        pass


@dataclass(frozen=True)
class Box:
    """Soft high walls outside ``[left, right]`` on ``axis``; edges rise over ``edge_spacings`` cells."""

    left: float = 0.0
    right: float = 1.0
    height: float = 1e4
    edge_spacings: float = 4.0
    axis: int = 0
    kind = "box"
    time_dependent = False

    def values(self, grid, t, mass):
        x = grid.mesh()[self.axis]
        w = self.edge_spacings * grid.spacing[self.axis]
        return self.height * (smooth_step(self.left - x, w) + smooth_step(x - self.right, w))

    def validate(self, grid):
        lo, hi = grid.extent[self.axis]
        d = grid.spacing[self.axis]
        if not np.isfinite(self.height) or self.right <= self.left:
            raise ValidationError("box needs finite height and right > left", "box")
        if self.left - lo < 5 * d or hi - self.right < 5 * d:
            raise ValidationError("box walls must sit at least 5 spacings inside the extent", "box")


@dataclass(frozen=True)
class Harmonic:
    omega: float = 1.0
    center: float = 0.0
    axis: int = 0
    kind = "harmonic"
    time_dependent = False

    def values(self, grid, t, mass):
        x = grid.mesh()[self.axis]
        return 0.5 * mass[self.axis] * self.omega**2 * (x - self.center) ** 2

    def validate(self, grid):
        if not np.isfinite(self.omega):
            raise ValidationError("harmonic frequency must be finite", "omega")


@dataclass(frozen=True)
class Bump:
    """Gaussian bump ``strength * ramp(t) * exp(-(x - center)^2 / (2 width^2))``."""

    center: float
    width: float
    strength: float
    ramp: Optional[Ramp] = None
    axis: int = 0
    kind = "bump"

    @property
    def time_dependent(self):
        return self.ramp is not None

    def values(self, grid, t, mass):
        x = grid.mesh()[self.axis]
        g = self.strength * (1.0 if self.ramp is None else self.ramp(t))
        return g * np.exp(-((x - self.center) ** 2) / (2 * self.width**2))

    def validate(self, grid):
        if not np.isfinite(self.strength) or self.width <= 0:
            raise ValidationError("bump needs finite strength and positive width", "bump")


@dataclass(frozen=True)
class InteractionWindow:
    """Position-dependent coupling to a record.

    ``target="pointer"``: H = -coupling(t) * profile(x) * y, a momentum kick on the
    pointer axis.  ``target="spin"``: H = coupling(t) * profile(x) * sigma_x / 2, a
    rotation of the internal level (angle pi is a full flip).

    ``coupling(t) = coupling * ramp(t)`` (if a ramp is given), switched on only
    for ``t_on <= t < t_off``.
    """

    center: float
    width: float
    coupling: float
    target: str = "pointer"
    edge: Optional[float] = None
    ramp: Optional[Ramp] = None
    t_on: Optional[float] = None
    t_off: Optional[float] = None
    axis: int = 0
    pointer_axis: int = 1
    kind = "interaction_window"
    time_dependent = True

    def edge_width(self, grid):
        return 2.0 * grid.spacing[self.axis] if self.edge is None else self.edge

    def profile(self, grid):
        """Window values along the particle axis."""
        return window_profile(grid.axis(self.axis), self.center, self.width, self.edge_width(grid))

    def strength(self, t):
        if self.t_on is not None and t < self.t_on:
            return 0.0
        if self.t_off is not None and t >= self.t_off:
            return 0.0
        return self.coupling * (1.0 if self.ramp is None else self.ramp(t))

    def validate(self, grid):
        if self.target not in ("pointer", "spin"):
            raise ValidationError(f"unknown interaction target {self.target!r}", "target")
        if not np.isfinite(self.coupling):
            raise ValidationError("coupling must be finite", "coupling")
        if self.width < 2 * grid.spacing[self.axis]:
            raise ValidationError("window width must be at least 2 grid spacings", "window_width")

    def check_target(self, psi_shape_levels, dims):
        if self.target == "pointer" and dims != 2:
            raise TargetMismatchError("pointer-axis coupling needs a 2D (particle, pointer) grid")
        if self.target == "spin" and psi_shape_levels != 2:
            raise TargetMismatchError("spin-flip coupling needs spin_levels = 2")


def as_terms(potential):
    if potential is None:
        return []
    if isinstance(potential, (list, tuple)):
        return [p for p in potential if not isinstance(p, Zero)]
    return [] if isinstance(potential, Zero) else [potential]


def potential_values(potential, grid, t, mass=1.0):
    """Sum of scalar potential terms (interaction windows excluded) at time ``t``."""
    mass = tuple(np.broadcast_to(np.asarray(mass, dtype=float), (grid.dims,)))
    v = np.zeros(grid.shape)
    for term in as_terms(potential):
        if not isinstance(term, InteractionWindow):
            v = v + term.values(grid, t, mass)
    return v


def kinetic_dt_limit(grid, mass=1.0):
    """Largest dt keeping the kinetic phase at the Nyquist wavevector below pi/4."""
    mass = np.broadcast_to(np.asarray(mass, dtype=float), (grid.dims,))
    e = sum((np.pi / d) ** 2 / (2 * m) for d, m in zip(grid.spacing, mass))
    return float(np.pi / 4 / e)


def _rotate(amp, theta):
    # exp(-i theta sigma_x / 2) on the level index, theta broadcast over space
    c = np.cos(0.5 * theta)
    s = np.sin(0.5 * theta)
    a, b = amp[0].copy(), amp[1]
    amp[0] = c * a - 1j * s * b
    amp[1] = -1j * s * a + c * b


class SplitStepper:
    """Reusable split-operator propagator for one grid, mass, potential and dt."""

    def __init__(self, grid, potential, dt, mass=1.0, guard=PHASE_GUARD):
        if not dt > 0:
            raise ValidationError(f"dt must be positive, got {dt}", "dt")
        self.grid = grid
        self.dt = float(dt)
        self.mass = tuple(float(m) for m in np.broadcast_to(np.asarray(mass, dtype=float), (grid.dims,)))
        self.guard = guard
        terms = as_terms(potential)
        for term in terms:
            term.validate(grid)
        self.windows = [t for t in terms if isinstance(t, InteractionWindow)]
        self.dynamic = [t for t in terms if not isinstance(t, InteractionWindow) and t.time_dependent]
        static = [t for t in terms if not isinstance(t, InteractionWindow) and not t.time_dependent]
        self.v_static = potential_values(static, grid, 0.0, self.mass)
        self._static_phase = np.exp(-1j * self.dt * self.v_static)
        self._static_max = float(np.max(np.abs(self.v_static))) if self.v_static.size else 0.0
        ksq = sum(k**2 / (2 * m) for k, m in zip(grid.k_mesh(), self.mass))
        self.kinetic = ksq
        self.k_half = np.exp(-0.5j * self.dt * ksq)
        self.k_full = self.k_half**2
        self._profiles = [w.profile(grid) for w in self.windows]
        self._y = grid.axis(1) if grid.dims == 2 else None
        self._axes = _space_axes(grid)

    @property
    def time_dependent(self):
        return bool(self.dynamic or self.windows)

    def check_target(self, levels):
        for w in self.windows:
            w.check_target(levels, self.grid.dims)

    def _potential(self, t):
        if not self.dynamic:
            return None
        return self.v_static + potential_values(self.dynamic, self.grid, t, self.mass)

    def _guard(self, v, t):
        # A pointer coupling is linear in y, so its absolute phase depends on the
        # origin of y; what must stay small is the phase step between pointer cells.
        vmax = self._static_max if v is None else float(np.max(np.abs(v)))
        for w, prof in zip(self.windows, self._profiles):
            lam = abs(w.strength(t))
            if lam == 0.0:
                continue
            if w.target == "pointer":
                vmax += lam * float(np.max(np.abs(prof))) * self.grid.spacing[w.pointer_axis]
            else:
                vmax += 0.5 * lam * float(np.max(np.abs(prof)))
        if vmax * self.dt >= self.guard:
            raise StabilityError(
                f"phase per step {vmax * self.dt:.3g} >= {self.guard} at t = {t:.6g}; reduce dt"
            )

    def position_step(self, amp, t_mid):
        """In place: potential phase and interaction windows for one full dt at time ``t_mid``."""
        v = self._potential(t_mid)
        self._guard(v, t_mid)
        if v is None:
            amp *= self._static_phase
        else:
            amp *= np.exp(-1j * self.dt * v)
        for w, prof in zip(self.windows, self._profiles):
            lam = w.strength(t_mid)
            if lam == 0.0:
                continue
            apply_window(amp, w, prof, self._y, lam * self.dt)

    def run(self, amp, t, nsteps):
        """Advance amplitudes by ``nsteps`` Strang steps starting at time ``t``; returns new array."""
        if nsteps == 0:
            return np.array(amp, dtype=complex)
        ak = np.fft.fftn(amp, axes=self._axes) * self.k_half
        for i in range(nsteps):
            a = np.fft.ifftn(ak, axes=self._axes)
            self.position_step(a, t + (i + 0.5) * self.dt)
            ak = np.fft.fftn(a, axes=self._axes)
            ak *= self.k_full if i < nsteps - 1 else self.k_half
        out = np.fft.ifftn(ak, axes=self._axes)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"non-finite amplitudes after stepping to t = {t + nsteps * self.dt:.6g}")
        return out


def apply_window(amp, window, profile, y, angle_scale):
    """In place: the record coupling of ``window`` integrated over a step (``angle_scale = lam dt``)."""
    if window.target == "pointer":
        kernels.backend.kick_phase(amp, profile, y, angle_scale)
    else:
        theta = angle_scale * profile
        if amp.ndim == 3:
            theta = theta[:, None]
        _rotate(amp, theta)


def apply_interaction(psi, window, t, dt):
    """Apply ``window``'s coupling for a duration ``dt`` at time ``t``; returns a new state."""
    window.validate(psi.grid)
    window.check_target(psi.spin_levels, psi.grid.dims)
    amp = np.array(psi.amplitudes)
    lam = window.strength(t)
    if lam != 0.0:
        y = psi.grid.axis(window.pointer_axis) if psi.grid.dims == 2 else None
        apply_window(amp, window, window.profile(psi.grid), y, lam * dt)
    return psi.with_amplitudes(amp)


def step(psi, potential, t, dt):
    """One Strang step of length ``dt`` from time ``t``."""
    stepper = SplitStepper(psi.grid, potential, dt, psi.mass)
    stepper.check_target(psi.spin_levels)
    return psi.with_amplitudes(stepper.run(psi.amplitudes, t, 1))


@dataclass(frozen=True, eq=False)
class EvolutionRecord:
    """Stored frames of a real-time evolution.

    ``dt`` is the spacing of stored frames, ``step_dt`` the propagation step.
    """

    times: np.ndarray
    frames: list
    norm_drift: float
    dt: float
    step_dt: float

    @property
    def flagged(self):
        return self.norm_drift > NORM_FLAG

    @property
    def grid(self):
        return self.frames[0].grid

    def frame_at(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        return self.frames[i]


def _steps_between(t0, t1, dt):
    n = int(round((t1 - t0) / dt))
    if n < 0 or abs(n * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValidationError(f"[{t0}, {t1}] is not a whole number of steps of {dt}", "dt")
    return n


def evolve(psi, potential, t0, t1, dt, store_every=1):
    """Evolve ``psi`` from ``t0`` to ``t1``, storing every ``store_every``-th step."""
    if t1 < t0:
        raise ValidationError("t1 must not precede t0", "t1")
    n = _steps_between(t0, t1, dt)
    stepper = SplitStepper(psi.grid, potential, dt, psi.mass)
    stepper.check_target(psi.spin_levels)
    store_every = max(1, int(store_every))
    frames = [psi]
    times = [t0]
    drift = abs(1.0 - psi.norm())
    amp = psi.amplitudes
    done = 0
    while done < n:
        k = min(store_every, n - done)
        amp = stepper.run(amp, t0 + done * dt, k)
        done += k
        frame = psi.with_amplitudes(amp)
        frames.append(frame)
        times.append(t0 + done * dt)
        drift = max(drift, abs(1.0 - frame.norm()))
    return EvolutionRecord(np.array(times), frames, drift, dt * store_every, dt)


def energy(psi, potential=None, t=0.0):
    """<H> for the scalar potential terms plus interaction-window couplings at time ``t``."""
    grid = psi.grid
    axes = _space_axes(grid)
    ak = np.fft.fftn(psi.amplitudes, axes=axes)
    ksq = sum(k**2 / (2 * m) for k, m in zip(grid.k_mesh(), psi.mass))
    n2 = np.sum(np.abs(psi.amplitudes) ** 2)
    kin = np.sum(np.abs(ak) ** 2 * ksq[None]) / np.prod(grid.shape)
    e = kin + np.sum(potential_values(potential, grid, t, psi.mass)[None] * np.abs(psi.amplitudes) ** 2)
    for w in as_terms(potential):
        if isinstance(w, InteractionWindow):
            lam = w.strength(t)
            prof = w.profile(grid)
            if w.target == "pointer" and grid.dims == 2:
                e += -lam * np.sum((prof[:, None] * grid.axis(1)[None, :])[None] * np.abs(psi.amplitudes) ** 2)
            elif w.target == "spin" and psi.spin_levels == 2:
                pr = prof if grid.dims == 1 else prof[:, None]
                e += lam * np.sum(pr * np.real(np.conj(psi.amplitudes[0]) * psi.amplitudes[1]))
    return float(np.real(e) / n2)


def relax_ground_state(potential, grid, tolerance=1e-10, dt=None, mass=1.0, max_steps=10**6,
                       initial=None, check_every=100, refine_dt=None, refine_width=0.5):
    """Ground state by imaginary-time propagation with per-step renormalization.

    Stops when the relative energy change per unit imaginary time drops below
    ``tolerance``.  Returns ``(state, energy)``.

    With ``refine_dt`` the relaxed state is additionally projected onto the
    lowest eigenvector of the real-time Strang step of that size, using a
    Gaussian time filter of width ``refine_width``.  Splitting error makes that
    eigenvector differ slightly from the imaginary-time fixed point; the
    projected state is stationary under :func:`evolve` with ``dt=refine_dt``
    to roundoff.
    """
    terms = as_terms(potential)
    if any(t.time_dependent for t in terms):
        raise ValidationError("ground-state relaxation needs a time-independent potential", "potential")
    mass = tuple(float(m) for m in np.broadcast_to(np.asarray(mass, dtype=float), (grid.dims,)))
    v = potential_values(terms, grid, 0.0, mass)
    if dt is None:
        vmax = float(np.max(np.abs(v)))
        dt = min(1e-3, 0.4 / vmax) if vmax > 0 else 1e-3
    axes = _space_axes(grid)
    ksq = sum(k**2 / (2 * m) for k, m in zip(grid.k_mesh(), mass))
    k_half = np.exp(-0.5 * dt * ksq)[None]
    v_phase = np.exp(-dt * (v - v.min()))[None]
    dv = grid.cell_volume

    if initial is None:
        mesh = grid.mesh()
        amp = np.ones(grid.shape, dtype=complex)
        for a, x in enumerate(mesh):
            lo, hi = grid.extent[a]
            amp = amp * np.exp(-((x - 0.5 * (lo + hi)) ** 2) / (2 * (0.1 * (hi - lo)) ** 2))
        amp = amp[None]
    else:
        amp = np.array(initial.amplitudes, dtype=complex)

    def e_of(a):
        return energy(WaveFunction(grid, a, mass), terms)

    e_old = e_of(amp)
    converged = False
    for i in range(1, max_steps + 1):
        amp = np.fft.ifftn(k_half * np.fft.fftn(amp, axes=axes), axes=axes) * v_phase
        amp = np.fft.ifftn(k_half * np.fft.fftn(amp, axes=axes), axes=axes)
        amp /= np.sqrt(np.sum(np.abs(amp) ** 2) * dv)
        if i % check_every == 0:
            e_new = e_of(amp)
            rate = abs(e_new - e_old) / max(abs(e_new), 1e-300) / (check_every * dt)
            e_old = e_new
            if rate < tolerance:
                converged = True
                break
    if not converged:
        raise ConvergenceError(f"imaginary-time relaxation did not converge in {max_steps} steps")
    if refine_dt is not None:
        amp = _project_stationary(amp, grid, terms, mass, refine_dt, refine_width)
    psi = WaveFunction(grid, amp, mass)
    return psi, energy(psi, terms)


def _project_stationary(amp, grid, terms, mass, dt, width):
    stepper = SplitStepper(grid, terms, dt, mass)
    axes = _space_axes(grid)
    dv = grid.cell_volume
    probe = stepper.run(amp, 0.0, 1)
    e_eff = -np.angle(np.vdot(amp, probe)) / dt
    # U^j = K_half (P K_full)^(j-1) P K_half: accumulate b_j = (P K_full)^(j-1) P K_half amp
    n = int(round(8 * width / dt))
    phase = stepper._static_phase[None]
    b = np.fft.ifftn(stepper.k_half * np.fft.fftn(amp, axes=axes), axes=axes) * phase
    acc = np.zeros_like(amp)
    for j in range(1, n + 1):
        t = j * dt
        acc += np.exp(-0.5 * ((t - 4 * width) / width) ** 2 + 1j * e_eff * t) * b
        b = np.fft.ifftn(stepper.k_full * np.fft.fftn(b, axes=axes), axes=axes) * phase
    out = np.fft.ifftn(stepper.k_half * np.fft.fftn(acc, axes=axes), axes=axes)
    out /= np.sqrt(np.sum(np.abs(out) ** 2) * dv)
    flat = out.ravel()
    ref = flat[np.argmax(np.abs(flat))]
    return out * (abs(ref) / ref)


def write_frame(path, psi, t):
    """Columnar dump: position column(s), then real and imaginary part per spin level."""
    grid = psi.grid
    cols = [x.ravel() for x in grid.mesh()]
    names = ["x", "y"][: grid.dims]
    for lev in range(psi.spin_levels):
        cols += [psi.amplitudes[lev].real.ravel(), psi.amplitudes[lev].imag.ravel()]
        names += [f"re{lev}", f"im{lev}"]
    header = f"t={t!r} dims={grid.dims} shape={'x'.join(map(str, grid.shape))} levels={psi.spin_levels}\n" + " ".join(names)
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=header)


def read_frame(path):
    """Inverse of :func:`write_frame`; returns ``(t, positions, amplitudes)``."""
    with open(path) as fh:
        meta = fh.readline().lstrip("# ").split()
    info = dict(item.split("=", 1) for item in meta)
    dims, levels = int(info["dims"]), int(info["levels"])
    shape = tuple(int(s) for s in info["shape"].split("x"))
    data = np.loadtxt(path, ndmin=2)
    pos = [data[:, a].reshape(shape) for a in range(dims)]
    amp = np.stack([(data[:, dims + 2 * l] + 1j * data[:, dims + 2 * l + 1]).reshape(shape) for l in range(levels)])
    return float(info["t"]), pos, amp
