"""Pure-numpy kernels, vectorized over the trajectory ensemble.

Fields are lattice arrays of density ``rho`` and current ``j`` (already
divided by mass); off-lattice values are (bi)linear interpolations.
"""

import numpy as np

NAME = "numpy"

ALIVE, ESCAPED, NODE = 0, 1, 2


def _cell_1d(x, x0, dx, n):
    u = (x - x0) / dx
    fl = np.floor(u)
    f = u - fl
    # stopped trajectories carry NaN; f stays NaN so their fields do too
    i0 = np.where(np.isfinite(fl), fl, 0.0).astype(np.int64) % n
    i1 = (i0 + 1) % n
    return i0, i1, f


def field_1d(xs, rho, j, x0, dx):
    """Interpolated density (m,) and current (1, m) at points ``xs``."""
    i0, i1, f = _cell_1d(np.asarray(xs, dtype=np.float64), x0, dx, rho.shape[0])
    w0 = 1.0 - f
    r = rho[i0] * w0 + rho[i1] * f
    c = j[i0] * w0 + j[i1] * f
    return r, c[None, :]


def field_2d(pts, rho, jx, jy, x0, dx, y0, dy):
    """Interpolated density (m,) and current (2, m) at points ``pts`` (m, 2)."""
    pts = np.asarray(pts, dtype=np.float64)
    i0, i1, fx = _cell_1d(pts[:, 0], x0, dx, rho.shape[0])
    k0, k1, fy = _cell_1d(pts[:, 1], y0, dy, rho.shape[1])
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy

    def interp(a):
        return a[i0, k0] * w00 + a[i1, k0] * w10 + a[i0, k1] * w01 + a[i1, k1] * w11

    return interp(rho), np.stack([interp(jx), interp(jy)])


class _Frames:
    """Velocity evaluation with linear interpolation in time between two frames."""

    def __init__(self, field_a, field_b, eps_a, eps_b, vmax):
        self.field_a, self.field_b = field_a, field_b
        self.eps_a, self.eps_b = eps_a, eps_b
        self.vmax = vmax  # (d, 1)

    def velocity(self, x, s, clamp):
        # x: (d, m); returns v (d, m), node-hit mask, clamped mask
        m = x.shape[1]
        v = np.zeros_like(x)
        hit = np.zeros(m, dtype=bool)
        clamped = np.zeros(m, dtype=bool)
        for w, field, eps in ((1.0 - s, self.field_a, self.eps_a), (s, self.field_b, self.eps_b)):
            if w <= 0.0:
                continue
            rho, j = field(x)
            low = rho < eps
            hit |= low
            if clamp:
                clamped |= low
                rho = np.where(low, eps, rho)
            else:
                rho = np.where(low, 1.0, rho)
            v += w * (j / rho)
        if clamp:
            over = np.abs(v) > self.vmax
            clamped |= over.any(axis=0)
            v = np.where(over, np.sign(v) * self.vmax, v)
        return v, hit, clamped


def _rk4(frames, x, s0, ds, hs, clamp):
    k1, h1, c1 = frames.velocity(x, s0, clamp)
    k2, h2, c2 = frames.velocity(x + 0.5 * hs * k1, s0 + 0.5 * ds, clamp)
    k3, h3, c3 = frames.velocity(x + 0.5 * hs * k2, s0 + 0.5 * ds, clamp)
    k4, h4, c4 = frames.velocity(x + hs * k3, s0 + ds, clamp)
    x_new = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    k = np.stack([k1, k2, k3, k4])
    spread = hs * np.max(k.max(axis=0) - k.min(axis=0), axis=0)
    return x_new, h1 | h2 | h3 | h4, c1 | c2 | c3 | c4, spread


def _advance(pos, status, nodes, clamps, stuck, frames, lo, hi, h, tol, max_level, node_budget):
    # pos: (d, n) positions, modified in place
    pending = np.nonzero(status == ALIVE)[0]
    for level in range(max_level + 1):
        if pending.size == 0:
            break
        nsub = 1 << level
        hs = h / nsub
        ds = 1.0 / nsub
        last = level == max_level
        x = pos[:, pending].copy()
        ok = np.ones(pending.size, dtype=bool)
        on_node = np.zeros(pending.size, dtype=bool)
        out = np.zeros(pending.size, dtype=bool)
        nclamp = np.zeros(pending.size, dtype=np.int64)
        nstuck = stuck[pending].copy()
        for m in range(nsub):
            live = ok & ~out
            if not live.any():
                break
            sel = np.nonzero(live)[0]
            x_new, hit, clamped, spread = _rk4(frames, x[:, sel], m * ds, ds, hs, last)
            if not last:
                bad = hit | (spread > tol)
                ok[sel[bad]] = False
                on_node[sel[hit]] = True
                good = sel[~bad]
                x_new = x_new[:, ~bad]
            else:
                good = sel
                nclamp[sel] += clamped
                nstuck[sel] = np.where(hit, nstuck[sel] + 1, 0)
            inside = np.all((x_new >= lo) & (x_new < hi), axis=0)
            x[:, good[inside]] = x_new[:, inside]
            out[good[~inside]] = True
        tr = pending[ok]
        pos[:, tr] = x[:, ok]
        status[tr[out[ok]]] = ESCAPED
        if level == 0:
            nodes[pending[on_node]] += 1
        if last:
            clamps[tr] += nclamp[ok]
            stuck[tr] = nstuck[ok]
            dead = tr[(stuck[tr] > node_budget) & (status[tr] == ALIVE)]
            status[dead] = NODE
        else:
            stuck[tr] = 0
        pending = pending[~ok]


def advance_1d(pos, status, nodes, clamps, stuck, rho_a, j_a, rho_b, j_b, eps_a, eps_b,
               x0, dx, xmin, xmax, h, vmax, tol, max_level, node_budget):
    """Advance 1D positions ``pos`` (n,) in place over one frame interval ``h``."""
    frames = _Frames(
        lambda x: field_1d(x[0], rho_a, j_a, x0, dx),
        lambda x: field_1d(x[0], rho_b, j_b, x0, dx),
        eps_a, eps_b, np.array([[vmax]]),
    )
    view = pos.reshape(1, -1)
    _advance(view, status, nodes, clamps, stuck, frames, np.array([[xmin]]), np.array([[xmax]]),
             h, tol, max_level, node_budget)


def advance_2d(pos, status, nodes, clamps, stuck, rho_a, jx_a, jy_a, rho_b, jx_b, jy_b,
               eps_a, eps_b, x0, dx, y0, dy, xmin, xmax, ymin, ymax, h, vmax_x, vmax_y, tol,
               max_level, node_budget):
    """Advance 2D positions ``pos`` (n, 2) in place over one frame interval ``h``."""
    frames = _Frames(
        lambda x: field_2d(x.T, rho_a, jx_a, jy_a, x0, dx, y0, dy),
        lambda x: field_2d(x.T, rho_b, jx_b, jy_b, x0, dx, y0, dy),
        eps_a, eps_b, np.array([[vmax_x], [vmax_y]]),
    )
    view = pos.T.copy()
    _advance(view, status, nodes, clamps, stuck, frames, np.array([[xmin], [ymin]]),
             np.array([[xmax], [ymax]]), h, tol, max_level, node_budget)
    pos[:] = view.T


def kick_phase(psi, pi_x, y, a):
    """In place: psi[l, i, j] *= exp(1j * a * pi_x[i] * y[j]); rows with pi_x == 0 untouched."""
    rows = np.nonzero(pi_x != 0.0)[0]
    if rows.size == 0 or a == 0.0:
        return
    phase = np.exp(1j * (a * pi_x[rows])[:, None] * y[None, :])
    psi[:, rows, :] *= phase[None, :, :]
