"""numba kernels; loop-for-loop twins of :mod:`bohmlab.kernels._numpy`."""

import math

import numpy as np
from numba import njit, prange

NAME = "numba"

ALIVE, ESCAPED, NODE = 0, 1, 2


@njit(cache=True, inline="always")
def _cell(x, x0, dx, n):
    u = (x - x0) / dx
    fl = math.floor(u)
    f = u - fl
    i0 = int(fl) % n
    i1 = (i0 + 1) % n
    return i0, i1, f


@njit(cache=True)
def _rj_1d(rho, j, x, x0, dx):
    i0, i1, f = _cell(x, x0, dx, rho.shape[0])
    w0 = 1.0 - f
    return rho[i0] * w0 + rho[i1] * f, j[i0] * w0 + j[i1] * f


@njit(cache=True)
def _rj_2d(rho, jx, jy, x, y, x0, dx, y0, dy):
    i0, i1, fx = _cell(x, x0, dx, rho.shape[0])
    k0, k1, fy = _cell(y, y0, dy, rho.shape[1])
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    r = rho[i0, k0] * w00 + rho[i1, k0] * w10 + rho[i0, k1] * w01 + rho[i1, k1] * w11
    a = jx[i0, k0] * w00 + jx[i1, k0] * w10 + jx[i0, k1] * w01 + jx[i1, k1] * w11
    b = jy[i0, k0] * w00 + jy[i1, k0] * w10 + jy[i0, k1] * w01 + jy[i1, k1] * w11
    return r, a, b


@njit(cache=True, parallel=True)
def field_1d(xs, rho, j, x0, dx):
    n = xs.shape[0]
    r = np.empty(n)
    c = np.empty((1, n))
    for i in prange(n):
        a, b = _rj_1d(rho, j, xs[i], x0, dx)
        r[i] = a
        c[0, i] = b
    return r, c


@njit(cache=True, parallel=True)
def field_2d(pts, rho, jx, jy, x0, dx, y0, dy):
    n = pts.shape[0]
    r = np.empty(n)
    c = np.empty((2, n))
    for i in prange(n):
        a, b, d = _rj_2d(rho, jx, jy, pts[i, 0], pts[i, 1], x0, dx, y0, dy)
        r[i] = a
        c[0, i] = b
        c[1, i] = d
    return r, c


@njit(cache=True)
def _clamp(v, vmax):
    if abs(v) > vmax:
        return math.copysign(vmax, v), True
    return v, False


@njit(cache=True)
def _vel_1d(x, s, rho_a, j_a, rho_b, j_b, eps_a, eps_b, x0, dx, vmax, clamp):
    v = 0.0
    hit = False
    clamped = False
    wa = 1.0 - s
    if wa > 0.0:
        rho, j = _rj_1d(rho_a, j_a, x, x0, dx)
        if rho < eps_a:
            hit = True
            if clamp:
                clamped = True
                rho = eps_a
            else:
                rho = 1.0
        v += wa * (j / rho)
    if s > 0.0:
        rho, j = _rj_1d(rho_b, j_b, x, x0, dx)
        if rho < eps_b:
            hit = True
            if clamp:
                clamped = True
                rho = eps_b
            else:
                rho = 1.0
        v += s * (j / rho)
    if clamp:
        v, c = _clamp(v, vmax)
        clamped = clamped or c
    return v, hit, clamped


@njit(cache=True)
def _rk4_1d(x, s0, ds, hs, clamp, rho_a, j_a, rho_b, j_b, eps_a, eps_b, x0, dx, vmax):
    k1, h1, c1 = _vel_1d(x, s0, rho_a, j_a, rho_b, j_b, eps_a, eps_b, x0, dx, vmax, clamp)
    k2, h2, c2 = _vel_1d(x + 0.5 * hs * k1, s0 + 0.5 * ds, rho_a, j_a, rho_b, j_b, eps_a, eps_b, x0, dx, vmax, clamp)
    k3, h3, c3 = _vel_1d(x + 0.5 * hs * k2, s0 + 0.5 * ds, rho_a, j_a, rho_b, j_b, eps_a, eps_b, x0, dx, vmax, clamp)
    k4, h4, c4 = _vel_1d(x + hs * k3, s0 + ds, rho_a, j_a, rho_b, j_b, eps_a, eps_b, x0, dx, vmax, clamp)
    x_new = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    spread = hs * (max(k1, k2, k3, k4) - min(k1, k2, k3, k4))
    return x_new, h1 or h2 or h3 or h4, c1 or c2 or c3 or c4, spread


@njit(cache=True, parallel=True)
def advance_1d(pos, status, nodes, clamps, stuck, rho_a, j_a, rho_b, j_b, eps_a, eps_b,
               x0, dx, xmin, xmax, h, vmax, tol, max_level, node_budget):
    for t in prange(pos.shape[0]):
        if status[t] != ALIVE:
            continue
        for level in range(max_level + 1):
            nsub = 1 << level
            hs = h / nsub
            ds = 1.0 / nsub
            last = level == max_level
            x = pos[t]
            ok = True
            on_node = False
            out = False
            nclamp = 0
            nstuck = stuck[t]
            for m in range(nsub):
                x_new, hit, clamped, spread = _rk4_1d(x, m * ds, ds, hs, last, rho_a, j_a, rho_b, j_b,
                                                      eps_a, eps_b, x0, dx, vmax)
                if not last:
                    if hit or spread > tol:
                        ok = False
                        on_node = hit
                        break
                else:
                    if clamped:
                        nclamp += 1
                    nstuck = nstuck + 1 if hit else 0
                if x_new >= xmin and x_new < xmax:
                    x = x_new
                else:
                    out = True
                    break
            if level == 0 and on_node:
                nodes[t] += 1
            if ok:
                pos[t] = x
                if out:
                    status[t] = ESCAPED
                if last:
                    clamps[t] += nclamp
                    stuck[t] = nstuck
                    if stuck[t] > node_budget and status[t] == ALIVE:
                        status[t] = NODE
                else:
                    stuck[t] = 0
                break


@njit(cache=True)
def _vel_2d(x, y, s, rho_a, jx_a, jy_a, rho_b, jx_b, jy_b, eps_a, eps_b, x0, dx, y0, dy,
            vmax_x, vmax_y, clamp):
    vx = 0.0
    vy = 0.0
    hit = False
    clamped = False
    wa = 1.0 - s
    if wa > 0.0:
        rho, jx, jy = _rj_2d(rho_a, jx_a, jy_a, x, y, x0, dx, y0, dy)
        if rho < eps_a:
            hit = True
            if clamp:
                clamped = True
                rho = eps_a
            else:
                rho = 1.0
        vx += wa * (jx / rho)
        vy += wa * (jy / rho)
    if s > 0.0:
        rho, jx, jy = _rj_2d(rho_b, jx_b, jy_b, x, y, x0, dx, y0, dy)
        if rho < eps_b:
            hit = True
            if clamp:
                clamped = True
                rho = eps_b
            else:
                rho = 1.0
        vx += s * (jx / rho)
        vy += s * (jy / rho)
    if clamp:
        vx, c1 = _clamp(vx, vmax_x)
        vy, c2 = _clamp(vy, vmax_y)
        clamped = clamped or c1 or c2
    return vx, vy, hit, clamped


@njit(cache=True, parallel=True)
def advance_2d(pos, status, nodes, clamps, stuck, rho_a, jx_a, jy_a, rho_b, jx_b, jy_b,
               eps_a, eps_b, x0, dx, y0, dy, xmin, xmax, ymin, ymax, h, vmax_x, vmax_y, tol,
               max_level, node_budget):
    for t in prange(pos.shape[0]):
        if status[t] != ALIVE:
            continue
        for level in range(max_level + 1):
            nsub = 1 << level
            hs = h / nsub
            ds = 1.0 / nsub
            last = level == max_level
            x = pos[t, 0]
            y = pos[t, 1]
            ok = True
            on_node = False
            out = False
            nclamp = 0
            nstuck = stuck[t]
            for m in range(nsub):
                s0 = m * ds
                k1x, k1y, h1, c1 = _vel_2d(x, y, s0, rho_a, jx_a, jy_a, rho_b, jx_b, jy_b, eps_a, eps_b,
                                           x0, dx, y0, dy, vmax_x, vmax_y, last)
                k2x, k2y, h2, c2 = _vel_2d(x + 0.5 * hs * k1x, y + 0.5 * hs * k1y, s0 + 0.5 * ds,
                                           rho_a, jx_a, jy_a, rho_b, jx_b, jy_b, eps_a, eps_b,
                                           x0, dx, y0, dy, vmax_x, vmax_y, last)
                k3x, k3y, h3, c3 = _vel_2d(x + 0.5 * hs * k2x, y + 0.5 * hs * k2y, s0 + 0.5 * ds,
                                           rho_a, jx_a, jy_a, rho_b, jx_b, jy_b, eps_a, eps_b,
                                           x0, dx, y0, dy, vmax_x, vmax_y, last)
                k4x, k4y, h4, c4 = _vel_2d(x + hs * k3x, y + hs * k3y, s0 + ds,
                                           rho_a, jx_a, jy_a, rho_b, jx_b, jy_b, eps_a, eps_b,
                                           x0, dx, y0, dy, vmax_x, vmax_y, last)
                xn = x + (hs / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                yn = y + (hs / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                hit = h1 or h2 or h3 or h4
                spread = hs * max(max(k1x, k2x, k3x, k4x) - min(k1x, k2x, k3x, k4x),
                                  max(k1y, k2y, k3y, k4y) - min(k1y, k2y, k3y, k4y))
                if not last:
                    if hit or spread > tol:
                        ok = False
                        on_node = hit
                        break
                else:
                    if c1 or c2 or c3 or c4:
                        nclamp += 1
                    nstuck = nstuck + 1 if hit else 0
                if xn >= xmin and xn < xmax and yn >= ymin and yn < ymax:
                    x = xn
                    y = yn
                else:
                    out = True
                    break
            if level == 0 and on_node:
                nodes[t] += 1
            if ok:
                pos[t, 0] = x
                pos[t, 1] = y
                if out:
                    status[t] = ESCAPED
                if last:
                    clamps[t] += nclamp
                    stuck[t] = nstuck
                    if stuck[t] > node_budget and status[t] == ALIVE:
                        status[t] = NODE
                else:
                    stuck[t] = 0
                break


@njit(cache=True)
def kick_phase(psi, pi_x, y, a):
    if a == 0.0:
        return
    for i in range(pi_x.shape[0]):
        if pi_x[i] == 0.0:
            continue
        c = a * pi_x[i]
        for k in range(y.shape[0]):
            ph = np.exp(1j * (c * y[k]))
            for lev in range(psi.shape[0]):
                psi[lev, i, k] *= ph
