"""Numba kernels for the narrow-band level-set stepper.

Fields are flattened C-ordered arrays; ``sx``/``sy`` are the flat strides of
the first two axes (the last axis has stride 1).  Every kernel reads from
``u`` and writes into a per-band buffer before scattering, so each sweep is
a Jacobi update and the result does not depend on traversal order.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, error_model="numpy")
def cutoff(v, beta, gamma):
    """Smooth band cutoff: 1 for |v| <= beta, 0 for |v| >= gamma (C^1 cubic between)."""
    a = abs(v)
    if a <= beta:
        return 1.0
    if a >= gamma:
        return 0.0
    return (a - gamma) ** 2 * (2.0 * a + gamma - 3.0 * beta) / (gamma - beta) ** 3


@njit(cache=True, error_model="numpy")
def mcf_step_3d(u, idx, out, sx, sy, h, dt, d2, beta, gamma):
    """One explicit step of u_t = (delta_ij - u_i u_j / (|Du|^2 + d2)) u_ij on band nodes.

    The update is scaled by ``cutoff(u)`` so the band edge is frozen
    smoothly; since the factor depends on ``u`` only, every level set with
    ``|u| <= beta`` still moves by its own curvature.  Returns the largest
    updated value (used for emptiness checks).
    """
    i2h = 0.5 / h
    ih2 = 1.0 / (h * h)
    i4h2 = 0.25 / (h * h)
    vmax = -np.inf
    for k in range(idx.shape[0]):
        p = idx[k]
        c = u[p]
        xp = u[p + sx]
        xm = u[p - sx]
        yp = u[p + sy]
        ym = u[p - sy]
        zp = u[p + 1]
        zm = u[p - 1]
        ux = (xp - xm) * i2h
        uy = (yp - ym) * i2h
        uz = (zp - zm) * i2h
        uxx = (xp - 2.0 * c + xm) * ih2
        uyy = (yp - 2.0 * c + ym) * ih2
        uzz = (zp - 2.0 * c + zm) * ih2
        uxy = (u[p + sx + sy] - u[p + sx - sy] - u[p - sx + sy] + u[p - sx - sy]) * i4h2
        uxz = (u[p + sx + 1] - u[p + sx - 1] - u[p - sx + 1] + u[p - sx - 1]) * i4h2
        uyz = (u[p + sy + 1] - u[p + sy - 1] - u[p - sy + 1] + u[p - sy - 1]) * i4h2
        g2 = ux * ux + uy * uy + uz * uz + d2
        q = (ux * ux * uxx + uy * uy * uyy + uz * uz * uzz
             + 2.0 * (ux * uy * uxy + ux * uz * uxz + uy * uz * uyz))
        v = c + dt * cutoff(c, beta, gamma) * (uxx + uyy + uzz - q / g2)
        out[k] = v
        if v > vmax:
            vmax = v
    for k in range(idx.shape[0]):
        u[idx[k]] = out[k]
    return vmax


@njit(cache=True, error_model="numpy")
def mcf_step_2d(u, idx, out, sx, h, dt, d2, beta, gamma):
    i2h = 0.5 / h
    ih2 = 1.0 / (h * h)
    i4h2 = 0.25 / (h * h)
    vmax = -np.inf
    for k in range(idx.shape[0]):
        p = idx[k]
        c = u[p]
        xp = u[p + sx]
        xm = u[p - sx]
        yp = u[p + 1]
        ym = u[p - 1]
        ux = (xp - xm) * i2h
        uy = (yp - ym) * i2h
        uxx = (xp - 2.0 * c + xm) * ih2
        uyy = (yp - 2.0 * c + ym) * ih2
        uxy = (u[p + sx + 1] - u[p + sx - 1] - u[p - sx + 1] + u[p - sx - 1]) * i4h2
        g2 = ux * ux + uy * uy + d2
        q = ux * ux * uxx + uy * uy * uyy + 2.0 * ux * uy * uxy
        v = c + dt * cutoff(c, beta, gamma) * (uxx + uyy - q / g2)
        out[k] = v
        if v > vmax:
            vmax = v
    for k in range(idx.shape[0]):
        u[idx[k]] = out[k]
    return vmax


@njit(cache=True, error_model="numpy")
def _minmod(a, b):
    if a * b <= 0.0:
        return 0.0
    return a if abs(a) < abs(b) else b


@njit(cache=True, error_model="numpy")
def _crossing(c0, n0, d2):
    """Fraction in (0, 1] of the way from a node (value c0) to its neighbour (n0) where
    the quadratic interpolant with second difference ``d2`` (grid units) vanishes."""
    lin = c0 / (c0 - n0)
    c2 = 0.5 * d2
    if abs(c2) < 1e-10 * (abs(c0) + abs(n0)):
        return max(lin, 1e-6)
    c1 = n0 - c0 - c2
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return max(lin, 1e-6)
    sq = math.sqrt(disc)
    best = lin
    for r in ((-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2)):
        if 0.0 <= r <= 1.0:
            best = r
    return max(best, 1e-6)


@njit(cache=True, inline="always", error_model="numpy")
def _hamiltonian(u, s, p, k, coords, shape, strides, h, sub):
    """Godunov |Du| with ENO2 one-sided differences; sign changes of ``u0`` act as
    extra grid points (value 0) at the sub-cell crossings stored in ``sub``."""
    c = u[p]
    g = 0.0
    dmin = h
    for a in range(strides.shape[0]):
        st = strides[a]
        i = coords[k, a]
        um, up = u[p - st], u[p + st]
        d2c = (up - 2.0 * c + um) / (h * h)
        d2m = d2c
        d2p = d2c
        if i >= 2:
            d2m = (c - 2.0 * um + u[p - 2 * st]) / (h * h)
        if i <= shape[a] - 3:
            d2p = (u[p + 2 * st] - 2.0 * up + c) / (h * h)
        tm = sub[k, 2 * a]
        tp = sub[k, 2 * a + 1]
        if tm > 0.0:
            dist = tm * h
            dm = c / dist + 0.5 * dist * _minmod(d2c, d2m)
            dmin = min(dmin, dist)
        else:
            dm = (c - um) / h + 0.5 * h * _minmod(d2c, d2m)
        if tp > 0.0:
            dist = tp * h
            dp = -c / dist - 0.5 * dist * _minmod(d2c, d2p)
            dmin = min(dmin, dist)
        else:
            dp = (up - c) / h - 0.5 * h * _minmod(d2c, d2p)
        if s > 0.0:
            a1 = max(dm, 0.0)
            b1 = min(dp, 0.0)
        else:
            a1 = min(dm, 0.0)
            b1 = max(dp, 0.0)
        g += max(a1 * a1, b1 * b1)
    return s * (math.sqrt(g) - 1.0), dmin


@njit(cache=True, error_model="numpy")
def reinit(u, u0, idx, shape, strides, h, cfl, iters, clamp):
    """Second-order redistancing toward |Du| = 1 with a sub-cell fixed interface.

    Solves ``u_tau + sign(u0) (|Du| - 1) = 0`` with ENO2 upwind differences,
    Godunov's Hamiltonian and TVD-RK2 in pseudo-time.  Where ``u0`` changes
    sign between two nodes the crossing is located by quadratic
    interpolation and used as a Dirichlet point, so the zero set does not
    drift (du Chene, Min & Gibou).  Local pseudo-time steps ``cfl * min
    spacing``; results are clipped to ``[-clamp, clamp]``.
    """
    ndim = strides.shape[0]
    m = idx.shape[0]
    coords = np.empty((m, ndim), dtype=np.int64)
    sub = np.zeros((m, 2 * ndim))
    for k in range(m):
        p = idx[k]
        q = p
        for a in range(ndim - 1, -1, -1):
            coords[k, a] = q % shape[a]
            q //= shape[a]
        c0 = u0[p]
        if c0 == 0.0:
            continue
        for a in range(ndim):
            st = strides[a]
            i = coords[k, a]
            d2c = u0[p + st] - 2.0 * c0 + u0[p - st]
            for side in range(2):
                sg = -1 if side == 0 else 1
                n0 = u0[p + sg * st]
                if c0 * n0 < 0.0:
                    d2 = d2c
                    j = i + 2 * sg
                    if 0 <= j <= shape[a] - 1:
                        d2 = _minmod(d2c, u0[p + 2 * sg * st] - 2.0 * n0 + c0)
                    sub[k, 2 * a + side] = _crossing(c0, n0, d2)
    sgn = np.empty(m)
    for k in range(m):
        c0 = u0[idx[k]]
        sgn[k] = 1.0 if c0 > 0.0 else (-1.0 if c0 < 0.0 else 0.0)
    w = u.copy()
    out = np.empty(m)
    for it in range(iters):
        for k in range(m):
            p = idx[k]
            if sgn[k] == 0.0:
                out[k] = u[p]
                continue
            hm, dmin = _hamiltonian(u, sgn[k], p, k, coords, shape, strides, h, sub)
            out[k] = u[p] - cfl * dmin * hm
        for k in range(m):
            w[idx[k]] = out[k]
        for k in range(m):
            p = idx[k]
            if sgn[k] == 0.0:
                continue
            hm, dmin = _hamiltonian(w, sgn[k], p, k, coords, shape, strides, h, sub)
            out[k] = 0.5 * (u[p] + w[p] - cfl * dmin * hm)
        for k in range(m):
            v = out[k]
            if v > clamp:
                v = clamp
            elif v < -clamp:
                v = -clamp
            u[idx[k]] = v
            w[idx[k]] = v


@njit(cache=True, error_model="numpy")
def band_indices(u, shape, width):
    """Flat indices of interior nodes with ``|u| < width`` and whether positives lie outside."""
    n = u.shape[0]
    buf = np.empty(n, dtype=np.int64)
    m = 0
    pos_out = False
    ndim = shape.shape[0]
    for p in range(n):
        v = u[p]
        if abs(v) < width:
            # interior test: unravel p
            q = p
            interior = True
            for a in range(ndim - 1, -1, -1):
                i = q % shape[a]
                q //= shape[a]
                if i == 0 or i == shape[a] - 1:
                    interior = False
            if interior:
                buf[m] = p
                m += 1
            elif v > 0.0:
                pos_out = True
        elif v > 0.0:
            pos_out = True
    return buf[:m].copy(), pos_out


@njit(cache=True, error_model="numpy")
def dilate_indices(idx, shape, strides, radius, mark):
    """Indices within ``radius`` cells (cube neighbourhood) of ``idx``, interior only.

    ``mark`` is a zeroed uint8 scratch array of the full field size; it is
    cleared again before returning.
    """
    ndim = shape.shape[0]
    buf = np.empty(min(idx.shape[0] * (2 * radius + 1) ** ndim, mark.shape[0]), dtype=np.int64)
    m = 0
    coord = np.empty(ndim, dtype=np.int64)
    off = np.empty(ndim, dtype=np.int64)
    total = (2 * radius + 1) ** ndim
    for k in range(idx.shape[0]):
        p = idx[k]
        q = p
        for a in range(ndim - 1, -1, -1):
            coord[a] = q % shape[a]
            q //= shape[a]
        for t in range(total):
            r = t
            ok = True
            flat = 0
            for a in range(ndim - 1, -1, -1):
                off[a] = r % (2 * radius + 1) - radius
                r //= 2 * radius + 1
                c = coord[a] + off[a]
                if c < 1 or c > shape[a] - 2:
                    ok = False
                flat += c * strides[a]
            if ok and mark[flat] == 0:
                mark[flat] = 1
                buf[m] = flat
                m += 1
    res = np.sort(buf[:m])
    for k in range(m):
        mark[res[k]] = 0
    return res


@njit(cache=True, error_model="numpy")
def polyline_flow(v, prev, nxt, t, t_end, dt_max, cfl, min_len, max_ratio):
    """Forward-Euler curve shortening of closed polylines, in place.

    Each step uses ``dt = min(dt_max, cfl * (shortest edge)^2)``.  Returns
    ``(t, steps, status)`` with status 0 when ``t_end`` was reached, 1 when
    an edge fell below ``min_len``, 2 when two adjacent edges differ in
    length by more than ``max_ratio`` and 3 on non-finite coordinates.
    """
    n = v.shape[0]
    length = np.empty(n)
    hv = np.empty_like(v)
    steps = 0
    while t < t_end * (1.0 - 1e-14):
        lmin = np.inf
        for i in range(n):
            dx = v[nxt[i], 0] - v[i, 0]
            dy = v[nxt[i], 1] - v[i, 1]
            length[i] = math.sqrt(dx * dx + dy * dy)
            if length[i] < lmin:
                lmin = length[i]
        if not np.isfinite(lmin):
            return t, steps, 3
        if lmin < min_len:
            return t, steps, 1
        for i in range(n):
            a = length[prev[i]]
            b = length[i]
            if a > max_ratio * b or b > max_ratio * a:
                return t, steps, 2
        for i in range(n):
            j = prev[i]
            k = nxt[i]
            la = length[j]
            lb = length[i]
            tix = (v[i, 0] - v[j, 0]) / la
            tiy = (v[i, 1] - v[j, 1]) / la
            tox = (v[k, 0] - v[i, 0]) / lb
            toy = (v[k, 1] - v[i, 1]) / lb
            dual = 0.5 * (la + lb)
            hv[i, 0] = (tox - tix) / dual
            hv[i, 1] = (toy - tiy) / dual
        dt = min(dt_max, cfl * lmin * lmin, t_end - t)
        for i in range(n):
            v[i, 0] += dt * hv[i, 0]
            v[i, 1] += dt * hv[i, 1]
        t += dt
        steps += 1
    return t, steps, 0


@njit(cache=True, error_model="numpy")
def triangle_flow(v, f, t, t_end, dt_max, cfl, min_len, max_aspect):
    """Forward-Euler mean curvature flow of a closed triangle mesh, in place.

    The mean curvature vector is the cotangent Laplacian of the position
    divided by the mixed (Meyer et al.) dual area.  Same step rule and
    status codes as :func:`polyline_flow`; status 2 means a triangle aspect
    ratio above ``max_aspect``.
    """
    nv = v.shape[0]
    nf = f.shape[0]
    lap = np.empty_like(v)
    dual = np.empty(nv)
    e = np.empty((3, 3))
    l2 = np.empty(3)
    ct = np.empty(3)
    steps = 0
    while t < t_end * (1.0 - 1e-14):
        lap[:] = 0.0
        dual[:] = 0.0
        lmin = np.inf
        worst = 0.0
        for q in range(nf):
            # edge k is opposite corner k
            for k in range(3):
                a = f[q, (k + 1) % 3]
                b = f[q, (k + 2) % 3]
                for c in range(3):
                    e[k, c] = v[b, c] - v[a, c]
                l2[k] = e[k, 0] ** 2 + e[k, 1] ** 2 + e[k, 2] ** 2
            cx = e[1, 1] * e[2, 2] - e[1, 2] * e[2, 1]
            cy = e[1, 2] * e[2, 0] - e[1, 0] * e[2, 2]
            cz = e[1, 0] * e[2, 1] - e[1, 1] * e[2, 0]
            dbl = math.sqrt(cx * cx + cy * cy + cz * cz)
            area = 0.5 * dbl
            lo = math.sqrt(min(l2[0], min(l2[1], l2[2])))
            hi = math.sqrt(max(l2[0], max(l2[1], l2[2])))
            per = math.sqrt(l2[0]) + math.sqrt(l2[1]) + math.sqrt(l2[2])
            if lo < lmin:
                lmin = lo
            asp = hi * per / (4.0 * math.sqrt(3.0) * area) if area > 0 else np.inf
            if asp > worst:
                worst = asp
            obtuse = False
            for k in range(3):
                i1 = (k + 1) % 3
                i2 = (k + 2) % 3
                ct[k] = -(e[i1, 0] * e[i2, 0] + e[i1, 1] * e[i2, 1] + e[i1, 2] * e[i2, 2]) / dbl
                if ct[k] < 0:
                    obtuse = True
            for k in range(3):
                a = f[q, (k + 1) % 3]
                b = f[q, (k + 2) % 3]
                w = 0.5 * ct[k]
                for c in range(3):
                    d = w * (v[b, c] - v[a, c])
                    lap[a, c] += d
                    lap[b, c] -= d
            for k in range(3):
                i1 = (k + 1) % 3
                i2 = (k + 2) % 3
                if obtuse:
                    dual[f[q, k]] += area / 2.0 if ct[k] < 0 else area / 4.0
                else:
                    dual[f[q, k]] += (l2[i1] * ct[i1] + l2[i2] * ct[i2]) / 8.0
        if not np.isfinite(lmin):
            return t, steps, 3
        if lmin < min_len:
            return t, steps, 1
        if worst > max_aspect:
            return t, steps, 2
        dt = min(dt_max, cfl * lmin * lmin, t_end - t)
        for i in range(nv):
            for c in range(3):
                v[i, c] += dt * lap[i, c] / dual[i]
        t += dt
        steps += 1
    return t, steps, 0
