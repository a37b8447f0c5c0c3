"""numba kernels for the position-based fluid solver.

All hot loops write only their own particle slot, so results are
bit-deterministic regardless of thread count. Phases: 0 = fluid,
1 = solid boundary, 2 = wavemaker boundary (solid in all sums).

Neighbor candidates are gathered once per substep into a CSR list with a
padded radius (positions move by at most a few percent of h during the
constraint iterations); every pass then walks the flat list and applies
the exact r < h cutoff itself.
"""

import numpy as np
from numba import njit, prange

PHASE_FLUID = 0
PHASE_SOLID = 1
PHASE_WAVEMAKER = 2


@njit(cache=True, inline="always")
def _poly6(r2: float, h: float) -> float:
    # W(r) = 315/(64 pi h^9) (h^2 - r^2)^3, support r < h
    hh = h * h
    if r2 >= hh:
        return 0.0
    d = hh - r2
    return 315.0 / (64.0 * np.pi * h ** 9) * d * d * d


@njit(cache=True, inline="always")
def _spiky_grad_coeff(r: float, h: float) -> float:
    # grad W = -45/(pi h^6) (h - r)^2 * r_hat ; returns scalar multiplying r_vec/r
    if r >= h or r < 1e-12:
        return 0.0
    d = h - r
    return -45.0 / (np.pi * h ** 6) * d * d / r


@njit(cache=True)
def cell_indices(pos, origin, inv_cell, nx, ny, nz):
    n = pos.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        cx = int((pos[i, 0] - origin[0]) * inv_cell)
        cy = int((pos[i, 1] - origin[1]) * inv_cell)
        cz = int((pos[i, 2] - origin[2]) * inv_cell)
        if cx < 0:
            cx = 0
        elif cx >= nx:
            cx = nx - 1
        if cy < 0:
            cy = 0
        elif cy >= ny:
            cy = ny - 1
        if cz < 0:
            cz = 0
        elif cz >= nz:
            cz = nz - 1
        out[i] = (cz * ny + cy) * nx + cx
    return out


@njit(cache=True, parallel=True)
def count_neighbors(pos, order, cell_start, cell_end, origin, inv_cell,
                    nx, ny, nz, r2max, counts):
    n = pos.shape[0]
    for i in prange(n):
        px, py, pz = pos[i, 0], pos[i, 1], pos[i, 2]
        cx = int((px - origin[0]) * inv_cell)
        cy = int((py - origin[1]) * inv_cell)
        cz = int((pz - origin[2]) * inv_cell)
        cnt = 0
        for dz in range(-1, 2):
            zc = cz + dz
            if zc < 0 or zc >= nz:
                continue
            for dy in range(-1, 2):
                yc = cy + dy
                if yc < 0 or yc >= ny:
                    continue
                for dx in range(-1, 2):
                    xc = cx + dx
                    if xc < 0 or xc >= nx:
                        continue
                    c = (zc * ny + yc) * nx + xc
                    for k in range(cell_start[c], cell_end[c]):
                        j = order[k]
                        if j == i:
                            continue
                        rx = px - pos[j, 0]
                        ry = py - pos[j, 1]
                        rz = pz - pos[j, 2]
                        if rx * rx + ry * ry + rz * rz < r2max:
                            cnt += 1
        counts[i] = cnt


@njit(cache=True, parallel=True)
def fill_neighbors(pos, order, cell_start, cell_end, origin, inv_cell,
                   nx, ny, nz, r2max, offsets, nbr):
    n = pos.shape[0]
    for i in prange(n):
        px, py, pz = pos[i, 0], pos[i, 1], pos[i, 2]
        cx = int((px - origin[0]) * inv_cell)
        cy = int((py - origin[1]) * inv_cell)
        cz = int((pz - origin[2]) * inv_cell)
        w = offsets[i]
        for dz in range(-1, 2):
            zc = cz + dz
            if zc < 0 or zc >= nz:
                continue
            for dy in range(-1, 2):
                yc = cy + dy
                if yc < 0 or yc >= ny:
                    continue
                for dx in range(-1, 2):
                    xc = cx + dx
                    if xc < 0 or xc >= nx:
                        continue
                    c = (zc * ny + yc) * nx + xc
                    for k in range(cell_start[c], cell_end[c]):
                        j = order[k]
                        if j == i:
                            continue
                        rx = px - pos[j, 0]
                        ry = py - pos[j, 1]
                        rz = pz - pos[j, 2]
                        if rx * rx + ry * ry + rz * rz < r2max:
                            nbr[w] = j
                            w += 1


@njit(cache=True, parallel=True)
def lambda_pass(pred, mass, wweight, phase, offsets, nbr, h, rho0, eps_abs,
                lam, dens):
    """Per-fluid-particle density, constraint, and lambda multiplier."""
    n = pred.shape[0]
    inv_rho0 = 1.0 / rho0
    w0 = _poly6(0.0, h)
    for i in prange(n):
        if phase[i] != PHASE_FLUID:
            lam[i] = 0.0
            dens[i] = 0.0
            continue
        px, py, pz = pred[i, 0], pred[i, 1], pred[i, 2]
        rho = wweight[i] * mass[i] * w0
        gx = 0.0
        gy = 0.0
        gz = 0.0
        denom = 0.0
        for k in range(offsets[i], offsets[i + 1]):
            j = nbr[k]
            rx = px - pred[j, 0]
            ry = py - pred[j, 1]
            rz = pz - pred[j, 2]
            r2 = rx * rx + ry * ry + rz * rz
            if r2 >= h * h:
                continue
            wm = wweight[j] * mass[j]
            rho += wm * _poly6(r2, h)
            gc = _spiky_grad_coeff(np.sqrt(r2), h)
            gwx = gc * rx
            gwy = gc * ry
            gwz = gc * rz
            gx += wm * gwx
            gy += wm * gwy
            gz += wm * gwz
            denom += wweight[j] * wm * (gwx * gwx + gwy * gwy + gwz * gwz)
        dens[i] = rho
        c_i = rho * inv_rho0 - 1.0
        if c_i > 0.0:
            d = ((gx * gx + gy * gy + gz * gz) / mass[i] + denom) * inv_rho0 * inv_rho0
            lam[i] = -c_i / (d + eps_abs)
        else:
            lam[i] = 0.0


@njit(cache=True, parallel=True)
def delta_pass(pred, mass, wweight, phase, lam, offsets, nbr, h, rho0,
               max_dx, dx_fluid, dx_bound):
    """Position corrections: applied to fluid, accumulated for boundaries.

    Fluid corrections are clamped to max_dx per iteration, which suppresses
    free-surface popping without affecting interior convergence.
    """
    n = pred.shape[0]
    inv_rho0 = 1.0 / rho0
    for i in prange(n):
        px, py, pz = pred[i, 0], pred[i, 1], pred[i, 2]
        ax = 0.0
        ay = 0.0
        az = 0.0
        if phase[i] == PHASE_FLUID:
            li = lam[i]
            mi = mass[i]
            for k in range(offsets[i], offsets[i + 1]):
                j = nbr[k]
                rx = px - pred[j, 0]
                ry = py - pred[j, 1]
                rz = pz - pred[j, 2]
                r2 = rx * rx + ry * ry + rz * rz
                if r2 >= h * h:
                    continue
                gc = _spiky_grad_coeff(np.sqrt(r2), h)
                if phase[j] == PHASE_FLUID:
                    coeff = li * wweight[j] * mass[j] + lam[j] * mi
                else:
                    coeff = li * wweight[j] * mass[j]
                ax += coeff * gc * rx
                ay += coeff * gc * ry
                az += coeff * gc * rz
            s = inv_rho0 / mi
            ax *= s
            ay *= s
            az *= s
            norm2 = ax * ax + ay * ay + az * az
            if norm2 > max_dx * max_dx:
                scale = max_dx / np.sqrt(norm2)
                ax *= scale
                ay *= scale
                az *= scale
            dx_fluid[i, 0] = ax
            dx_fluid[i, 1] = ay
            dx_fluid[i, 2] = az
        else:
            # would-be correction of a boundary sample from neighboring fluid
            # constraints; converted to an impulse by the caller, never applied
            wb = wweight[i]
            for k in range(offsets[i], offsets[i + 1]):
                j = nbr[k]
                if phase[j] != PHASE_FLUID:
                    continue
                rx = px - pred[j, 0]
                ry = py - pred[j, 1]
                rz = pz - pred[j, 2]
                r2 = rx * rx + ry * ry + rz * rz
                if r2 >= h * h:
                    continue
                gc = _spiky_grad_coeff(np.sqrt(r2), h)
                ax += lam[j] * gc * rx
                ay += lam[j] * gc * ry
                az += lam[j] * gc * rz
            s = wb * inv_rho0
            dx_bound[i, 0] += ax * s
            dx_bound[i, 1] += ay * s
            dx_bound[i, 2] += az * s


@njit(cache=True, parallel=True)
def apply_corrections(pred, phase, dx_fluid, lo, hi, open_top):
    n = pred.shape[0]
    for i in prange(n):
        if phase[i] != PHASE_FLUID:
            continue
        x = pred[i, 0] + dx_fluid[i, 0]
        y = pred[i, 1] + dx_fluid[i, 1]
        z = pred[i, 2] + dx_fluid[i, 2]
        if x < lo[0]:
            x = lo[0]
        elif x > hi[0]:
            x = hi[0]
        if y < lo[1]:
            y = lo[1]
        elif y > hi[1]:
            y = hi[1]
        if z < lo[2]:
            z = lo[2]
        elif not open_top and z > hi[2]:
            z = hi[2]
        pred[i, 0] = x
        pred[i, 1] = y
        pred[i, 2] = z


@njit(cache=True, parallel=True)
def finish_velocities(pos, pred, vel, phase, inv_dt):
    n = pos.shape[0]
    for i in prange(n):
        if phase[i] != PHASE_FLUID:
            continue
        vel[i, 0] = (pred[i, 0] - pos[i, 0]) * inv_dt
        vel[i, 1] = (pred[i, 1] - pos[i, 1]) * inv_dt
        vel[i, 2] = (pred[i, 2] - pos[i, 2]) * inv_dt
        pos[i, 0] = pred[i, 0]
        pos[i, 1] = pred[i, 1]
        pos[i, 2] = pred[i, 2]


@njit(cache=True, parallel=True)
def xsph_pass(pred, vel, mass, phase, offsets, nbr, h, rho0, c, vel_out):
    """XSPH velocity smoothing: v_i += c * sum_j (m_j/rho0)(v_j - v_i) W_ij.

    Damps the spurious oscillation modes the position projection injects;
    without it a still tank never settles.
    """
    n = pred.shape[0]
    for i in prange(n):
        vel_out[i, 0] = vel[i, 0]
        vel_out[i, 1] = vel[i, 1]
        vel_out[i, 2] = vel[i, 2]
        if phase[i] != PHASE_FLUID:
            continue
        px, py, pz = pred[i, 0], pred[i, 1], pred[i, 2]
        dvx = 0.0
        dvy = 0.0
        dvz = 0.0
        for k in range(offsets[i], offsets[i + 1]):
            j = nbr[k]
            if phase[j] != PHASE_FLUID:
                continue
            rx = px - pred[j, 0]
            ry = py - pred[j, 1]
            rz = pz - pred[j, 2]
            r2 = rx * rx + ry * ry + rz * rz
            if r2 >= h * h:
                continue
            w = _poly6(r2, h) * mass[j] / rho0
            dvx += w * (vel[j, 0] - vel[i, 0])
            dvy += w * (vel[j, 1] - vel[i, 1])
            dvz += w * (vel[j, 2] - vel[i, 2])
        vel_out[i, 0] = vel[i, 0] + c * dvx
        vel_out[i, 1] = vel[i, 1] + c * dvy
        vel_out[i, 2] = vel[i, 2] + c * dvz


@njit(cache=True, parallel=True)
def fluid_neighbor_counts(pos, phase, offsets, nbr, h, counts):
    """Fluid neighbors within h of each non-fluid particle (wetness test)."""
    n = pos.shape[0]
    for i in prange(n):
        counts[i] = 0
        if phase[i] == PHASE_FLUID:
            continue
        px, py, pz = pos[i, 0], pos[i, 1], pos[i, 2]
        cnt = 0
        for k in range(offsets[i], offsets[i + 1]):
            j = nbr[k]
            if phase[j] != PHASE_FLUID:
                continue
            rx = px - pos[j, 0]
            ry = py - pos[j, 1]
            rz = pz - pos[j, 2]
            if rx * rx + ry * ry + rz * rz < h * h:
                cnt += 1
        counts[i] = cnt


@njit(cache=True, parallel=True)
def cohesion_accel(pred, mass, phase, offsets, nbr, h, rho0, strength, out):
    """Pairwise cohesion acceleration (optional surface-tension stand-in)."""
    n = pred.shape[0]
    w_ref = _poly6(0.25 * h * h, h)
    for i in prange(n):
        out[i, 0] = 0.0
        out[i, 1] = 0.0
        out[i, 2] = 0.0
        if phase[i] != PHASE_FLUID:
            continue
        px, py, pz = pred[i, 0], pred[i, 1], pred[i, 2]
        ax = 0.0
        ay = 0.0
        az = 0.0
        for k in range(offsets[i], offsets[i + 1]):
            j = nbr[k]
            if phase[j] != PHASE_FLUID:
                continue
            rx = px - pred[j, 0]
            ry = py - pred[j, 1]
            rz = pz - pred[j, 2]
            r2 = rx * rx + ry * ry + rz * rz
            if r2 >= h * h or r2 < 1e-24:
                continue
            w = _poly6(r2, h) / w_ref
            r = np.sqrt(r2)
            ax -= strength * w * rx / r
            ay -= strength * w * ry / r
            az -= strength * w * rz / r
        out[i, 0] = ax
        out[i, 1] = ay
        out[i, 2] = az
