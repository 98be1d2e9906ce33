"""Compiled inner loop of the lattice integrator.

One routine advances the whole simulation so the per-step cost stays in
machine code: spring and damper forces per bond, gravity, optional ground
contact with stick/slide friction, optional facet drag recomputed from
the deformed geometry, then a semi-implicit Euler update.

Everything is float64 with fixed accumulation order, so a given input
always produces bit-identical output (fastmath stays off).  The routine
releases the GIL; concurrent evaluations share nothing.

Two throughput choices worth knowing about:
  * the actuation sinusoid is evaluated once per step and distributed to
    voxels through per-voxel (amp*cos phi, amp*sin phi) coefficients;
  * drag forces are refreshed every drag_every steps and held constant
    in between.  The caller picks the stride so the refresh interval
    tracks actuation timescales, far above the stiffness-limited dt.

Status codes: 0 ok, 1 numerical blowup (non-finite or runaway position).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1


@njit(cache=True, nogil=True)
def run_lattice(
    pos,            # (n, 3) mutated in place
    vel,            # (n, 3) mutated in place
    mass,           # (n,)
    bond_a,         # (m,)
    bond_b,         # (m,)
    bond_k,         # (m,)
    bond_rest,      # (m,) rest length before actuation scaling
    bond_damp,      # (m,) damping coefficient
    amp,            # (n,) actuation strain amplitude, 0 for passive
    phase,          # (n,)
    freq,           # scalar Hz
    t0,             # actuation clock at entry
    dt,
    n_steps,        # 0 computes forces only
    gravity,
    ground_on,      # 0/1
    ground_k,
    ground_c,
    mu_s,
    mu_k,
    drag_on,        # 0/1
    drag_every,     # refresh stride, >= 1
    drag_coef,      # 0.5 * fluid_density * drag_coefficient
    voxel_size,
    nbr,            # (n, 6) neighbor ids, -1 exposed; dirs -x +x -y +y -z +z
    face_owner,     # (nf,)
    face_dir,       # (nf,)
    face_corner,    # (6, 4) corner index per face direction, bit-coded
    owner_voxels,   # unique voxel ids owning faces
    external,       # (n, 3) constant extra force
    collide_on,     # 0/1 sphere repulsion between non-bonded voxels
    collide_k,
    grid,           # (n, 3) integer cell coords, for the bonded test
    blow_limit,
    trace_every,    # 0 disables position tracing
    trace_offset,   # global step index of this call's first step
    trace_out,      # (rows, n, 3)
    energy_out,     # (n_steps,) or (0,)
    force_out,      # (n, 3) filled when n_steps == 0
):
    n = pos.shape[0]
    m_bonds = bond_a.shape[0]
    nf = face_owner.shape[0]
    omega = 2.0 * math.pi * freq

    force = np.empty((n, 3))
    scale = np.empty(n)
    amp_cos = np.empty(n)
    amp_sin = np.empty(n)
    for v in range(n):
        amp_cos[v] = amp[v] * math.cos(phase[v])
        amp_sin[v] = amp[v] * math.sin(phase[v])

    drag_force = np.zeros((n, 3))
    corners = np.empty((n, 8, 3))
    half_vec = np.empty((3, 2, 3))  # axis, side(-,+), component
    want_energy = energy_out.shape[0] > 0

    steps = n_steps if n_steps > 0 else 1
    for step in range(steps):
        t = t0 + step * dt
        wave_s = math.sin(omega * t)
        wave_c = math.cos(omega * t)
        for v in range(n):
            scale[v] = 1.0 + amp_cos[v] * wave_s + amp_sin[v] * wave_c

        for v in range(n):
            force[v, 0] = external[v, 0]
            force[v, 1] = external[v, 1]
            force[v, 2] = external[v, 2] - mass[v] * gravity

        for b in range(m_bonds):
            i = bond_a[b]
            j = bond_b[b]
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            dz = pos[j, 2] - pos[i, 2]
            length = math.sqrt(dx * dx + dy * dy + dz * dz)
            if length <= 0.0:
                continue
            inv = 1.0 / length
            ux = dx * inv
            uy = dy * inv
            uz = dz * inv
            rest = bond_rest[b] * 0.5 * (scale[i] + scale[j])
            v_ax = (
                (vel[j, 0] - vel[i, 0]) * ux
                + (vel[j, 1] - vel[i, 1]) * uy
                + (vel[j, 2] - vel[i, 2]) * uz
            )
            mag = bond_k[b] * (length - rest) + bond_damp[b] * v_ax
            fx = mag * ux
            fy = mag * uy
            fz = mag * uz
            force[i, 0] += fx
            force[i, 1] += fy
            force[i, 2] += fz
            force[j, 0] -= fx
            force[j, 1] -= fy
            force[j, 2] -= fz

        if collide_on != 0:
            for i in range(n):
                for j in range(i + 1, n):
                    gx = grid[i, 0] - grid[j, 0]
                    gy = grid[i, 1] - grid[j, 1]
                    gz = grid[i, 2] - grid[j, 2]
                    if gx < 0:
                        gx = -gx
                    if gy < 0:
                        gy = -gy
                    if gz < 0:
                        gz = -gz
                    if gx <= 1 and gy <= 1 and gz <= 1 and gx + gy + gz <= 2:
                        continue  # bonded neighborhood
                    dx = pos[j, 0] - pos[i, 0]
                    dy = pos[j, 1] - pos[i, 1]
                    dz = pos[j, 2] - pos[i, 2]
                    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                    if dist <= 0.0 or dist >= voxel_size:
                        continue
                    mag = collide_k * (voxel_size - dist) / dist
                    force[i, 0] -= mag * dx
                    force[i, 1] -= mag * dy
                    force[i, 2] -= mag * dz
                    force[j, 0] += mag * dx
                    force[j, 1] += mag * dy
                    force[j, 2] += mag * dz

        if drag_on != 0:
            if step % drag_every == 0:
                half = 0.5 * voxel_size
                for oi in range(owner_voxels.shape[0]):
                    v = owner_voxels[oi]
                    for axis in range(3):
                        for side in range(2):
                            nb = nbr[v, 2 * axis + side]
                            if nb >= 0:
                                half_vec[axis, side, 0] = 0.5 * (pos[nb, 0] - pos[v, 0])
                                half_vec[axis, side, 1] = 0.5 * (pos[nb, 1] - pos[v, 1])
                                half_vec[axis, side, 2] = 0.5 * (pos[nb, 2] - pos[v, 2])
                            else:
                                half_vec[axis, side, 0] = 0.0
                                half_vec[axis, side, 1] = 0.0
                                half_vec[axis, side, 2] = 0.0
                                half_vec[axis, side, axis] = half if side == 1 else -half
                    for cbit in range(8):
                        sx = cbit & 1
                        sy = (cbit >> 1) & 1
                        sz = (cbit >> 2) & 1
                        for comp in range(3):
                            corners[v, cbit, comp] = (
                                pos[v, comp]
                                + half_vec[0, sx, comp]
                                + half_vec[1, sy, comp]
                                + half_vec[2, sz, comp]
                            )
                for v in range(n):
                    drag_force[v, 0] = 0.0
                    drag_force[v, 1] = 0.0
                    drag_force[v, 2] = 0.0
                for f in range(nf):
                    o = face_owner[f]
                    d = face_dir[f]
                    c0 = face_corner[d, 0]
                    c1 = face_corner[d, 1]
                    c2 = face_corner[d, 2]
                    c3 = face_corner[d, 3]
                    for tri in range(2):
                        if tri == 0:
                            b1, b2 = c1, c2
                        else:
                            b1, b2 = c2, c3
                        e1x = corners[o, b1, 0] - corners[o, c0, 0]
                        e1y = corners[o, b1, 1] - corners[o, c0, 1]
                        e1z = corners[o, b1, 2] - corners[o, c0, 2]
                        e2x = corners[o, b2, 0] - corners[o, c0, 0]
                        e2y = corners[o, b2, 1] - corners[o, c0, 1]
                        e2z = corners[o, b2, 2] - corners[o, c0, 2]
                        nx = e1y * e2z - e1z * e2y
                        ny = e1z * e2x - e1x * e2z
                        nz = e1x * e2y - e1y * e2x
                        norm2 = math.sqrt(nx * nx + ny * ny + nz * nz)
                        if norm2 <= 0.0:
                            continue
                        inv = 1.0 / norm2
                        nxh = nx * inv
                        nyh = ny * inv
                        nzh = nz * inv
                        v_n = vel[o, 0] * nxh + vel[o, 1] * nyh + vel[o, 2] * nzh
                        if v_n <= 0.0:
                            continue
                        fmag = drag_coef * (0.5 * norm2) * v_n * v_n
                        drag_force[o, 0] -= fmag * nxh
                        drag_force[o, 1] -= fmag * nyh
                        drag_force[o, 2] -= fmag * nzh
            for v in range(n):
                force[v, 0] += drag_force[v, 0]
                force[v, 1] += drag_force[v, 1]
                force[v, 2] += drag_force[v, 2]

        if ground_on != 0:
            for v in range(n):
                m = mass[v]
                fz = force[v, 2]
                vz_free = vel[v, 2] + dt * fz / m
                if pos[v, 2] + dt * vz_free >= 0.0:
                    continue
                # implicit penalty spring-damper on the end-of-step state:
                # unconditionally stable, settles at exactly m*g/k
                denom = 1.0 + (ground_k * dt * dt + ground_c * dt) / m
                vz_new = (vel[v, 2] + dt * (fz - ground_k * pos[v, 2]) / m) / denom
                fn = m * (vz_new - vel[v, 2]) / dt - fz
                if fn <= 0.0:
                    continue
                force[v, 2] = fz + fn
                vtx = vel[v, 0] + dt * force[v, 0] / m
                vty = vel[v, 1] + dt * force[v, 1] / m
                vt = math.sqrt(vtx * vtx + vty * vty)
                if vt > 0.0:
                    f_stop = m * vt / dt
                    if f_stop <= mu_s * fn:
                        force[v, 0] -= m * vtx / dt
                        force[v, 1] -= m * vty / dt
                    else:
                        fk = mu_k * fn
                        if fk > f_stop:
                            fk = f_stop
                        force[v, 0] -= fk * vtx / vt
                        force[v, 1] -= fk * vty / vt

        if n_steps == 0:
            for v in range(n):
                force_out[v, 0] = force[v, 0]
                force_out[v, 1] = force[v, 1]
                force_out[v, 2] = force[v, 2]
            return STATUS_OK

        if trace_every > 0:
            g = trace_offset + step
            if g % trace_every == 0:
                row = g // trace_every
                for v in range(n):
                    trace_out[row, v, 0] = pos[v, 0]
                    trace_out[row, v, 1] = pos[v, 1]
                    trace_out[row, v, 2] = pos[v, 2]

        for v in range(n):
            inv_m = dt / mass[v]
            vel[v, 0] += force[v, 0] * inv_m
            vel[v, 1] += force[v, 1] * inv_m
            vel[v, 2] += force[v, 2] * inv_m
            pos[v, 0] += dt * vel[v, 0]
            pos[v, 1] += dt * vel[v, 1]
            pos[v, 2] += dt * vel[v, 2]

        for v in range(n):
            for c in range(3):
                p = pos[v, c]
                if not math.isfinite(p) or p > blow_limit or p < -blow_limit:
                    return STATUS_BLOWUP

        if want_energy:
            e = 0.0
            for v in range(n):
                e += 0.5 * mass[v] * (
                    vel[v, 0] * vel[v, 0] + vel[v, 1] * vel[v, 1] + vel[v, 2] * vel[v, 2]
                )
            for b in range(m_bonds):
                i = bond_a[b]
                j = bond_b[b]
                dx = pos[j, 0] - pos[i, 0]
                dy = pos[j, 1] - pos[i, 1]
                dz = pos[j, 2] - pos[i, 2]
                length = math.sqrt(dx * dx + dy * dy + dz * dz)
                rest = bond_rest[b] * 0.5 * (scale[i] + scale[j])
                stretch = length - rest
                e += 0.5 * bond_k[b] * stretch * stretch
            energy_out[step] = e

    return STATUS_OK
