# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: FK chain, geometric Jacobian, DLS IK, capsule pairs.

API mirrors _kernels_py; see that module for the array layout contract.
Matrices are handled as row-major double* internally.
"""

import numpy as np

from libc.math cimport acos, cos, fabs, sin, sqrt

BACKEND = "cython"

DEF PI = 3.141592653589793


cdef inline void _mat4_mul(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc += a[4 * i + k] * b[4 * k + j]
            out[4 * i + j] = acc


cdef inline void _joint_transform(double ax, double ay, double az, double angle,
                                  double* out) noexcept nogil:
    cdef double c = cos(angle)
    cdef double s = sin(angle)
    cdef double omc = 1.0 - c
    out[0] = c + ax * ax * omc
    out[1] = ax * ay * omc - az * s
    out[2] = ax * az * omc + ay * s
    out[3] = 0.0
    out[4] = ay * ax * omc + az * s
    out[5] = c + ay * ay * omc
    out[6] = ay * az * omc - ax * s
    out[7] = 0.0
    out[8] = az * ax * omc - ay * s
    out[9] = az * ay * omc + ax * s
    out[10] = c + az * az * omc
    out[11] = 0.0
    out[12] = 0.0
    out[13] = 0.0
    out[14] = 0.0
    out[15] = 1.0


cdef void _frames(const double* offsets, const double* axes, const double* tool,
                  const double* q, double* frames) noexcept nogil:
    # frames: 7 contiguous 4x4 blocks (after joint 1..6, then EE)
    cdef double cur[16]
    cdef double rot[16]
    cdef double tmp[16]
    cdef int i, jj
    for i in range(16):
        cur[i] = 1.0 if i % 5 == 0 else 0.0
    for jj in range(6):
        _mat4_mul(cur, offsets + 16 * jj, tmp)
        _joint_transform(axes[3 * jj], axes[3 * jj + 1], axes[3 * jj + 2], q[jj], rot)
        _mat4_mul(tmp, rot, cur)
        for i in range(16):
            frames[16 * jj + i] = cur[i]
    _mat4_mul(cur, tool, frames + 96)


cdef void _jacobian(const double* offsets, const double* axes, const double* tool,
                    const double* q, double* jac) noexcept nogil:
    # jac: row-major 6x6, rows (linear; angular), arm base frame
    cdef double cur[16]
    cdef double rot[16]
    cdef double tmp[16]
    cdef double origins[18]
    cdef double zaxes[18]
    cdef double pee[3]
    cdef int i, jj
    cdef double dx, dy, dz
    for i in range(16):
        cur[i] = 1.0 if i % 5 == 0 else 0.0
    for jj in range(6):
        _mat4_mul(cur, offsets + 16 * jj, tmp)
        for i in range(3):
            origins[3 * jj + i] = tmp[4 * i + 3]
            zaxes[3 * jj + i] = (tmp[4 * i] * axes[3 * jj]
                                 + tmp[4 * i + 1] * axes[3 * jj + 1]
                                 + tmp[4 * i + 2] * axes[3 * jj + 2])
        _joint_transform(axes[3 * jj], axes[3 * jj + 1], axes[3 * jj + 2], q[jj], rot)
        _mat4_mul(tmp, rot, cur)
    _mat4_mul(cur, tool, tmp)
    for i in range(3):
        pee[i] = tmp[4 * i + 3]
    for jj in range(6):
        dx = pee[0] - origins[3 * jj]
        dy = pee[1] - origins[3 * jj + 1]
        dz = pee[2] - origins[3 * jj + 2]
        jac[jj] = zaxes[3 * jj + 1] * dz - zaxes[3 * jj + 2] * dy
        jac[6 + jj] = zaxes[3 * jj + 2] * dx - zaxes[3 * jj] * dz
        jac[12 + jj] = zaxes[3 * jj] * dy - zaxes[3 * jj + 1] * dx
        jac[18 + jj] = zaxes[3 * jj]
        jac[24 + jj] = zaxes[3 * jj + 1]
        jac[30 + jj] = zaxes[3 * jj + 2]


def arm_frames(double[:, :, ::1] offsets, double[:, ::1] axes, double[:, ::1] tool,
               double[::1] q):
    out = np.empty((7, 4, 4))
    cdef double[:, :, ::1] out_v = out
    _frames(&offsets[0, 0, 0], &axes[0, 0], &tool[0, 0], &q[0], &out_v[0, 0, 0])
    return out


def fk_arm(double[:, :, ::1] offsets, double[:, ::1] axes, double[:, ::1] tool,
           double[::1] q):
    frames = np.empty((7, 4, 4))
    cdef double[:, :, ::1] fv = frames
    _frames(&offsets[0, 0, 0], &axes[0, 0], &tool[0, 0], &q[0], &fv[0, 0, 0])
    return frames[6]


def jacobian_arm(double[:, :, ::1] offsets, double[:, ::1] axes, double[:, ::1] tool,
                 double[::1] q):
    out = np.empty((6, 6))
    cdef double[:, ::1] out_v = out
    _jacobian(&offsets[0, 0, 0], &axes[0, 0], &tool[0, 0], &q[0], &out_v[0, 0])
    return out


cdef void _rotvec_rel(const double* target, const double* cur, double* out) noexcept nogil:
    # rotation vector of R_target @ R_cur^T; both 4x4 row-major blocks
    cdef double rel[9]
    cdef int i, j, k, idx
    cdef double tr, cos_ang, angle, scale, norm, dot
    cdef double skew[3]
    cdef double axis[3]
    for i in range(3):
        for j in range(3):
            rel[3 * i + j] = 0.0
            for k in range(3):
                rel[3 * i + j] += target[4 * i + k] * cur[4 * j + k]
    tr = rel[0] + rel[4] + rel[8]
    cos_ang = (tr - 1.0) / 2.0
    if cos_ang > 1.0:
        cos_ang = 1.0
    elif cos_ang < -1.0:
        cos_ang = -1.0
    angle = acos(cos_ang)
    skew[0] = rel[7] - rel[5]
    skew[1] = rel[2] - rel[6]
    skew[2] = rel[3] - rel[1]
    if angle < 1e-10:
        for i in range(3):
            out[i] = 0.5 * skew[i]
        return
    if PI - angle < 1e-6:
        idx = 0
        if rel[4] > rel[0]:
            idx = 1
        if rel[8] > rel[3 * idx + idx]:
            idx = 2
        norm = 0.5 * (rel[3 * idx + idx] + 1.0)
        axis[idx] = sqrt(norm) if norm > 0.0 else 0.0
        if axis[idx] > 0.0:
            for j in range(3):
                if j != idx:
                    axis[j] = 0.25 * (rel[3 * idx + j] + rel[3 * j + idx]) / axis[idx]
        else:
            axis[0] = 1.0
            axis[1] = 0.0
            axis[2] = 0.0
        norm = sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2])
        if norm > 0.0:
            for i in range(3):
                axis[i] /= norm
        dot = axis[0] * skew[0] + axis[1] * skew[1] + axis[2] * skew[2]
        if dot < 0.0:
            for i in range(3):
                axis[i] = -axis[i]
        for i in range(3):
            out[i] = axis[i] * angle
        return
    scale = angle / (2.0 * sin(angle))
    for i in range(3):
        out[i] = scale * skew[i]


cdef int _solve6(double* a, double* b, double* x) noexcept nogil:
    # Gaussian elimination with partial pivoting; a and b are clobbered.
    cdef int i, j, k, piv
    cdef double best, factor, tmp
    for k in range(6):
        piv = k
        best = fabs(a[6 * k + k])
        for i in range(k + 1, 6):
            if fabs(a[6 * i + k]) > best:
                best = fabs(a[6 * i + k])
                piv = i
        if best < 1e-300:
            return 0
        if piv != k:
            for j in range(6):
                tmp = a[6 * k + j]
                a[6 * k + j] = a[6 * piv + j]
                a[6 * piv + j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, 6):
            factor = a[6 * i + k] / a[6 * k + k]
            b[i] -= factor * b[k]
            for j in range(k, 6):
                a[6 * i + j] -= factor * a[6 * k + j]
    for i in range(5, -1, -1):
        tmp = b[i]
        for j in range(i + 1, 6):
            tmp -= a[6 * i + j] * x[j]
        x[i] = tmp / a[6 * i + i]
    return 1


def dls_ik(double[:, :, ::1] offsets, double[:, ::1] axes, double[:, ::1] tool,
           double[:, ::1] limits, double[::1] seed, double[:, ::1] target,
           double pos_tol, double rot_tol, double damping, int max_iters,
           double step_clamp):
    q_arr = np.empty(6)
    cdef double[::1] q_v = q_arr
    cdef double* q = &q_v[0]
    cdef const double* off = &offsets[0, 0, 0]
    cdef const double* ax = &axes[0, 0]
    cdef const double* tl = &tool[0, 0]
    cdef const double* lim = &limits[0, 0]
    cdef const double* tgt = &target[0, 0]
    cdef double frames[112]
    cdef double jac[36]
    cdef double jjt[36]
    cdef double err[6]
    cdef double y[6]
    cdef double dq[6]
    cdef double lam2 = damping * damping
    cdef int it, i, j, k
    cdef double pos_err, rot_err, acc, step
    cdef int ok = 0
    for i in range(6):
        q[i] = seed[i]
        if q[i] < lim[2 * i]:
            q[i] = lim[2 * i]
        elif q[i] > lim[2 * i + 1]:
            q[i] = lim[2 * i + 1]
    with nogil:
        for it in range(max_iters + 1):
            _frames(off, ax, tl, q, frames)
            for i in range(3):
                err[i] = tgt[4 * i + 3] - frames[96 + 4 * i + 3]
            _rotvec_rel(tgt, frames + 96, &err[3])
            pos_err = sqrt(err[0] * err[0] + err[1] * err[1] + err[2] * err[2])
            rot_err = sqrt(err[3] * err[3] + err[4] * err[4] + err[5] * err[5])
            if pos_err <= pos_tol and rot_err <= rot_tol:
                ok = 1
                break
            if it == max_iters:
                break
            _jacobian(off, ax, tl, q, jac)
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for k in range(6):
                        acc += jac[6 * i + k] * jac[6 * j + k]
                    jjt[6 * i + j] = acc
                jjt[6 * i + i] += lam2
            if not _solve6(jjt, err, y):
                break
            step = 0.0
            for i in range(6):
                acc = 0.0
                for k in range(6):
                    acc += jac[6 * k + i] * y[k]
                dq[i] = acc
                if fabs(dq[i]) > step:
                    step = fabs(dq[i])
            if step > step_clamp:
                for i in range(6):
                    dq[i] *= step_clamp / step
            for i in range(6):
                q[i] += dq[i]
                if q[i] < lim[2 * i]:
                    q[i] = lim[2 * i]
                elif q[i] > lim[2 * i + 1]:
                    q[i] = lim[2 * i + 1]
    return q_arr, bool(ok)


cdef double _seg_dist(const double* p, const double* q) noexcept nogil:
    # p, q: 6 doubles each (two segment endpoints)
    cdef double d1x = p[3] - p[0], d1y = p[4] - p[1], d1z = p[5] - p[2]
    cdef double d2x = q[3] - q[0], d2y = q[4] - q[1], d2z = q[5] - q[2]
    cdef double rx = p[0] - q[0], ry = p[1] - q[1], rz = p[2] - q[2]
    cdef double a = d1x * d1x + d1y * d1y + d1z * d1z
    cdef double e = d2x * d2x + d2y * d2y + d2z * d2z
    cdef double f = d2x * rx + d2y * ry + d2z * rz
    cdef double c, b, denom, s, t
    cdef double c1x, c1y, c1z, c2x, c2y, c2z
    if a <= 1e-18 and e <= 1e-18:
        return sqrt(rx * rx + ry * ry + rz * rz)
    if a <= 1e-18:
        s = 0.0
        t = f / e
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    else:
        c = d1x * rx + d1y * ry + d1z * rz
        if e <= 1e-18:
            t = 0.0
            s = -c / a
            s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
        else:
            b = d1x * d2x + d1y * d2y + d1z * d2z
            denom = a * e - b * b
            if denom > 1e-18:
                s = (b * f - c * e) / denom
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = -c / a
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
            elif t > 1.0:
                t = 1.0
                s = (b - c) / a
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
    c1x = p[0] + s * d1x - (q[0] + t * d2x)
    c1y = p[1] + s * d1y - (q[1] + t * d2y)
    c1z = p[2] + s * d1z - (q[2] + t * d2z)
    return sqrt(c1x * c1x + c1y * c1y + c1z * c1z)


def segment_distance(double[::1] p0, double[::1] p1, double[::1] q0, double[::1] q1):
    cdef double p[6]
    cdef double q[6]
    cdef int i
    for i in range(3):
        p[i] = p0[i]
        p[3 + i] = p1[i]
        q[i] = q0[i]
        q[3 + i] = q1[i]
    return _seg_dist(p, q)


def pairs_min_clearance(double[:, ::1] segs, double[::1] radii,
                        long[::1] idx_a, long[::1] idx_b, double stop_below):
    cdef double best = 1e300
    cdef double d
    cdef Py_ssize_t n = idx_a.shape[0]
    cdef Py_ssize_t k, i, j
    with nogil:
        for k in range(n):
            i = idx_a[k]
            j = idx_b[k]
            d = _seg_dist(&segs[i, 0], &segs[j, 0]) - radii[i] - radii[j]
            if d < best:
                best = d
                if best < stop_below:
                    break
    return best if best < 1e300 else float("inf")


def cross_min_clearance(double[:, ::1] segs_a, double[::1] radii_a,
                        double[:, ::1] segs_b, double[::1] radii_b, double stop_below):
    cdef double best = 1e300
    cdef double d
    cdef Py_ssize_t i, j
    cdef bint done = 0
    with nogil:
        for i in range(segs_a.shape[0]):
            if done:
                break
            for j in range(segs_b.shape[0]):
                d = _seg_dist(&segs_a[i, 0], &segs_b[j, 0]) - radii_a[i] - radii_b[j]
                if d < best:
                    best = d
                    if best < stop_below:
                        done = 1
                        break
    return best if best < 1e300 else float("inf")
