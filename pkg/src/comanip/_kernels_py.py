"""Pure numpy implementations of the hot kernels.

Mirrors the API of the compiled `_kernels` extension; selected as a
fallback by `_backend` when the extension is unavailable.  All transforms
are 4x4 homogeneous matrices, arm quantities are packed arrays:

    offsets : (6, 4, 4) fixed transform preceding each joint
    axes    : (6, 3) unit rotation axes in the local joint frame
    tool    : (4, 4) flange-to-end-effector transform
    limits  : (6, 2) per-joint [lo, hi] radians
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def _axis_rotation(axis, angle):
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    omc = 1.0 - c
    return np.array(
        [
            [c + x * x * omc, x * y * omc - z * s, x * z * omc + y * s],
            [y * x * omc + z * s, c + y * y * omc, y * z * omc - x * s],
            [z * x * omc - y * s, z * y * omc + x * s, c + z * z * omc],
        ]
    )


def arm_frames(offsets, axes, tool, q):
    """Cumulative frames: (7,4,4) = frame after each joint, then the EE."""
    frames = np.empty((7, 4, 4))
    cur = np.eye(4)
    for j in range(6):
        cur = cur @ offsets[j]
        rot = np.eye(4)
        rot[:3, :3] = _axis_rotation(axes[j], q[j])
        cur = cur @ rot
        frames[j] = cur
    frames[6] = cur @ tool
    return frames


def fk_arm(offsets, axes, tool, q):
    return arm_frames(offsets, axes, tool, q)[6]


def jacobian_arm(offsets, axes, tool, q):
    """Geometric Jacobian in the arm base frame, rows (linear; angular)."""
    jac = np.empty((6, 6))
    origins = np.empty((6, 3))
    zaxes = np.empty((6, 3))
    cur = np.eye(4)
    for j in range(6):
        cur = cur @ offsets[j]
        origins[j] = cur[:3, 3]
        zaxes[j] = cur[:3, :3] @ axes[j]
        rot = np.eye(4)
        rot[:3, :3] = _axis_rotation(axes[j], q[j])
        cur = cur @ rot
    p_ee = (cur @ tool)[:3, 3]
    for j in range(6):
        jac[:3, j] = np.cross(zaxes[j], p_ee - origins[j])
        jac[3:, j] = zaxes[j]
    return jac


def _rotvec(rot):
    cos_ang = (rot[0, 0] + rot[1, 1] + rot[2, 2] - 1.0) / 2.0
    angle = math.acos(min(1.0, max(-1.0, cos_ang)))
    skew = np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )
    if angle < 1e-10:
        return 0.5 * skew
    if math.pi - angle < 1e-6:
        sym = 0.5 * (rot + np.eye(3))
        axis = np.sqrt(np.maximum(np.diag(sym), 0.0))
        idx = int(np.argmax(axis))
        if axis[idx] > 0.0:
            for j in range(3):
                if j != idx:
                    axis[j] = sym[idx, j] / axis[idx]
        norm = np.linalg.norm(axis)
        if norm > 0.0:
            axis = axis / norm
        if np.dot(axis, skew) < 0.0:
            axis = -axis
        return axis * angle
    return (angle / (2.0 * math.sin(angle))) * skew


def dls_ik(offsets, axes, tool, limits, seed, target, pos_tol, rot_tol,
           damping, max_iters, step_clamp):
    """Damped least-squares IK toward a base-frame target.

    Returns (q, converged).  The seed is returned unchanged when it already
    meets the tolerances.  Joints are clamped to their limits every step.
    """
    q = np.clip(np.asarray(seed, dtype=float).copy(), limits[:, 0], limits[:, 1])
    target_p = target[:3, 3]
    target_r = target[:3, :3]
    lam2 = damping * damping
    eye6 = np.eye(6)
    for _ in range(max_iters + 1):
        cur = fk_arm(offsets, axes, tool, q)
        err_p = target_p - cur[:3, 3]
        err_r = _rotvec(target_r @ cur[:3, :3].T)
        if np.linalg.norm(err_p) <= pos_tol and np.linalg.norm(err_r) <= rot_tol:
            return q, True
        jac = jacobian_arm(offsets, axes, tool, q)
        err = np.concatenate([err_p, err_r])
        dq = jac.T @ np.linalg.solve(jac @ jac.T + lam2 * eye6, err)
        step = np.abs(dq).max()
        if step > step_clamp:
            dq *= step_clamp / step
        q = np.clip(q + dq, limits[:, 0], limits[:, 1])
    return q, False


def segment_distance(p0, p1, q0, q1):
    """Minimum distance between segments [p0,p1] and [q0,q1]."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = float(np.dot(d1, d1))
    e = float(np.dot(d2, d2))
    f = float(np.dot(d2, r))
    if a <= 1e-18 and e <= 1e-18:
        return float(np.linalg.norm(r))
    if a <= 1e-18:
        s = 0.0
        t = min(1.0, max(0.0, f / e))
    else:
        c = float(np.dot(d1, r))
        if e <= 1e-18:
            t = 0.0
            s = min(1.0, max(0.0, -c / a))
        else:
            b = float(np.dot(d1, d2))
            denom = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > 1e-18 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    closest1 = p0 + s * d1
    closest2 = q0 + t * d2
    return float(np.linalg.norm(closest1 - closest2))


def pairs_min_clearance(segs, radii, idx_a, idx_b, stop_below):
    """Min clearance over listed capsule pairs inside one segment array.

    Early-exits once a pair falls below ``stop_below``; the returned value
    is then only guaranteed to be <= ``stop_below``.
    """
    best = math.inf
    for i, j in zip(idx_a, idx_b):
        d = segment_distance(segs[i, :3], segs[i, 3:], segs[j, :3], segs[j, 3:])
        clear = d - radii[i] - radii[j]
        if clear < best:
            best = clear
            if best < stop_below:
                return best
    return best


def cross_min_clearance(segs_a, radii_a, segs_b, radii_b, stop_below):
    """Min clearance over all capsule pairs between two sets."""
    best = math.inf
    for i in range(segs_a.shape[0]):
        for j in range(segs_b.shape[0]):
            d = segment_distance(
                segs_a[i, :3], segs_a[i, 3:], segs_b[j, :3], segs_b[j, 3:]
            )
            clear = d - radii_a[i] - radii_b[j]
            if clear < best:
                best = clear
                if best < stop_below:
                    return best
    return best
