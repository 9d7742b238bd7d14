"""SO(3)/SE(3) primitives shared by the whole filter stack.

Rotations are plain 3x3 numpy arrays and 3-vectors are shape-(3,) arrays.
The symmetry group is SE(3) used abstractly as (rotation, vector) pairs
with product (A1, a1) * (A2, a2) = (A1 A2, A1 a2 + a1); the vector slot
transports bias / angular-velocity states rather than a position.

All functions are pure; randomness enters only through an explicit
numpy Generator argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SMALL_ANGLE = 1e-4  # below this, Taylor series replace sin/cos ratios
SKEW_TOL = 1e-6  # max Frobenius norm of the symmetric part accepted by vee
PI_BRANCH = 1e-6  # log switches to axis extraction within this of pi
ORTHO_TOL = 1e-9  # rotation validity / renormalization threshold

_EYE3 = np.eye(3)
_EYE3.flags.writeable = False


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors (numpy.cross has heavy overhead here)."""
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def wedge(x: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of x, so that wedge(x) @ y == cross(x, y)."""
    x = np.asarray(x, dtype=float)
    return np.array(
        [
            [0.0, -x[2], x[1]],
            [x[2], 0.0, -x[0]],
            [-x[1], x[0], 0.0],
        ]
    )


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of wedge. Rejects matrices that are not skew-symmetric."""
    m = np.asarray(m, dtype=float)
    sym = 0.5 * (m + m.T)
    if np.linalg.norm(sym) > SKEW_TOL:
        raise ValueError(
            f"vee: input is not skew-symmetric (symmetric part norm "
            f"{np.linalg.norm(sym):.3e} > {SKEW_TOL:.0e})"
        )
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def exp_so3(x: np.ndarray) -> np.ndarray:
    """Rotation matrix exp(wedge(x)) by the Rodrigues formula."""
    x = np.asarray(x, dtype=float)
    angle = math.sqrt(float(x @ x))
    k = wedge(x)
    if angle < SMALL_ANGLE:
        a = 1.0 - angle * angle / 6.0
        b = 0.5 - angle * angle / 24.0
    else:
        a = math.sin(angle) / angle
        b = (1.0 - math.cos(angle)) / (angle * angle)
    return _EYE3 + a * k + b * (k @ k)


def log_so3(r: np.ndarray) -> np.ndarray:
    """Rotation vector with norm <= pi such that exp_so3 inverts it.

    Near angle pi the skew part of r carries almost no signal, so the axis
    is recovered from the symmetric part instead; the axis sign follows the
    skew part while it is above rounding noise and otherwise is fixed by
    making the largest-magnitude component positive.
    """
    r = np.asarray(r, dtype=float)
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    cos_angle = min(1.0, max(-1.0, 0.5 * (trace - 1.0)))
    skew_vec = 0.5 * np.array(
        [r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]
    )  # == sin(angle) * axis
    sin_angle = math.sqrt(float(skew_vec @ skew_vec))
    # atan2 stays well conditioned where acos(trace) loses digits near pi
    angle = math.atan2(sin_angle, cos_angle)
    if angle < SMALL_ANGLE:
        return skew_vec * (1.0 + angle * angle / 6.0)
    if angle > math.pi - PI_BRANCH:
        return _log_pi_branch(r, cos_angle, skew_vec)
    return skew_vec * (angle / sin_angle)


def _log_pi_branch(r: np.ndarray, cos_angle: float, skew_vec: np.ndarray) -> np.ndarray:
    # (r + r^T)/2 = cos(t) I + (1 - cos t) n n^T with 1 - cos t ~ 2 here
    nnt = (0.5 * (r + r.T) - cos_angle * np.eye(3)) / (1.0 - cos_angle)
    k = int(np.argmax(np.diag(nnt)))
    axis = nnt[:, k] / math.sqrt(nnt[k, k])
    axis = axis / np.linalg.norm(axis)
    s = float(np.linalg.norm(skew_vec))
    angle = math.pi - math.asin(min(1.0, s))
    if s > 1e-12:
        if float(axis @ skew_vec) < 0.0:
            axis = -axis
    else:
        j = int(np.argmax(np.abs(axis)))
        if axis[j] < 0.0:
            axis = -axis
    return angle * axis


def is_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    if np.max(np.abs(r.T @ r - _EYE3)) > tol:
        return False
    det = float(
        r[0, 0] * (r[1, 1] * r[2, 2] - r[1, 2] * r[2, 1])
        - r[0, 1] * (r[1, 0] * r[2, 2] - r[1, 2] * r[2, 0])
        + r[0, 2] * (r[1, 0] * r[2, 1] - r[1, 1] * r[2, 0])
    )
    return abs(det - 1.0) <= tol


def require_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> None:
    if not is_rotation(r, tol):
        raise ValueError("matrix is not a valid rotation (orthonormal, det +1)")


def project_so3(m: np.ndarray) -> np.ndarray:
    """Closest rotation to m in the Frobenius sense (polar projection)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def renormalize_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    """Re-project onto SO(3) once orthonormality drift exceeds tol.

    Long exponential-product integrations accumulate rounding drift; below
    tol the matrix is returned unchanged so the hot path stays cheap.
    """
    drift = np.max(np.abs(r.T @ r - _EYE3))
    if drift > tol:
        return project_so3(r)
    return r


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Rotation sampled uniformly w.r.t. the Haar measure on SO(3).

    Uses the normalized-4D-Gaussian quaternion construction.
    """
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    """Direction sampled uniformly on the 2-sphere."""
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def rotation_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic distance between two rotations, in [0, pi] radians."""
    return float(np.linalg.norm(log_so3(np.asarray(r1).T @ np.asarray(r2))))


@dataclass(frozen=True)
class GroupElement:
    """Element of the symmetry group: a rotation and a 3-vector."""

    rot: np.ndarray
    vec: np.ndarray


@dataclass(frozen=True)
class AlgebraElement:
    """Lie-algebra element in coordinates: so(3) part and vector part."""

    rot: np.ndarray
    vec: np.ndarray


@dataclass(frozen=True)
class StageState:
    """Point on a stage's state manifold: an attitude and a 3-vector.

    The vector slot is the gyro bias for stage 1 and the target angular
    velocity (chaser frame) for stage 2, both in rad/s.
    """

    rot: np.ndarray
    vec: np.ndarray


def identity_element() -> GroupElement:
    return GroupElement(np.eye(3), np.zeros(3))


def group_compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    return GroupElement(g1.rot @ g2.rot, g1.rot @ g2.vec + g1.vec)


def group_inverse(g: GroupElement) -> GroupElement:
    rt = g.rot.T
    return GroupElement(rt, -(rt @ g.vec))
