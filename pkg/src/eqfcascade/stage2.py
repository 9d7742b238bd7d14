"""Second filter stage: relative attitude and target angular velocity from
the (bias-corrected) chaser rate and two body-fixed feature directions.

The state manifold is SO(3) x R^3 with points (relative attitude, target
rate in the chaser frame). Equivariance of the rate dynamics needs two
virtual inputs v and w alongside the physical input u; they are zero on
every production path but are plumbed through so the symmetry can be
exercised off-zero in tests. The group element (Q, q) acts on the right by

    state:  (R, omega)  ->  (R Q, Q^T (omega - q))
    input:  (u, v, w)   ->  (Q^T u, Q^T (v - q), Q^T (w + q))
    output: y_i         ->  Q^T y_i

With (v, w) the extended dynamics are

    R_dot     = R (u - omega + v)^
    omega_dot = omega x u - u x w

which restrict to the physical system at v = w = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filter_base import (
    FilterEstimate,
    FilterGains,
    apply_correction,
    require_spd,
    riccati_correct,
    riccati_predict,
    tangent_to_algebra,
)
from .geom import AlgebraElement, GroupElement, StageState, cross3, exp_so3, renormalize_rotation, wedge

ORIGIN = StageState(np.eye(3), np.zeros(3))

FeaturePair = tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ExtendedInput:
    """Physical rate input plus the two virtual inputs (zero in production)."""

    u: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))


def state_action(g: GroupElement, xi: StageState) -> StageState:
    return StageState(xi.rot @ g.rot, g.rot.T @ (xi.vec - g.vec))


def input_action(g: GroupElement, inp: ExtendedInput) -> ExtendedInput:
    qt = g.rot.T
    return ExtendedInput(qt @ inp.u, qt @ (inp.v - g.vec), qt @ (inp.w + g.vec))


def output_action(g: GroupElement, y: FeaturePair) -> FeaturePair:
    return tuple(g.rot.T @ yi for yi in y)


def lift(xi: StageState, inp: ExtendedInput) -> AlgebraElement:
    return AlgebraElement(
        inp.u - xi.vec + inp.v,
        cross3(inp.u, inp.w) + cross3(xi.vec, inp.v),
    )


def recover_state(x: GroupElement) -> StageState:
    return state_action(x, ORIGIN)


def output_map(xi: StageState, ref_dirs: FeaturePair) -> FeaturePair:
    """Feature model: the target-fixed reference directions in body coordinates."""
    return tuple(xi.rot.T @ d for d in ref_dirs)


def a_matrix(x: GroupElement) -> np.ndarray:
    a = np.zeros((6, 6))
    a[0:3, 3:6] = -np.eye(3)
    a[3:6, 3:6] = wedge(x.vec)
    return a


def c_matrix(y: FeaturePair, y_hat: FeaturePair, rot_hat: np.ndarray) -> np.ndarray:
    c = np.zeros((6, 6))
    for i in range(2):
        c[3 * i : 3 * i + 3, 0:3] = 0.5 * wedge(y[i] + y_hat[i]) @ rot_hat.T
    return c


def predict(est: FilterEstimate, rate: np.ndarray, gains: FilterGains, dt: float) -> FilterEstimate:
    """Propagate with the physical input only (virtual inputs zero)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    lam = lift(recover_state(est.X), ExtendedInput(rate))
    a = a_matrix(est.X)
    rot = renormalize_rotation(est.X.rot @ exp_so3(dt * lam.rot))
    vec = est.X.vec + dt * (est.X.rot @ lam.vec)
    sigma = riccati_predict(est.Sigma, a, gains.M, dt)
    return FilterEstimate(GroupElement(rot, vec), sigma)


def update(
    est: FilterEstimate,
    y: FeaturePair,
    ref_dirs: FeaturePair,
    gains: FilterGains,
    dt_update: float,
) -> FilterEstimate:
    """Apply one feature measurement, iterated over the update interval."""
    if dt_update <= 0:
        raise ValueError("dt_update must be positive")
    tau = dt_update / gains.update_iterations
    x, sigma = est.X, est.Sigma
    y_stack = np.concatenate(y)
    n_inv = np.linalg.inv(gains.N)
    for _ in range(gains.update_iterations):
        y_hat = output_map(recover_state(x), ref_dirs)
        c = c_matrix(y, y_hat, x.rot)
        resid = y_stack - np.concatenate(y_hat)
        gain = sigma @ (c.T @ (n_inv @ resid))
        x = apply_correction(x, tangent_to_algebra(gain), tau)
        sigma = riccati_correct(sigma, c, gains.N, tau)
    require_spd(sigma, "stage-2 update")
    return FilterEstimate(GroupElement(renormalize_rotation(x.rot), x.vec), sigma)
