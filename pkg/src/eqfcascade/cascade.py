"""Wiring of the two filter stages plus truth-referenced diagnostics.

Per tick, stage 1 is processed completely first (prediction, then the
iterated star-tracker update when one is due); its freshest bias estimate
is subtracted from the gyro stream before stage 2 consumes it. Truth is
only ever read by the diagnostic helpers, never by the estimation path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stage1, stage2
from .filter_base import FilterEstimate, FilterGains, initial_estimate
from .geom import (
    AlgebraElement,
    cross3,
    GroupElement,
    StageState,
    group_compose,
    group_inverse,
    log_so3,
)
from .models import MeasurementBundle, TruthWorld, relative_state


@dataclass(frozen=True)
class CascadeState:
    s1: FilterEstimate
    s2: FilterEstimate
    t: float


@dataclass(frozen=True)
class ErrorVector:
    """State error in local coordinates at the origin: rotation part in
    radians, vector part in rad/s."""

    rot: np.ndarray
    vec: np.ndarray

    def norm_rot(self) -> float:
        return float(np.linalg.norm(self.rot))

    def norm_vec(self) -> float:
        return float(np.linalg.norm(self.vec))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.rot, self.vec])


def initial_state(gains1: FilterGains, gains2: FilterGains) -> CascadeState:
    return CascadeState(initial_estimate(gains1), initial_estimate(gains2), 0.0)


def step(
    cs: CascadeState,
    bundle: MeasurementBundle,
    gains1: FilterGains,
    gains2: FilterGains,
    ref_dirs: tuple[np.ndarray, np.ndarray],
    star_period: float,
    feature_period: float,
    subtract_bias: bool = True,
) -> CascadeState:
    """Process one measurement bundle and advance the cascade to bundle.t."""
    if bundle.t < cs.t:
        raise ValueError(f"non-monotone timestamp: {bundle.t} < {cs.t}")
    dt = bundle.t - cs.t
    s1 = stage1.predict(cs.s1, bundle.gyro, gains1, dt) if dt > 0 else cs.s1
    if bundle.star is not None:
        s1 = stage1.update(s1, bundle.star, gains1, star_period)
    bias_hat = stage1.recover_state(s1.X).vec
    rate = bundle.gyro - bias_hat if subtract_bias else bundle.gyro
    s2 = stage2.predict(cs.s2, rate, gains2, dt) if dt > 0 else cs.s2
    if bundle.features is not None:
        s2 = stage2.update(s2, bundle.features, ref_dirs, gains2, feature_period)
    return CascadeState(s1, s2, bundle.t)


def _group_element_of(state: StageState) -> GroupElement:
    # the unique group element mapping the origin to the given manifold point
    return GroupElement(state.rot, -(state.rot @ state.vec))


def group_error(state_true: StageState, x_hat: GroupElement) -> GroupElement:
    """Error on the group, X_true composed with the inverse estimate."""
    return group_compose(_group_element_of(state_true), group_inverse(x_hat))


def local_error_of(e: GroupElement) -> ErrorVector:
    """Local coordinates of a group error: rotation log of the manifold
    error and its vector part."""
    return ErrorVector(log_so3(e.rot), -(e.rot.T @ e.vec))


def local_error(state_true: StageState, x_hat: GroupElement) -> ErrorVector:
    return local_error_of(group_error(state_true, x_hat))


def group_error1(cs: CascadeState, world: TruthWorld) -> GroupElement:
    return group_error(StageState(world.att_chaser, world.gyro_bias), cs.s1.X)


def group_error2(cs: CascadeState, world: TruthWorld) -> GroupElement:
    return group_error(relative_state(world), cs.s2.X)


def local_error1(cs: CascadeState, world: TruthWorld) -> ErrorVector:
    return local_error(StageState(world.att_chaser, world.gyro_bias), cs.s1.X)


def local_error2(cs: CascadeState, world: TruthWorld) -> ErrorVector:
    return local_error(relative_state(world), cs.s2.X)


def gamma_term(
    att1_hat: np.ndarray,
    att2_hat: np.ndarray,
    vec2_hat: np.ndarray,
    bias_error: np.ndarray,
) -> AlgebraElement:
    """Perturbation injected into the stage-2 error flow by residual
    stage-1 bias error; vanishes with the bias error."""
    carried = att2_hat @ (att1_hat.T @ bias_error)
    return AlgebraElement(carried, cross3(vec2_hat, carried))


def lyapunov_value(eps: ErrorVector, sigma: np.ndarray) -> float:
    """Quadratic error measure weighted by the inverse Riccati state."""
    e = eps.stacked()
    try:
        v = float(e @ np.linalg.solve(sigma, e))
    except np.linalg.LinAlgError as exc:
        raise ValueError("Riccati state is singular") from exc
    return v
