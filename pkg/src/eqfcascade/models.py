"""Ground-truth kinematics and noisy sensor models for the simulator.

The truth consists of two inertial attitudes (target and chaser), the two
constant angular velocities, a constant gyro bias and two reference
directions fixed in the target frame. Propagation is by exact exponential
flow, which is the closed-form solution for piecewise-constant rates, so
integration error never contaminates filter-accuracy numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import StageState, cross3, exp_so3, random_unit_vector, require_rotation

COLLINEAR_TOL = 1e-3


@dataclass(frozen=True)
class TruthWorld:
    """Simulation ground truth.

    att_target, att_chaser: body-to-inertial attitude matrices.
    omega_target: target angular velocity, target frame, rad/s (constant).
    omega_chaser: chaser angular velocity, chaser frame, rad/s.
    gyro_bias: additive gyro bias, rad/s (constant).
    ref_dirs: two non-collinear unit vectors fixed in the target frame.
    """

    att_target: np.ndarray
    att_chaser: np.ndarray
    omega_target: np.ndarray
    omega_chaser: np.ndarray
    gyro_bias: np.ndarray
    ref_dirs: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        require_rotation(self.att_target)
        require_rotation(self.att_chaser)
        d1, d2 = self.ref_dirs
        if np.linalg.norm(cross3(d1, d2)) <= COLLINEAR_TOL:
            raise ValueError("reference directions are (nearly) collinear")


@dataclass(frozen=True)
class SensorConfig:
    """Sensor rates (Hz) and noise levels.

    direction_noise_std is the perturbation angle sigma (radians) shared by
    the star tracker and the feature measurements; gyro_noise_std is in
    rad/s. Measurement rates must divide the gyro rate evenly.
    """

    gyro_noise_std: float = 0.01
    direction_noise_std: float = 0.01
    gyro_rate: float = 100.0
    star_rate: float = 1.0
    feature_rate: float = 10.0

    def __post_init__(self):
        if self.gyro_noise_std < 0 or self.direction_noise_std < 0:
            raise ValueError("noise levels must be non-negative")
        for rate in (self.gyro_rate, self.star_rate, self.feature_rate):
            if rate <= 0:
                raise ValueError("rates must be positive")
        for rate in (self.star_rate, self.feature_rate):
            ratio = self.gyro_rate / rate
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError("measurement rates must divide the gyro rate")


@dataclass(frozen=True)
class MeasurementBundle:
    """Sensor output for one gyro tick; star / features are None off-schedule."""

    t: float
    gyro: np.ndarray
    star: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    features: tuple[np.ndarray, np.ndarray] | None = None


def propagate_truth(world: TruthWorld, dt: float) -> TruthWorld:
    """Advance both attitudes by dt under the constant body rates."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return TruthWorld(
        att_target=world.att_target @ exp_so3(world.omega_target * dt),
        att_chaser=world.att_chaser @ exp_so3(world.omega_chaser * dt),
        omega_target=world.omega_target,
        omega_chaser=world.omega_chaser,
        gyro_bias=world.gyro_bias,
        ref_dirs=world.ref_dirs,
    )


def relative_state(world: TruthWorld) -> StageState:
    """Chaser-to-target relative attitude and the target rate in the chaser frame."""
    rel = world.att_target.T @ world.att_chaser
    return StageState(rel, rel.T @ world.omega_target)


def measure_gyro(world: TruthWorld, noise_std: float, rng: np.random.Generator) -> np.ndarray:
    """Biased, noisy chaser angular velocity."""
    noise = noise_std * rng.normal(size=3) if noise_std > 0 else np.zeros(3)
    return world.omega_chaser + world.gyro_bias + noise


def perturb_direction(v: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate the unit vector v about a uniformly random axis by an angle ~ N(0, sigma^2)."""
    if sigma <= 0:
        return np.array(v, dtype=float)
    axis = random_unit_vector(rng)
    angle = sigma * rng.normal()
    return exp_so3(angle * axis) @ v


def measure_star_tracker(
    world: TruthWorld, noise_std: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inertial basis directions seen in the chaser frame, each independently perturbed."""
    rt = world.att_chaser.T
    return tuple(perturb_direction(rt[:, i], noise_std, rng) for i in range(3))


def measure_features(
    world: TruthWorld, noise_std: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Target reference directions seen in the chaser frame, each perturbed."""
    rel = relative_state(world).rot
    return tuple(perturb_direction(rel.T @ d, noise_std, rng) for d in world.ref_dirs)
