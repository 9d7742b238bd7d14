"""Pieces shared by both filter stages: estimate/gain containers, the
Riccati steps and the group-level correction integrator.

Both stages keep a group element (attitude estimate plus a transported
3-vector) and a 6x6 Riccati matrix. Prediction integrates the lifted
dynamics with the exponential map on the rotation part and explicit Euler
on the vector and Riccati parts. Corrections are integrated over the
measurement interval in `update_iterations` equal sub-steps, re-linearizing
at every sub-step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import GroupElement, cross3, exp_so3, identity_element


class NumericalFailure(Exception):
    """Riccati state lost positive-definiteness or the estimate went non-finite."""


@dataclass(frozen=True)
class FilterGains:
    """Constant tuning matrices: state gain M (6x6), output gain N
    (9x9 for stage 1, 6x6 for stage 2), initial Riccati state Sigma0 (6x6),
    and the number of correction sub-steps per measurement."""

    M: np.ndarray
    N: np.ndarray
    Sigma0: np.ndarray
    update_iterations: int = 20

    def __post_init__(self):
        if self.update_iterations < 1:
            raise ValueError("update_iterations must be >= 1")
        for name, mat in (("M", self.M), ("N", self.N), ("Sigma0", self.Sigma0)):
            if not _is_spd(np.asarray(mat)):
                raise ValueError(f"gain matrix {name} must be symmetric positive definite")

    @classmethod
    def identity_scaled(
        cls,
        output_dim: int,
        state_gain: float = 1.0,
        output_gain: float = 0.1,
        sigma0: float = 1.0,
        update_iterations: int = 20,
    ) -> "FilterGains":
        return cls(
            M=state_gain * np.eye(6),
            N=output_gain * np.eye(output_dim),
            Sigma0=sigma0 * np.eye(6),
            update_iterations=update_iterations,
        )


@dataclass(frozen=True)
class FilterEstimate:
    """Group state estimate and its 6x6 Riccati matrix."""

    X: GroupElement
    Sigma: np.ndarray


def initial_estimate(gains: FilterGains) -> FilterEstimate:
    return FilterEstimate(identity_element(), np.array(gains.Sigma0, dtype=float))


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _is_spd(m: np.ndarray) -> bool:
    if not np.all(np.isfinite(m)) or np.max(np.abs(m - m.T)) > 1e-9 * (1 + np.max(np.abs(m))):
        return False
    try:
        np.linalg.cholesky(symmetrize(m))
        return True
    except np.linalg.LinAlgError:
        return False


def require_spd(sigma: np.ndarray, where: str) -> None:
    if not _is_spd(sigma):
        raise NumericalFailure(f"Riccati state not positive definite after {where}")


def riccati_predict(sigma: np.ndarray, a: np.ndarray, m: np.ndarray, dt: float) -> np.ndarray:
    """Euler step of the propagation part: Sigma + (A Sigma + Sigma A^T + M) dt."""
    return symmetrize(sigma + dt * (a @ sigma + sigma @ a.T + m))


def riccati_correct(sigma: np.ndarray, c: np.ndarray, n: np.ndarray, tau: float) -> np.ndarray:
    """Contraction sub-step of the Riccati flow with the measurement held.

    Integrates d(Sigma)/dt = -Sigma C^T N^-1 C Sigma exactly over tau (C
    frozen), i.e. Sigma <- Sigma - Sigma C^T (N/tau + C Sigma C^T)^-1 C Sigma.
    Agrees with the Euler decrement to O(tau^2) but cannot overshoot, so
    Sigma stays positive definite for any sub-step length.
    """
    cs = c @ sigma
    s = c @ cs.T + n / tau
    try:
        return symmetrize(sigma - cs.T @ np.linalg.solve(s, cs))
    except np.linalg.LinAlgError as exc:
        # a diverged state can push the innovation system to singularity
        raise NumericalFailure(f"Riccati correction became singular: {exc}") from exc


def tangent_to_algebra(m: np.ndarray) -> np.ndarray:
    """Map a tangent-space correction into the Lie algebra.

    The state-action differential at the origin sends an algebra element
    (w, s) to the tangent vector (w, -s), so its right inverse flips the
    sign of the vector part.
    """
    return np.concatenate([m[:3], -m[3:]])


def apply_correction(x: GroupElement, delta: np.ndarray, tau: float) -> GroupElement:
    """Integrate the left correction (Delta X, Delta x.vec + delta_vec) over tau."""
    rot = exp_so3(delta[:3] * tau) @ x.rot
    vec = x.vec + tau * (cross3(delta[:3], x.vec) + delta[3:])
    return GroupElement(rot, vec)
