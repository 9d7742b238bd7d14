"""Two-stage equivariant filter cascade for spacecraft rendezvous estimation.

Stage 1 estimates the chaser attitude and gyro bias from gyro and
star-tracker data; stage 2 estimates the chaser-to-target relative attitude
and the target angular velocity from body-fixed feature directions, fed by
the bias-corrected gyro stream. A Monte Carlo harness evaluates both
stages across randomized scenarios and sensor-rate variants.
"""

from .filter_base import FilterEstimate, FilterGains, NumericalFailure
from .geom import AlgebraElement, GroupElement, StageState
from .models import MeasurementBundle, SensorConfig, TruthWorld

__all__ = [
    "AlgebraElement",
    "FilterEstimate",
    "FilterGains",
    "GroupElement",
    "MeasurementBundle",
    "NumericalFailure",
    "SensorConfig",
    "StageState",
    "TruthWorld",
]
