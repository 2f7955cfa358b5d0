"""Simulator and parameter-estimation toolkit for dispersive qubit readout."""

__version__ = "0.1.0"

from .model import DeviceParams, DrivePulse, FieldTrajectory  # noqa: F401
from .signal import FilterWeights, IQCloud, RamseyResult  # noqa: F401
