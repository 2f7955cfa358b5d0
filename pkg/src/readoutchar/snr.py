"""SNR prediction model for dispersive readout.

The matched-filter readout SNR satisfies SNR^2 = 4 * eta * D, with D the
measurement-induced dephasing exponent accumulated over the measurement
window.  A closed-form steady-state expression and a Gaussian
separation-error conversion are included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import DeviceParams, DrivePulse


@dataclass(frozen=True)
class SnrPrediction:
    snr: float
    d_exponent: float
    regime: str  # "steady-state" or "transient"
    inputs: dict

    def __post_init__(self):
        if self.snr < 0:
            raise ValueError("snr must be >= 0")


def predict_snr(params: DeviceParams, pulse: DrivePulse, tau: float = math.inf) -> SnrPrediction:
    """Matched-filter SNR = sqrt(4 * eta * D(tau)) from the exact field model.

    tau is the end of the integration window (default: include the full
    ring-down tail).
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    d = model.dephasing_exponent(params, pulse, tau=tau)
    return SnrPrediction(
        snr=math.sqrt(max(4.0 * params.eta * d, 0.0)),
        d_exponent=d,
        regime="transient",
        inputs={
            "chi": params.chi,
            "kappa": params.kappa,
            "eta": params.eta,
            "eps": pulse.eps,
            "omega_d": pulse.omega_d,
            "tau": tau,
        },
    )


def steady_state_snr(chi, kappa, nbar, eta, tau) -> float:
    """Closed form for drive at the bare resonator frequency, tau >> 1/kappa:

    SNR^2 = 8 * eta * kappa * tau * nbar * chi^2 / (chi^2 + kappa^2/4).
    """
    for name, v in (("chi", chi), ("kappa", kappa), ("nbar", nbar), ("eta", eta), ("tau", tau)):
        if v <= 0:
            raise ValueError(f"{name} must be > 0, got {v}")
    return math.sqrt(8.0 * eta * kappa * tau * nbar * chi**2 / (chi**2 + kappa**2 / 4.0))


def optimal_chi_fixed_drive(kappa: float) -> float:
    """chi maximizing the steady-state pointer separation at fixed drive
    amplitude: chi = kappa / 2."""
    if kappa <= 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    return kappa / 2.0


def separation_error(snr: float) -> float:
    """Per-state assignment error of two equal-variance Gaussian clouds with
    a midpoint threshold: (1/2) * erfc(SNR / (2*sqrt(2)))."""
    if snr < 0:
        raise ValueError(f"snr must be >= 0, got {snr}")
    return 0.5 * math.erfc(snr / (2.0 * math.sqrt(2.0)))


def boxcar_snr(params: DeviceParams, pulse: DrivePulse, window) -> float:
    """Secondary prediction with flat weights on the window (always <= the
    matched-filter SNR)."""
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("window must have positive length")
    tau = t1 - t0
    ts = np.linspace(t0, t1, 4001)
    a0 = model.field_at(params, pulse, 0, ts)
    a1 = model.field_at(params, pulse, 1, ts)
    sep = np.trapezoid(a0 - a1, dx=float(ts[1] - ts[0]))
    mu2 = params.kappa * abs(sep) ** 2 / tau
    return math.sqrt(2.0 * params.eta * mu2)
