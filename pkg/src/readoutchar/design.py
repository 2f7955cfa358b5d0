"""Automated experiment planning from design-value device parameters.

These helpers pick sweep ranges, drive amplitudes, and pulse lengths so the
protocols land inside their guard bands (peak Ramsey phase around 1 rad,
contrast inside [0.1, 0.8], unwrapped phases) without human tuning.  They
only consume *design* values; the protocols themselves never peek at the
ground truth.
"""

from __future__ import annotations

import math

import numpy as np

from . import fitting, model
from .model import DeviceParams, DrivePulse
from .protocols import SweepSpec


def sweep_plan(design: DeviceParams, points: int = 41, span_factor: float = 3.0,
               shots: int = 10_000, phase_target: float = 1.0,
               tau_over_kappa: float = 10.0) -> SweepSpec:
    """Frequency sweep for the chi/kappa/power protocol.

    The sweep amplitude is set so the peak branch phase is about
    phase_target radians (safely below pi), which also keeps the line-center
    contrast high.
    """
    kappa = design.kappa
    tau = tau_over_kappa / kappa
    omegas = np.linspace(design.omega_r - span_factor * kappa,
                         design.omega_r + span_factor * kappa, points)
    g0 = fitting._pulse_phase_factor(0.0, kappa, tau)
    chi_eff = max(abs(design.chi), kappa / 20)
    eps2 = phase_target * (kappa**2 / 4.0) / (2.0 * chi_eff * g0)
    pulse = DrivePulse(omega_d=design.omega_r, eps=math.sqrt(eps2), t_on=0.0, t_off=tau)
    return SweepSpec(omega_d_values=omegas, pulse_template=pulse, shots=shots)


def operating_pulse(design: DeviceParams, nbar: float, d_target: float = 1.2,
                    omega_d: float | None = None) -> DrivePulse:
    """Readout pulse at the requested photon number whose total dephasing
    exponent (including transients and ring-down) equals d_target."""
    if omega_d is None:
        omega_d = design.omega_r
    if design.chi == 0:
        raise ValueError("chi = 0: no dephasing at any pulse length")
    delta0 = omega_d - design.omega_r - design.chi
    # eps for the requested photon number of the state-0 branch
    eps = math.sqrt(nbar * (delta0**2 + design.kappa**2 / 4.0))

    def d_of(tau):
        pulse = DrivePulse(omega_d=omega_d, eps=eps, t_on=0.0, t_off=tau)
        return model.dephasing_exponent(design, pulse)

    lo, hi = 1e-4 / design.kappa, 1e-4 / design.kappa
    while d_of(hi) < d_target:
        hi *= 2.0
        if hi > 1e7 / design.kappa:
            raise ValueError("cannot reach the target dephasing; increase nbar")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if d_of(mid) < d_target:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    return DrivePulse(omega_d=omega_d, eps=eps, t_on=0.0, t_off=tau)


def ringdown_plan(design: DeviceParams, slice_dephasing: float = 0.4,
                  n_delays: int = 11, span_over_kappa: float = 2.5):
    """(fill pulse, delays, slice_dt) for the ring-down protocol.

    The fill photon number is chosen so the probe slice dephases by about
    slice_dephasing at zero delay, keeping both phase and contrast
    measurable.
    """
    kappa, chi = design.kappa, design.chi
    if chi == 0:
        raise ValueError("chi = 0: the Stark-phase probe carries no signal")
    slice_dt = 0.25 / kappa
    dt_eff = (1.0 - math.exp(-kappa * slice_dt)) / kappa
    nbar_fill = slice_dephasing * (chi**2 + kappa**2 / 4.0) / (2.0 * kappa * chi**2 * dt_eff)
    # keep the zero-delay slice phase comfortably below pi
    phase0 = 2.0 * abs(chi) * nbar_fill * dt_eff
    if phase0 > 1.3:
        nbar_fill *= 1.3 / phase0
    eps = math.sqrt(nbar_fill * (chi**2 + kappa**2 / 4.0))
    t_fill = 10.0 / kappa
    fill = DrivePulse(omega_d=design.omega_r, eps=eps, t_on=0.0, t_off=t_fill)
    delays = np.linspace(0.0, span_over_kappa / kappa, n_delays)
    return fill, delays, slice_dt
