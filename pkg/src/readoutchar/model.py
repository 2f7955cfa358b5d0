"""Dispersive-readout field model.

Qubit-state-dependent dynamics of a driven, damped readout resonator in the
frame rotating at the drive frequency.  The resonator is pulled to
``omega_r + s_q * chi`` with ``s_0 = +1`` and ``s_1 = -1``, and the complex
field amplitude obeys

    d(alpha)/dt = -(i * Delta_q + kappa / 2) * alpha - i * eps(t)

with detuning ``Delta_q = omega_d - omega_r - s_q * chi`` and a
piecewise-constant square drive envelope ``eps(t)``.

Units: angular frequencies and rates in rad/us, times in us, fields in
sqrt(photons).  All closed-form results here are cross-checked against the
fixed-step RK4 integrator :func:`integrate_alpha_ode`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STATE_SIGN = {0: 1.0, 1: -1.0}


class GridResolutionError(ValueError):
    """Raised when an integration grid is too coarse for the dynamics."""


@dataclass(frozen=True)
class DeviceParams:
    """Physical parameters of one readout channel.

    omega_r : bare resonator frequency, rad/us
    chi     : dispersive half-shift, rad/us (pulled lines at omega_r +/- chi)
    kappa   : resonator energy decay rate, rad/us
    eta     : measurement efficiency, in (0, 1]
    """

    omega_r: float
    chi: float
    kappa: float
    eta: float

    def __post_init__(self):
        if not self.omega_r > 0:
            raise ValueError(f"omega_r must be > 0, got {self.omega_r}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class DrivePulse:
    """Square resonator drive: amplitude eps on [t_on, t_off), zero outside.

    eps is in sqrt(photons)/us, omega_d in rad/us, times in us.
    """

    omega_d: float
    eps: float
    t_on: float
    t_off: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if not 0 <= self.t_on <= self.t_off:
            raise ValueError(
                f"need 0 <= t_on <= t_off, got t_on={self.t_on}, t_off={self.t_off}"
            )

    @property
    def duration(self) -> float:
        return self.t_off - self.t_on


@dataclass(frozen=True)
class FieldTrajectory:
    """Complex resonator field sampled on a time grid, one array per state."""

    times: np.ndarray
    alpha0: np.ndarray
    alpha1: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if not (len(t) == len(self.alpha0) == len(self.alpha1)):
            raise ValueError("times, alpha0, alpha1 must have equal length")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def detuning(params: DeviceParams, pulse: DrivePulse, q: int) -> float:
    """Rotating-frame detuning Delta_q = omega_d - omega_r - s_q * chi."""
    return pulse.omega_d - params.omega_r - STATE_SIGN[q] * params.chi


def _decay_const(params: DeviceParams, pulse: DrivePulse, q: int) -> complex:
    return 1j * detuning(params, pulse, q) + params.kappa / 2


def steady_state_alpha(params: DeviceParams, pulse: DrivePulse, q: int) -> complex:
    """Steady-state field alpha_ss = -i*eps / (i*Delta_q + kappa/2)."""
    return -1j * pulse.eps / _decay_const(params, pulse, q)


def transient_alpha(params, pulse, q, t, alpha_init=0j):
    """Field at time t for constant drive switched on at t = 0.

    alpha(t) = alpha_ss + (alpha_init - alpha_ss) * exp(-(i*Delta + kappa/2)*t).
    With eps = 0 this is pure ring-down from alpha_init.  Accepts scalar or
    array t.
    """
    a_ss = steady_state_alpha(params, pulse, q)
    s = _decay_const(params, pulse, q)
    t = np.asarray(t, dtype=float)
    out = a_ss + (alpha_init - a_ss) * np.exp(-s * t)
    return out if out.ndim else complex(out)


def _segments(params, pulse, q):
    """Piecewise representation alpha(t) = A + B*exp(-s*(t - t_start)).

    Returns a list of (t_start, t_end, A, B); the last segment extends to
    infinity with zero drive.
    """
    s = _decay_const(params, pulse, q)
    a_ss = steady_state_alpha(params, pulse, q)
    segs = []
    if pulse.t_on > 0:
        segs.append((0.0, pulse.t_on, 0j, 0j))
    if pulse.t_off > pulse.t_on:
        segs.append((pulse.t_on, pulse.t_off, a_ss, -a_ss))
    a_end = a_ss * (1 - np.exp(-s * pulse.duration))
    segs.append((pulse.t_off, math.inf, 0j, complex(a_end)))
    return segs


def field_at(params, pulse, q, t):
    """Field alpha_q(t) for the full pulse timeline (vacuum before t_on)."""
    t = np.asarray(t, dtype=float)
    s = _decay_const(params, pulse, q)
    out = np.zeros(t.shape, dtype=complex)
    for t0, t1, a, b in _segments(params, pulse, q):
        m = (t >= t0) & (t < t1)
        if np.any(m):
            out[m] = a + b * np.exp(-s * (t[m] - t0))
    return out if out.ndim else complex(out)


def trajectory(params: DeviceParams, pulse: DrivePulse, times) -> FieldTrajectory:
    """Sample both pointer-state fields on a grid (analytic, exact)."""
    times = np.asarray(times, dtype=float)
    return FieldTrajectory(
        times=times,
        alpha0=field_at(params, pulse, 0, times),
        alpha1=field_at(params, pulse, 1, times),
    )


def integrate_alpha_ode(params: DeviceParams, pulse: DrivePulse, times) -> FieldTrajectory:
    """Numerical oracle: classical fixed-step RK4 for both pointer states.

    The grid must be uniform with dt <= 0.05 / max(kappa, |Delta_0|,
    |Delta_1|, 1) and must contain the pulse edges (so the piecewise-constant
    envelope stays exactly resolved); violations raise GridResolutionError.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise GridResolutionError("grid needs at least 2 points")
    dts = np.diff(times)
    dt = dts[0]
    if not np.allclose(dts, dt, rtol=1e-9, atol=0.0):
        raise GridResolutionError("grid must be uniform")
    rate = max(
        params.kappa,
        abs(detuning(params, pulse, 0)),
        abs(detuning(params, pulse, 1)),
        1.0,
    )
    if dt > 0.05 / rate:
        raise GridResolutionError(
            f"dt={dt:.3g} too coarse: need dt <= {0.05 / rate:.3g} "
            f"(0.05 / max rate {rate:.3g})"
        )
    for edge in (pulse.t_on, pulse.t_off):
        if times[0] <= edge <= times[-1]:
            k = (edge - times[0]) / dt
            if abs(k - round(k)) > 1e-6:
                raise GridResolutionError(
                    f"pulse edge t={edge} must lie on a grid node"
                )

    # the envelope is constant within each step (edges lie on nodes), so the
    # drive for a step is its value at the step midpoint
    mids = times[:-1] + dt / 2
    eps_steps = np.where((mids >= pulse.t_on) & (mids < pulse.t_off), pulse.eps, 0.0)

    s = np.array([_decay_const(params, pulse, 0), _decay_const(params, pulse, 1)])
    out = np.empty((len(times), 2), dtype=complex)
    out[0] = 0j
    y = np.zeros(2, dtype=complex)
    for i in range(len(times) - 1):
        drive = 1j * eps_steps[i]
        k1 = -s * y - drive
        k2 = -s * (y + dt / 2 * k1) - drive
        k3 = -s * (y + dt / 2 * k2) - drive
        k4 = -s * (y + dt * k3) - drive
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return FieldTrajectory(times=times, alpha0=out[:, 0], alpha1=out[:, 1])


def stark_shift(params: DeviceParams, q: int, n: float) -> float:
    """AC Stark shift of the qubit, 2 * s_q * chi * n, for photon number n."""
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    return 2.0 * STATE_SIGN[q] * params.chi * n


# -- closed-form overlap integrals ------------------------------------------

def _overlap_finite(Aa, Ba, sa, Ab, Bb, sb, T):
    """integral_0^T (Aa + Ba e^{-sa t}) conj(Ab + Bb e^{-sb t}) dt."""
    sbc = np.conj(sb)
    return (
        Aa * np.conj(Ab) * T
        + Aa * np.conj(Bb) * (1 - np.exp(-sbc * T)) / sbc
        + Ba * np.conj(Ab) * (1 - np.exp(-sa * T)) / sa
        + Ba * np.conj(Bb) * (1 - np.exp(-(sa + sbc) * T)) / (sa + sbc)
    )


def field_overlap(params, pulse, qa, qb, t0=0.0, t1=math.inf):
    """Exact integral_{t0}^{t1} alpha_qa(t) * conj(alpha_qb(t)) dt.

    Evaluated segment by segment from the piecewise closed form; t1 may be
    inf (the post-pulse ring-down tail converges since kappa > 0).
    """
    if t1 < t0:
        raise ValueError(f"need t1 >= t0, got [{t0}, {t1}]")
    sa = _decay_const(params, pulse, qa)
    sb = _decay_const(params, pulse, qb)
    segs_a = _segments(params, pulse, qa)
    segs_b = _segments(params, pulse, qb)
    total = 0j
    for (ta0, ta1, Aa, Ba), (_, _, Ab, Bb) in zip(segs_a, segs_b):
        lo = max(ta0, t0)
        hi = min(ta1, t1)
        if hi <= lo:
            continue
        # shift the exponential prefactors to the sub-interval start
        Ba_ = Ba * np.exp(-sa * (lo - ta0))
        Bb_ = Bb * np.exp(-sb * (lo - ta0))
        if math.isinf(hi):
            # last segment has zero drive (Aa = Ab = 0)
            total += Ba_ * np.conj(Bb_) / (sa + np.conj(sb))
        else:
            total += _overlap_finite(Aa, Ba_, sa, Ab, Bb_, sb, hi - lo)
    return complex(total)


def dephasing_exponent(params, pulse, tau=math.inf, t_start=0.0):
    """Measurement-induced dephasing D = (kappa/2) * int |alpha0 - alpha1|^2 dt
    over [t_start, tau]."""
    i00 = field_overlap(params, pulse, 0, 0, t_start, tau).real
    i11 = field_overlap(params, pulse, 1, 1, t_start, tau).real
    i01 = field_overlap(params, pulse, 0, 1, t_start, tau).real
    return (params.kappa / 2) * (i00 + i11 - 2 * i01)


def differential_phase(params, pulse, tau=math.inf, t_start=0.0):
    """Differential qubit phase Phi = 2*chi * int Re[alpha0 conj(alpha1)] dt."""
    return 2.0 * params.chi * field_overlap(params, pulse, 0, 1, t_start, tau).real


def state_phase(params, pulse, q, tau=math.inf, t_start=0.0):
    """Stark phase of pointer branch q, 2 * s_q * chi * int |alpha_q|^2 dt.

    This is the phase observable of the single-branch Ramsey variant used by
    the line-shape sweep; the standard two-branch differential phase is
    :func:`differential_phase`.
    """
    n_int = field_overlap(params, pulse, q, q, t_start, tau).real
    return 2.0 * STATE_SIGN[q] * params.chi * n_int
