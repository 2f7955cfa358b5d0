"""Characterization protocols over an abstract experiment backend.

The backend exposes three capabilities: a Ramsey sequence run under a
resonator drive, single-shot IQ acquisition with given demodulation weights,
and averaged (mean) demodulation records.  The in-process simulator backend
implements them from the field model; a remote backend can substitute
without touching protocol logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from . import fitting, model, rng, signal, snr
from .model import DeviceParams, DrivePulse, FieldTrajectory, STATE_SIGN
from .signal import DegenerateSeparationError, FilterWeights, IQCloud, RamseyResult


class ProtocolError(RuntimeError):
    pass


class OverdriveError(ProtocolError):
    """Contrast outside the usable band; adjust the drive amplitude."""


class NoSignalError(ProtocolError):
    """Protocol run with zero drive; nothing to measure."""


class NoInformationError(ProtocolError):
    """chi = 0: the measurement carries no which-state information."""


class DependencyError(ProtocolError):
    """A required upstream protocol result is missing."""


@dataclass(frozen=True)
class SweepSpec:
    """Frequency sweep for the combined chi/kappa/power protocol."""

    omega_d_values: np.ndarray
    pulse_template: DrivePulse
    shots: int
    prepared_states: Sequence[int] = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "omega_d_values", np.asarray(self.omega_d_values, dtype=float))
        if len(self.omega_d_values) < 8:
            raise ValueError("need at least 8 frequency points")
        if self.shots < 100:
            raise ValueError("need at least 100 shots per point")
        if not set(self.prepared_states) <= {0, 1}:
            raise ValueError("prepared_states must be a subset of {0, 1}")


@dataclass
class CharacterizationReport:
    """Extracted readout-channel parameters with uncertainties."""

    omega_r_hat: float = math.nan
    omega_r_err: float = math.nan
    chi_hat: float = math.nan
    chi_err: float = math.nan
    kappa_hat: float = math.nan
    kappa_err: float = math.nan
    eps2_hat: float = math.nan
    eps2_err: float = math.nan
    nbar_op: dict = dc_field(default_factory=dict)  # state -> (value, stderr)
    omega_op: float = math.nan
    amp_scale: float = 1.0
    kappa_ringdown: Optional[float] = None
    kappa_ringdown_err: Optional[float] = None
    eta_hat: Optional[float] = None
    eta_err: Optional[float] = None
    raw_curves: dict = dc_field(default_factory=dict)
    fit_diagnostics: dict = dc_field(default_factory=dict)
    provenance: dict = dc_field(default_factory=dict)
    flags: list = dc_field(default_factory=list)


@dataclass
class RingdownResult:
    kappa_hat: float
    kappa_err: float
    fit: fitting.FitResult
    delays: np.ndarray
    nbar_trace: np.ndarray
    nbar_err: np.ndarray
    flags: list


@dataclass
class EfficiencyResult:
    eta_hat: float
    eta_err: float
    snr: float
    snr_err: float
    d_hat: float
    d_err: float
    contrast: float
    clouds: tuple
    flags: list


@dataclass
class SnrValidation:
    snr_predicted: float
    snr_measured: float
    snr_measured_err: float
    ratio: float
    tolerance: float
    passed: bool


class ExperimentBackend:
    """Capability set consumed by the protocols."""

    def ramsey_under_drive(self, pulse, state, shots, seed, window=None) -> RamseyResult:
        raise NotImplementedError

    def acquire_iq(self, pulse, state, weights, shots, seed) -> IQCloud:
        raise NotImplementedError

    def mean_records(self, pulse) -> FieldTrajectory:
        raise NotImplementedError


class SimulatorBackend(ExperimentBackend):
    """In-process backend wrapping the field model and detection-chain
    simulator for one device."""

    def __init__(self, params: DeviceParams):
        self.params = params

    def ramsey_under_drive(self, pulse, state, shots, seed, window=None):
        if window is None:
            window = (0.0, math.inf)
        return signal.simulate_ramsey(
            self.params, pulse, shots, seed, state=state, window=window
        )

    def acquire_iq(self, pulse, state, weights, shots, seed):
        return signal.sample_iq(self.params, pulse, state, weights, shots, seed)

    def mean_records(self, pulse):
        """Averaged demodulation records: the noise-free mean field sampled
        on a midpoint grid over [t_on, t_off + 8/kappa]."""
        return trajectory_grid(self.params, pulse)


def trajectory_grid(params: DeviceParams, pulse: DrivePulse, tail_factor=8.0,
                    resolution=0.02) -> FieldTrajectory:
    """Uniform midpoint grid covering drive plus ring-down tail, with the
    drive-off edge on a bin boundary."""
    if pulse.duration <= 0:
        raise ValueError("pulse must have positive duration")
    rate = max(
        params.kappa,
        abs(model.detuning(params, pulse, 0)),
        abs(model.detuning(params, pulse, 1)),
    )
    dt_target = resolution / rate
    n_on = max(int(math.ceil(pulse.duration / dt_target)), 8)
    dt = pulse.duration / n_on
    n_tail = max(int(math.ceil(tail_factor / params.kappa / dt)), 1)
    edges = pulse.t_on + dt * np.arange(n_on + n_tail + 1)
    mids = edges[:-1] + dt / 2
    return model.trajectory(params, pulse, mids)


def run_chi_kappa_power(backend, sweep: SweepSpec, master_seed: int,
                        omega_op: Optional[float] = None,
                        amp_scale: float = 1.0) -> CharacterizationReport:
    """Combined protocol: Ramsey phase vs drive frequency for both prepared
    states, jointly fit to the two mirrored line shapes sharing
    (omega_r, chi, kappa, eps2)."""
    tmpl = sweep.pulse_template
    tau = tmpl.duration
    states = tuple(sweep.prepared_states)
    curves = {q: {"omega_d": [], "phase": [], "phase_err": [], "contrast": []} for q in states}
    for i, w in enumerate(sweep.omega_d_values):
        pulse = DrivePulse(omega_d=float(w), eps=tmpl.eps, t_on=tmpl.t_on, t_off=tmpl.t_off)
        for q in states:
            seed = rng.stream_seed(master_seed, rng.TAG_CHI_KAPPA_POWER, i, q)
            r = backend.ramsey_under_drive(pulse, q, sweep.shots, seed)
            curves[q]["omega_d"].append(float(w))
            curves[q]["phase"].append(r.phase)
            curves[q]["phase_err"].append(max(r.phase_err, 1e-9))
            curves[q]["contrast"].append(r.contrast)
    for q in states:
        for k in curves[q]:
            curves[q][k] = np.asarray(curves[q][k])

    # overdrive guard: contrast at each curve's extremal-phase point
    for q in states:
        i_pk = int(np.argmax(np.abs(curves[q]["phase"])))
        if curves[q]["contrast"][i_pk] < 0.05:
            raise OverdriveError(
                f"contrast {curves[q]['contrast'][i_pk]:.3f} at the state-{q} line "
                "center is below 0.05; lower the sweep drive amplitude"
            )

    if set(states) == {0, 1}:
        p0 = fitting.guess_two_state_lines(
            curves[0]["omega_d"], curves[0]["phase"], curves[1]["phase"], tau
        )
    else:
        q = states[0]
        sgn = STATE_SIGN[q]
        g = fitting.guess_lorentzian(curves[q]["omega_d"], sgn * curves[q]["phase"])
        p0 = np.array([g[1], 0.1 * g[2] * sgn, g[2], max(g[0], 1e-9) * g[2] ** 2 / 8])

    x_all = np.concatenate([curves[q]["omega_d"] for q in states])
    y_all = np.concatenate([curves[q]["phase"] for q in states])
    s_all = np.concatenate([curves[q]["phase_err"] for q in states])
    labels = np.concatenate([np.full(len(curves[q]["omega_d"]), q) for q in states])

    def joint_model(x, p):
        out = np.empty_like(x)
        for q in states:
            m = labels == q
            out[m] = fitting.model_two_state_lines(x[m], p, q, tau)
        return out

    fit = fitting.lm_fit(fitting.FitProblem(x=x_all, y=y_all, sigma=s_all,
                                            model=joint_model, p0=p0))
    omega_r_hat, chi_hat, kappa_hat, eps2_hat = fit.params
    kappa_hat = abs(kappa_hat)

    flags = []
    if not fit.converged:
        flags.append("fit_not_converged")
    if 2 * abs(chi_hat) < kappa_hat / 4:
        flags.append("low_confidence_chi_lines_unresolved")
    span = float(sweep.omega_d_values.max() - sweep.omega_d_values.min())
    if span < 3 * kappa_hat:
        flags.append("sweep_span_below_3kappa")

    if omega_op is None:
        omega_op = float(omega_r_hat)
    nbar_op = {}
    for q in (0, 1):
        sgn = STATE_SIGN[q]
        delta = omega_op - omega_r_hat - sgn * chi_hat
        denom = delta**2 + kappa_hat**2 / 4
        val = eps2_hat * amp_scale**2 / denom
        # delta-method stderr from the fit covariance
        grad = np.array([
            2 * delta * val / denom,          # d/d omega_r (dDelta/domega_r = -1)
            2 * sgn * delta * val / denom,    # d/d chi
            -(kappa_hat / 2) * val / denom,   # d/d kappa
            val / max(eps2_hat, 1e-300),      # d/d eps2
        ])
        var = float(grad @ fit.covariance @ grad)
        nbar_op[q] = (float(val), math.sqrt(max(var, 0.0)))

    return CharacterizationReport(
        omega_r_hat=float(omega_r_hat),
        omega_r_err=float(fit.stderr[0]),
        chi_hat=float(chi_hat),
        chi_err=float(fit.stderr[1]),
        kappa_hat=float(kappa_hat),
        kappa_err=float(fit.stderr[2]),
        eps2_hat=float(eps2_hat),
        eps2_err=float(fit.stderr[3]),
        nbar_op=nbar_op,
        omega_op=float(omega_op),
        amp_scale=float(amp_scale),
        raw_curves={q: dict(curves[q]) for q in states},
        fit_diagnostics={"two_state_lines": fit},
        provenance={"master_seed": int(master_seed), "shots": sweep.shots,
                    "tau": tau, "points": len(sweep.omega_d_values)},
        flags=flags,
    )


def run_ringdown(backend, fill: DrivePulse, delays, shots, chi_hat,
                 master_seed: int, slice_dt: float) -> RingdownResult:
    """Resonator linewidth from free decay, probed by short Stark-phase
    Ramsey slices at increasing delay after drive turn-off."""
    if fill.eps == 0:
        raise NoSignalError("fill amplitude is zero; no photons to ring down")
    if chi_hat == 0:
        raise NoInformationError("chi = 0: Stark phase carries no photon signal")
    delays = np.asarray(delays, dtype=float)
    if len(delays) < 2:
        raise ValueError("need at least 2 delay points")
    nbar = np.empty(len(delays))
    nbar_err = np.empty(len(delays))
    for i, td in enumerate(delays):
        seed = rng.stream_seed(master_seed, rng.TAG_RINGDOWN, i, 0)
        w0 = fill.t_off + float(td)
        r = backend.ramsey_under_drive(fill, 0, shots, seed, window=(w0, w0 + slice_dt))
        nbar[i] = r.phase / (2.0 * chi_hat * slice_dt)
        nbar_err[i] = max(r.phase_err, 1e-9) / (2.0 * abs(chi_hat) * slice_dt)

    p0 = fitting.guess_exp_decay(delays, np.maximum(nbar, 1e-12))
    fit = fitting.lm_fit(fitting.FitProblem(
        x=delays, y=nbar, sigma=nbar_err,
        model=fitting.model_exp_decay, p0=p0,
        fixed=[False, False, True],  # no offset: free decay to vacuum
    ))
    kappa_hat = float(fit.params[1])
    flags = []
    if not fit.converged:
        flags.append("fit_not_converged")
    if len(delays) < 6:
        flags.append("fewer_than_6_delays")
    if kappa_hat > 0 and (delays.max() - delays.min()) < 2.0 / kappa_hat:
        flags.append("delay_span_below_2_over_kappa")
    return RingdownResult(
        kappa_hat=kappa_hat,
        kappa_err=float(fit.stderr[1]),
        fit=fit,
        delays=delays,
        nbar_trace=nbar,
        nbar_err=nbar_err,
        flags=flags,
    )


def run_efficiency(backend, pulse: DrivePulse, shots, master_seed: int) -> EfficiencyResult:
    """Coherence-free efficiency: one pulse gives both the dephasing exponent
    (via Ramsey contrast, D = -ln C) and the measured SNR (via IQ clouds with
    data-driven matched weights); eta = SNR^2 / (4 D)."""
    try:
        weights = signal.matched_filter(backend.mean_records(pulse))
    except DegenerateSeparationError as exc:
        raise NoInformationError(str(exc)) from exc

    seed_r = rng.stream_seed(master_seed, rng.TAG_EFFICIENCY, 0, 0)
    ram = backend.ramsey_under_drive(pulse, 0, shots, seed_r)
    c = ram.contrast
    if not 0.1 <= c <= 0.8:
        advice = "lower" if c < 0.1 else "raise"
        raise OverdriveError(
            f"Ramsey contrast {c:.3f} outside [0.1, 0.8]; {advice} the pulse "
            "power (or adjust its duration) and rerun"
        )
    d_hat = -math.log(c)
    d_err = ram.contrast_err / c

    clouds = []
    for q in (0, 1):
        seed = rng.stream_seed(master_seed, rng.TAG_EFFICIENCY, 1, q)
        clouds.append(backend.acquire_iq(pulse, q, weights, shots, seed))
    snr_hat, snr_err = signal.snr_with_stderr(clouds[0], clouds[1])

    eta_hat = snr_hat**2 / (4.0 * d_hat)
    eta_err = eta_hat * math.sqrt((2 * snr_err / snr_hat) ** 2 + (d_err / d_hat) ** 2)
    flags = []
    if eta_hat > 1.0 + 3.0 * eta_err:
        flags.append("eta_above_unity_unphysical")
    return EfficiencyResult(
        eta_hat=eta_hat, eta_err=eta_err,
        snr=snr_hat, snr_err=snr_err,
        d_hat=d_hat, d_err=d_err,
        contrast=c, clouds=tuple(clouds), flags=flags,
    )


def validate_snr(backend, report: CharacterizationReport, pulse: DrivePulse,
                 shots, master_seed: int, tolerance: float = 0.10) -> SnrValidation:
    """Predict SNR from the extracted parameters and compare against a direct
    measurement on the same pulse."""
    if math.isnan(report.chi_hat) or math.isnan(report.kappa_hat):
        raise DependencyError("missing chi/kappa estimates: run chi-kappa-power first")
    if report.eta_hat is None:
        raise DependencyError("missing eta estimate: run efficiency first")
    if math.isnan(report.eps2_hat):
        raise DependencyError("missing drive-power estimate: run chi-kappa-power first")

    est_params = DeviceParams(
        omega_r=report.omega_r_hat,
        chi=report.chi_hat,
        kappa=report.kappa_hat,
        eta=min(max(report.eta_hat, 1e-6), 1.0),
    )
    est_pulse = DrivePulse(
        omega_d=pulse.omega_d,
        eps=math.sqrt(max(report.eps2_hat, 0.0)) * report.amp_scale,
        t_on=pulse.t_on,
        t_off=pulse.t_off,
    )
    predicted = snr.predict_snr(est_params, est_pulse).snr

    weights = signal.matched_filter(backend.mean_records(pulse))
    clouds = []
    for q in (0, 1):
        seed = rng.stream_seed(master_seed, rng.TAG_VALIDATE_SNR, 0, q)
        clouds.append(backend.acquire_iq(pulse, q, weights, shots, seed))
    measured, measured_err = signal.snr_with_stderr(clouds[0], clouds[1])

    ratio = measured / predicted
    return SnrValidation(
        snr_predicted=predicted,
        snr_measured=measured,
        snr_measured_err=measured_err,
        ratio=ratio,
        tolerance=tolerance,
        passed=abs(ratio - 1.0) < tolerance,
    )
