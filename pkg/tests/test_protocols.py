"""Protocol tests: closed-loop parameter recovery on the simulator backend,
error contracts, and structural backend usage."""

import math

import numpy as np
import pytest

from readoutchar import design, model, protocols, rng, signal
from readoutchar.model import DeviceParams, DrivePulse
from readoutchar.protocols import (DependencyError, NoInformationError,
                                   NoSignalError, OverdriveError,
                                   SimulatorBackend, SweepSpec)

TRUTH = DeviceParams(omega_r=50.0, chi=2.0, kappa=4.0, eta=0.6)


class RecordingBackend(protocols.ExperimentBackend):
    """Wraps a backend and records which capabilities the protocols invoke."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def ramsey_under_drive(self, pulse, state, shots, seed, window=None):
        self.calls.append(("ramsey", state, window))
        return self.inner.ramsey_under_drive(pulse, state, shots, seed, window=window)

    def acquire_iq(self, pulse, state, weights, shots, seed):
        self.calls.append(("acquire_iq", state))
        return self.inner.acquire_iq(pulse, state, weights, shots, seed)

    def mean_records(self, pulse):
        self.calls.append(("mean_records",))
        return self.inner.mean_records(pulse)


class ExactRamseyBackend(protocols.ExperimentBackend):
    """Noise-free backend: Ramsey results carry the exact model values."""

    def __init__(self, params):
        self.params = params

    def ramsey_under_drive(self, pulse, state, shots, seed, window=None):
        t0, t1 = window if window is not None else (0.0, math.inf)
        d = model.dephasing_exponent(self.params, pulse, tau=t1, t_start=t0)
        phi = model.state_phase(self.params, pulse, state, tau=t1, t_start=t0)
        return signal.RamseyResult(phase=math.remainder(phi, 2 * math.pi),
                                   contrast=min(math.exp(-d), 1.0),
                                   shots=shots, phase_err=1e-6, contrast_err=1e-6)

    def acquire_iq(self, pulse, state, weights, shots, seed):
        return signal.sample_iq(self.params, pulse, state, weights, shots, seed)

    def mean_records(self, pulse):
        return protocols.trajectory_grid(self.params, pulse)


class TestChiKappaPower:
    def run(self, truth=TRUTH, shots=20_000, seed=101):
        be = SimulatorBackend(truth)
        sweep = design.sweep_plan(truth, shots=shots)
        return protocols.run_chi_kappa_power(be, sweep, seed)

    def test_recovers_parameters(self):
        rep = self.run()
        assert rep.chi_hat == pytest.approx(TRUTH.chi, rel=0.03)
        assert rep.kappa_hat == pytest.approx(TRUTH.kappa, rel=0.03)
        assert rep.omega_r_hat == pytest.approx(TRUTH.omega_r, abs=0.05)
        assert not rep.flags

    def test_deterministic(self):
        a, b = self.run(seed=55), self.run(seed=55)
        assert a.chi_hat == b.chi_hat and a.kappa_hat == b.kappa_hat
        assert a.chi_hat != self.run(seed=56).chi_hat

    def test_noise_free_recovery_is_tight(self):
        be = ExactRamseyBackend(TRUTH)
        sweep = design.sweep_plan(TRUTH, shots=1000)
        rep = protocols.run_chi_kappa_power(be, sweep, 1)
        assert rep.chi_hat == pytest.approx(TRUTH.chi, rel=1e-4)
        assert rep.kappa_hat == pytest.approx(TRUTH.kappa, rel=1e-4)

    def test_drive_power_scaling(self):
        """Doubling the sweep amplitude quadruples the extracted eps2."""
        be = ExactRamseyBackend(DeviceParams(omega_r=50.0, chi=1.0, kappa=4.0, eta=0.6))
        base = design.sweep_plan(be.params, shots=1000, phase_target=0.3)
        t = base.pulse_template
        double = SweepSpec(omega_d_values=base.omega_d_values,
                           pulse_template=DrivePulse(omega_d=t.omega_d, eps=2 * t.eps,
                                                     t_on=t.t_on, t_off=t.t_off),
                           shots=base.shots)
        r1 = protocols.run_chi_kappa_power(be, base, 1)
        r2 = protocols.run_chi_kappa_power(be, double, 1)
        assert r2.eps2_hat == pytest.approx(4.0 * r1.eps2_hat, rel=1e-3)

    def test_nbar_at_operating_point(self):
        """nbar_op evaluated at the sweep amplitude reproduces the true
        steady-state photon number of each branch."""
        be = ExactRamseyBackend(TRUTH)
        sweep = design.sweep_plan(TRUTH, shots=1000)
        rep = protocols.run_chi_kappa_power(be, sweep, 1, omega_op=TRUTH.omega_r)
        eps = sweep.pulse_template.eps
        for q in (0, 1):
            delta = TRUTH.omega_r - TRUTH.omega_r - model.STATE_SIGN[q] * TRUTH.chi
            expect = eps**2 / (delta**2 + TRUTH.kappa**2 / 4)
            assert rep.nbar_op[q][0] == pytest.approx(expect, rel=1e-3)

    def test_unresolved_lines_flagged(self):
        small_chi = DeviceParams(omega_r=50.0, chi=0.05, kappa=4.0, eta=0.6)
        be = SimulatorBackend(small_chi)
        sweep = design.sweep_plan(small_chi, shots=20_000)
        rep = protocols.run_chi_kappa_power(be, sweep, 7)
        assert "low_confidence_chi_lines_unresolved" in rep.flags

    def test_overdrive_guard(self):
        be = SimulatorBackend(TRUTH)
        plan = design.sweep_plan(TRUTH, shots=1000)
        t = plan.pulse_template
        hot = SweepSpec(omega_d_values=plan.omega_d_values,
                        pulse_template=DrivePulse(omega_d=t.omega_d, eps=8 * t.eps,
                                                  t_on=t.t_on, t_off=t.t_off),
                        shots=plan.shots)
        with pytest.raises(OverdriveError, match="lower"):
            protocols.run_chi_kappa_power(be, hot, 3)

    def test_only_ramsey_calls(self):
        be = RecordingBackend(SimulatorBackend(TRUTH))
        sweep = design.sweep_plan(TRUTH, points=9, shots=500)
        protocols.run_chi_kappa_power(be, sweep, 1)
        kinds = {c[0] for c in be.calls}
        assert kinds == {"ramsey"}
        assert len(be.calls) == 9 * 2


class TestRingdown:
    def test_recovers_kappa(self):
        be = SimulatorBackend(TRUTH)
        fill, delays, slice_dt = design.ringdown_plan(TRUTH)
        res = protocols.run_ringdown(be, fill, delays, 100_000, TRUTH.chi, 5, slice_dt)
        assert res.kappa_hat == pytest.approx(TRUTH.kappa, rel=0.05)

    def test_zero_fill_rejected(self):
        be = SimulatorBackend(TRUTH)
        fill = DrivePulse(omega_d=50.0, eps=0.0, t_on=0.0, t_off=1.0)
        with pytest.raises(NoSignalError):
            protocols.run_ringdown(be, fill, [0.0, 0.1], 1000, TRUTH.chi, 1, 0.05)

    def test_zero_chi_rejected(self):
        be = SimulatorBackend(TRUTH)
        fill = DrivePulse(omega_d=50.0, eps=1.0, t_on=0.0, t_off=1.0)
        with pytest.raises(NoInformationError):
            protocols.run_ringdown(be, fill, [0.0, 0.1], 1000, 0.0, 1, 0.05)

    def test_windowed_ramsey_only(self):
        be = RecordingBackend(SimulatorBackend(TRUTH))
        fill, delays, slice_dt = design.ringdown_plan(TRUTH, n_delays=5)
        protocols.run_ringdown(be, fill, delays, 2000, TRUTH.chi, 1, slice_dt)
        assert all(c[0] == "ramsey" and c[2] is not None for c in be.calls)
        assert "fewer_than_6_delays" in protocols.run_ringdown(
            be, fill, delays, 2000, TRUTH.chi, 1, slice_dt).flags


class TestEfficiency:
    def test_recovers_eta(self):
        be = SimulatorBackend(TRUTH)
        op = design.operating_pulse(TRUTH, nbar=2.0)
        res = protocols.run_efficiency(be, op, 100_000, 9)
        assert res.eta_hat == pytest.approx(TRUTH.eta, rel=0.05)
        assert not res.flags

    def test_exact_identity(self):
        """Backend with contrast exp(-1) and an SNR-2 cloud pair gives
        eta = 2^2 / (4 * 1) = 1 exactly."""

        class Fixed(protocols.ExperimentBackend):
            def ramsey_under_drive(self, pulse, state, shots, seed, window=None):
                return signal.RamseyResult(phase=0.1, contrast=math.exp(-1.0),
                                           shots=shots)

            def acquire_iq(self, pulse, state, weights, shots, seed):
                s = 1.0 / math.sqrt(2.0)
                mu = 0.0 if state == 0 else 2.0
                return signal.IQCloud(state=state,
                                      points=np.array([mu - s, mu + s], complex),
                                      seed=seed)

            def mean_records(self, pulse):
                return protocols.trajectory_grid(TRUTH, pulse)

        res = protocols.run_efficiency(Fixed(), DrivePulse(50.0, 1.0, 0.0, 1.0), 100, 1)
        assert res.eta_hat == pytest.approx(1.0, rel=1e-9)
        assert res.d_hat == pytest.approx(1.0, rel=1e-12)

    def test_overdrive_advice(self):
        be = SimulatorBackend(TRUTH)
        hot = design.operating_pulse(TRUTH, nbar=2.0, d_target=5.0)
        with pytest.raises(OverdriveError, match="lower"):
            protocols.run_efficiency(be, hot, 5000, 2)
        cold = design.operating_pulse(TRUTH, nbar=2.0, d_target=0.02)
        with pytest.raises(OverdriveError, match="raise"):
            protocols.run_efficiency(be, cold, 5000, 2)

    def test_zero_chi_no_information(self):
        zero = DeviceParams(omega_r=50.0, chi=0.0, kappa=4.0, eta=0.6)
        be = SimulatorBackend(zero)
        with pytest.raises(NoInformationError):
            protocols.run_efficiency(be, DrivePulse(50.0, 1.0, 0.0, 2.0), 1000, 1)


class TestValidateSnr:
    def _full_chain(self, seed=31):
        be = SimulatorBackend(TRUTH)
        sweep = design.sweep_plan(TRUTH, shots=30_000)
        op = design.operating_pulse(TRUTH, nbar=2.0)
        scale = op.eps / sweep.pulse_template.eps
        rep = protocols.run_chi_kappa_power(be, sweep, seed,
                                            omega_op=op.omega_d, amp_scale=scale)
        eff = protocols.run_efficiency(be, op, 100_000, seed)
        rep.eta_hat, rep.eta_err = eff.eta_hat, eff.eta_err
        return be, rep, op

    def test_closed_loop_ratio_near_unity(self):
        be, rep, op = self._full_chain()
        val = protocols.validate_snr(be, rep, op, 100_000, 31)
        assert abs(val.ratio - 1.0) < 0.10
        assert val.passed

    def test_missing_dependency_named(self):
        be = SimulatorBackend(TRUTH)
        op = design.operating_pulse(TRUTH, nbar=2.0)
        with pytest.raises(DependencyError, match="chi-kappa-power"):
            protocols.validate_snr(be, protocols.CharacterizationReport(), op, 1000, 1)
        rep = protocols.CharacterizationReport(omega_r_hat=50.0, chi_hat=2.0,
                                               kappa_hat=4.0, eps2_hat=1.0)
        with pytest.raises(DependencyError, match="efficiency"):
            protocols.validate_snr(be, rep, op, 1000, 1)

    def test_prediction_scales_with_estimates(self):
        """The prediction responds to the handed-in estimates, not to the
        simulator truth."""
        be, rep, op = self._full_chain()
        val = protocols.validate_snr(be, rep, op, 50_000, 8)
        rep.eta_hat = rep.eta_hat / 4.0
        val_lo = protocols.validate_snr(be, rep, op, 50_000, 8)
        assert val_lo.snr_predicted == pytest.approx(val.snr_predicted / 2.0, rel=1e-9)
        assert val_lo.snr_measured == val.snr_measured


class TestSweepSpecGuards:
    def test_minimums(self):
        t = DrivePulse(50.0, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            SweepSpec(omega_d_values=np.linspace(48, 52, 5), pulse_template=t, shots=1000)
        with pytest.raises(ValueError):
            SweepSpec(omega_d_values=np.linspace(48, 52, 11), pulse_template=t, shots=10)


class TestDesignHelpers:
    def test_operating_pulse_hits_targets(self):
        op = design.operating_pulse(TRUTH, nbar=2.0, d_target=1.2)
        nbar0 = abs(model.steady_state_alpha(TRUTH, op, 0)) ** 2
        assert nbar0 == pytest.approx(2.0, rel=1e-9)
        assert model.dephasing_exponent(TRUTH, op) == pytest.approx(1.2, rel=1e-6)

    def test_operating_pulse_zero_chi_rejected(self):
        zero = DeviceParams(omega_r=50.0, chi=0.0, kappa=4.0, eta=0.6)
        with pytest.raises(ValueError):
            design.operating_pulse(zero, nbar=2.0)

    def test_trajectory_grid_edge_alignment(self):
        pulse = DrivePulse(50.0, 1.0, 0.0, 2.7)
        traj = protocols.trajectory_grid(TRUTH, pulse)
        dt = traj.dt
        k = (pulse.t_off - (traj.times[0] - dt / 2)) / dt
        assert abs(k - round(k)) < 1e-9
        assert traj.times[-1] > pulse.t_off + 7.0 / TRUTH.kappa
