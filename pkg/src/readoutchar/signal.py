"""Detection-chain simulation: demodulated heterodyne records and Ramsey
fringe sampling.

Each readout shot produces one complex demodulated record

    z = sqrt(kappa) * int w(t) * alpha_q(t) dt + n,

with unit-norm weights (sum |w|^2 dt = 1) and complex Gaussian noise of
per-quadrature variance 1/(2*eta).  Matched weights w proportional to
conj(alpha0 - alpha1) maximize the cloud separation, for which
SNR^2 = 4 * eta * D with D the measurement-induced dephasing exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import model, rng
from .model import DeviceParams, DrivePulse, FieldTrajectory

NORM_TOL = 1e-12


class DegenerateSeparationError(ValueError):
    """Pointer trajectories are identical; matched weights are undefined."""


class UndefinedSnrError(ValueError):
    """Coincident means with zero variance; SNR is undefined."""


@dataclass(frozen=True)
class FilterWeights:
    """Unit-norm demodulation weights on a uniform time grid."""

    times: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.w):
            raise ValueError("times and w must have equal length")
        norm = np.sum(np.abs(self.w) ** 2) * self.dt
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"weights must have unit norm, got {norm!r}")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class IQCloud:
    """Single-shot complex demodulated outcomes for one prepared state."""

    state: int
    points: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("need at least 2 points for any statistics")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points must be finite")


@dataclass(frozen=True)
class RamseyResult:
    """Phase and contrast estimated from sampled Ramsey fringes."""

    phase: float
    contrast: float
    shots: int
    phase_err: float = 0.0
    contrast_err: float = 0.0

    def __post_init__(self):
        if not 0 <= self.contrast <= 1:
            raise ValueError(f"contrast must be in [0, 1], got {self.contrast}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


def matched_filter(traj: FieldTrajectory) -> FilterWeights:
    """Weights proportional to conj(alpha0 - alpha1), normalized to unit norm."""
    dt = traj.dt
    diff = traj.alpha0 - traj.alpha1
    norm2 = float(np.sum(np.abs(diff) ** 2) * dt)
    scale = float(np.sum(np.abs(traj.alpha0) ** 2 + np.abs(traj.alpha1) ** 2) * dt)
    if norm2 <= 1e-20 * max(scale, 1.0):
        raise DegenerateSeparationError(
            "pointer trajectories are (numerically) identical; chi = 0?"
        )
    return FilterWeights(times=traj.times, w=np.conj(diff) / math.sqrt(norm2))


def boxcar_weights(times) -> FilterWeights:
    """Flat weights over the window, |w| = 1/sqrt(window length)."""
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    tau = dt * len(times)
    return FilterWeights(times=times, w=np.full(len(times), 1.0 / math.sqrt(tau), dtype=complex))


def mean_record(params: DeviceParams, pulse: DrivePulse, q: int, weights: FilterWeights) -> complex:
    """Noise-free demodulated record sqrt(kappa) * int w alpha_q dt."""
    alpha = model.field_at(params, pulse, q, weights.times)
    return complex(math.sqrt(params.kappa) * np.sum(weights.w * alpha) * weights.dt)


def sample_iq(params, pulse, q, weights, shots, seed) -> IQCloud:
    """Draw single-shot demodulated records for prepared state q.

    Deterministic given seed; noise is complex Gaussian with per-quadrature
    variance 1/(2*eta).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    mu = mean_record(params, pulse, q, weights)
    sigma = math.sqrt(1.0 / (2.0 * params.eta))
    g = rng.generator(seed)
    noise = g.normal(scale=sigma, size=(int(shots), 2))
    pts = mu + noise[:, 0] + 1j * noise[:, 1]
    return IQCloud(state=q, points=pts, seed=int(seed))


def _projected_stats(cloud0: IQCloud, cloud1: IQCloud):
    mu0 = np.mean(cloud0.points)
    mu1 = np.mean(cloud1.points)
    sep = abs(mu1 - mu0)
    if sep == 0.0:
        axis = 1.0 + 0j
    else:
        axis = (mu1 - mu0) / sep
    x0 = np.real(np.conj(axis) * (cloud0.points - mu0))
    x1 = np.real(np.conj(axis) * (cloud1.points - mu1))
    v0 = float(np.var(x0, ddof=1))
    v1 = float(np.var(x1, ddof=1))
    n0, n1 = len(x0), len(x1)
    pooled = ((n0 - 1) * v0 + (n1 - 1) * v1) / (n0 + n1 - 2)
    return sep, math.sqrt(pooled), n0, n1


def measure_snr(cloud0: IQCloud, cloud1: IQCloud) -> float:
    """|mu0 - mu1| / pooled std along the axis joining the two means."""
    sep, sigma, _, _ = _projected_stats(cloud0, cloud1)
    if sigma == 0.0:
        if sep == 0.0:
            raise UndefinedSnrError("coincident means with zero variance")
        return math.inf
    return sep / sigma


def snr_with_stderr(cloud0: IQCloud, cloud1: IQCloud):
    """(SNR, stderr) with a delta-method uncertainty estimate."""
    sep, sigma, n0, n1 = _projected_stats(cloud0, cloud1)
    if sigma == 0.0:
        raise UndefinedSnrError("zero pooled variance")
    snr = sep / sigma
    var_rel = (sigma**2 / sep**2) * (1.0 / n0 + 1.0 / n1) + 1.0 / (2.0 * (n0 + n1 - 2))
    return snr, snr * math.sqrt(var_rel)


def simulate_ramsey(params, pulse, shots, seed, state=None, window=(0.0, math.inf)) -> RamseyResult:
    """Sample a pi/2 - drive - pi/2 sequence with ideal qubit readout.

    The qubit coherence after the window is c = exp(-D + i*phi), with D the
    measurement-induced dephasing exponent and phi the differential phase
    (state=None) or the branch Stark phase (state in {0, 1}).  <sigma_x> and
    <sigma_y> are each estimated from `shots` projective outcomes.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    t0, t1 = window
    d = model.dephasing_exponent(params, pulse, tau=t1, t_start=t0)
    if state is None:
        phi = model.differential_phase(params, pulse, tau=t1, t_start=t0)
    else:
        phi = model.state_phase(params, pulse, state, tau=t1, t_start=t0)
    c = math.exp(-d)
    mx, my = c * math.cos(phi), c * math.sin(phi)
    g = rng.generator(seed)
    kx = g.binomial(int(shots), (1.0 + mx) / 2.0)
    ky = g.binomial(int(shots), (1.0 + my) / 2.0)
    ex = 2.0 * kx / shots - 1.0
    ey = 2.0 * ky / shots - 1.0
    c_hat = min(math.hypot(ex, ey), 1.0)
    phase_hat = math.atan2(ey, ex)
    vx = max(1.0 - ex * ex, 0.0) / shots
    vy = max(1.0 - ey * ey, 0.0) / shots
    c2 = ex * ex + ey * ey
    if c2 > 0:
        phase_err = math.sqrt((ex * ex * vy + ey * ey * vx) / (c2 * c2))
        contrast_err = math.sqrt((ex * ex * vx + ey * ey * vy) / c2)
    else:
        phase_err = math.pi
        contrast_err = math.sqrt(1.0 / shots)
    return RamseyResult(
        phase=phase_hat,
        contrast=c_hat,
        shots=int(shots),
        phase_err=min(phase_err, math.pi),
        contrast_err=contrast_err,
    )
