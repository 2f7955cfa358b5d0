"""Nonlinear least squares (Levenberg-Marquardt) and the line-shape models
used by the characterization protocols."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

STATE_SIGN = {0: 1.0, 1: -1.0}


class DegenerateFitError(ValueError):
    """Singular normal matrix: one or more parameters are unidentifiable."""


@dataclass
class FitProblem:
    """Weighted least-squares problem y ~ model(x, params).

    fixed is an optional boolean mask; masked parameters are held at their
    p0 values.
    """

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    model: Callable[[np.ndarray, np.ndarray], np.ndarray]
    p0: np.ndarray
    fixed: Optional[Sequence[bool]] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.p0 = np.asarray(self.p0, dtype=float)
        if not (len(self.x) == len(self.y) == len(self.sigma)):
            raise ValueError("x, y, sigma must have equal length")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be > 0 elementwise")
        if not np.all(np.isfinite(self.p0)):
            raise ValueError("p0 must be finite")
        if self.fixed is not None and len(self.fixed) != len(self.p0):
            raise ValueError("fixed mask must match p0 length")


@dataclass
class FitResult:
    params: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    chi2_reduced: float
    iterations: int
    converged: bool
    chi2_trace: list = dc_field(default_factory=list)
    message: str = ""


def _jacobian(model, x, p, free_idx):
    """Central finite differences, step h = max(1e-7, 1e-7 * |p_j|)."""
    cols = []
    for j in free_idx:
        h = max(1e-7, 1e-7 * abs(p[j]))
        pp = p.copy()
        pm = p.copy()
        pp[j] += h
        pm[j] -= h
        cols.append((model(x, pp) - model(x, pm)) / (2 * h))
    return np.column_stack(cols)


def lm_fit(problem: FitProblem, gtol=1e-10, ftol=1e-12, xtol=1e-12,
           max_iter=200, lambda0=1e-3) -> FitResult:
    """Levenberg-Marquardt with the classic multiplicative damping schedule
    (lambda/10 on accepted steps, lambda*10 on rejected ones)."""
    p = problem.p0.copy()
    free_idx = (
        [j for j, f in enumerate(problem.fixed) if not f]
        if problem.fixed is not None
        else list(range(len(p)))
    )
    n_free = len(free_idx)
    n_pts = len(problem.x)
    if n_free >= n_pts:
        raise ValueError(f"{n_free} free parameters but only {n_pts} points")

    def resid(pv):
        return (problem.y - problem.model(problem.x, pv)) / problem.sigma

    r = resid(p)
    chi2 = float(r @ r)
    trace = [chi2]
    lam = lambda0
    converged = False
    msg = "max iterations exceeded"
    it = 0
    for it in range(1, max_iter + 1):
        jac = _jacobian(problem.model, problem.x, p, free_idx) / problem.sigma[:, None]
        a = jac.T @ jac
        g = jac.T @ r
        if float(np.max(np.abs(g))) < gtol:
            converged = True
            msg = "gradient below gtol"
            break
        diag = np.diag(a).copy()
        diag[diag <= 0] = np.max(diag) if np.max(diag) > 0 else 1.0
        accepted = False
        while not accepted:
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                lam *= 10
                if lam > 1e12:
                    _raise_degenerate(a, free_idx)
                continue
            p_try = p.copy()
            p_try[free_idx] += step
            try:
                r_try = resid(p_try)
            except ValueError:
                r_try = None  # model rejected parameters (e.g. w <= 0)
            if r_try is not None and np.all(np.isfinite(r_try)):
                with np.errstate(over="ignore"):
                    chi2_try = float(r_try @ r_try)  # inf is fine: step rejected
                if chi2_try <= chi2:
                    rel_drop = (chi2 - chi2_try) / max(chi2, 1e-300)
                    step_size = float(np.max(np.abs(step) / np.maximum(np.abs(p[free_idx]), 1.0)))
                    p, r, chi2 = p_try, r_try, chi2_try
                    trace.append(chi2)
                    lam = max(lam / 10, 1e-14)
                    accepted = True
                    if rel_drop < ftol or step_size < xtol:
                        converged = True
                        msg = "chi2/step change below tolerance"
                    break
            lam *= 10
            if lam > 1e12:
                converged = True  # cannot improve further from here
                msg = "step rejected at maximum damping"
                accepted = True
        if converged:
            break

    jac = _jacobian(problem.model, problem.x, p, free_idx) / problem.sigma[:, None]
    a = jac.T @ jac
    dof = max(n_pts - n_free, 1)
    chi2_red = chi2 / dof
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= sv[0] * 1e-12:
        _raise_degenerate(a, free_idx)
    # inverse Gauss-Newton normal matrix, scaled by reduced chi2 so the
    # stderr reflects the actual residual scatter
    cov_free = np.linalg.inv(a) * chi2_red
    cov = np.zeros((len(p), len(p)))
    for i, fi in enumerate(free_idx):
        for j, fj in enumerate(free_idx):
            cov[fi, fj] = cov_free[i, j]
    stderr = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(
        params=p,
        stderr=stderr,
        covariance=cov,
        chi2_reduced=chi2_red,
        iterations=it,
        converged=converged,
        chi2_trace=trace,
        message=msg,
    )


def _raise_degenerate(a, free_idx):
    u, s, _ = np.linalg.svd(a)
    bad = []
    thresh = s[0] * 1e-12 if s[0] > 0 else 0.0
    for k, sv in enumerate(s):
        if sv <= thresh:
            j = int(np.argmax(np.abs(u[:, k])))
            bad.append(free_idx[j])
    raise DegenerateFitError(
        f"singular normal matrix; unidentifiable parameter indices: {bad or free_idx}"
    )


# -- model functions ---------------------------------------------------------

def model_lorentzian(x, p):
    """A * (w/2)^2 / ((x - x0)^2 + (w/2)^2) + B with p = (A, x0, w, B)."""
    a, x0, w, b = p
    if w <= 0:
        raise ValueError(f"width must be > 0, got {w}")
    hw2 = (w / 2.0) ** 2
    return a * hw2 / ((np.asarray(x, dtype=float) - x0) ** 2 + hw2) + b


def model_exp_decay(t, p):
    """A * exp(-k*t) + B with p = (A, k, B)."""
    a, k, b = p
    # clip the exponent so wild trial parameters don't overflow
    arg = np.clip(-k * np.asarray(t, dtype=float), -700.0, 700.0)
    return a * np.exp(arg) + b


def _pulse_phase_factor(delta, kappa, tau):
    """Exact int_0^inf |alpha(t)|^2 dt / |alpha_ss|^2 for a square pulse of
    length tau starting from vacuum, including the ring-down tail.

    Reduces to tau - 2/kappa at line center for kappa*tau >> 1.
    """
    s = 1j * np.asarray(delta, dtype=float) + kappa / 2.0
    e = np.exp(-s * tau)
    return (
        tau
        - 2.0 * np.real((1.0 - e) / s)
        + (1.0 - math.exp(-kappa * tau)) / kappa
        + np.abs(1.0 - e) ** 2 / kappa
    )


def model_two_state_lines(omega_d, p, state, tau):
    """Branch Ramsey phase vs drive frequency for prepared state q.

    p = (omega_r, chi, kappa, eps2); the predicted phase is
    2 * s_q * chi * nbar_ss(omega_d) * g(Delta_q, kappa, tau) with the exact
    square-pulse transient factor g (ring-up plus ring-down tail).
    """
    omega_r, chi, kappa, eps2 = p
    if kappa <= 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    if eps2 < 0:
        raise ValueError(f"eps2 must be >= 0, got {eps2}")
    s_q = STATE_SIGN[state]
    delta = np.asarray(omega_d, dtype=float) - omega_r - s_q * chi
    nbar = eps2 / (delta**2 + kappa**2 / 4.0)
    return 2.0 * s_q * chi * nbar * _pulse_phase_factor(delta, kappa, tau)


# -- automated initial guesses ----------------------------------------------

def guess_lorentzian(x, y):
    """Peak location from argmax, width from half-max crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = float(np.min(y))
    i_pk = int(np.argmax(y))
    a = float(y[i_pk] - b)
    x0 = float(x[i_pk])
    half = b + a / 2.0
    above = y >= half
    if np.sum(above) >= 2:
        w = float(x[above].max() - x[above].min())
    else:
        w = float((x.max() - x.min()) / 4)
    w = max(w, float(np.min(np.diff(np.sort(x)))) if len(x) > 1 else 1.0)
    return np.array([a, x0, w, b])


def guess_exp_decay(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    b = 0.0
    a = float(y[0])
    span = float(t[-1] - t[0])
    # crude rate from the endpoint ratio
    if a != 0 and y[-1] / a > 0:
        k = -math.log(max(y[-1] / a, 1e-12)) / max(span, 1e-12)
    else:
        k = 1.0 / max(span, 1e-12)
    return np.array([a, max(k, 1e-6), b])


def guess_two_state_lines(omega_d, phase0, phase1, tau):
    """Starting point for the joint two-line fit from per-curve extrema."""
    omega_d = np.asarray(omega_d, dtype=float)
    c0 = float(omega_d[np.argmax(phase0)])   # state-0 curve peaks positive
    c1 = float(omega_d[np.argmin(phase1)])   # state-1 curve peaks negative
    omega_r0 = 0.5 * (c0 + c1)
    chi0 = 0.5 * (c0 - c1)
    g = guess_lorentzian(omega_d, np.asarray(phase0, dtype=float))
    kappa0 = max(g[2], 1e-6)
    pk = float(np.max(phase0))
    chi_eff = chi0 if abs(chi0) > kappa0 / 100 else kappa0 / 100
    geom = _pulse_phase_factor(0.0, kappa0, tau)
    eps2_0 = abs(pk) * (kappa0**2 / 4.0) / max(2.0 * abs(chi_eff) * geom, 1e-12)
    return np.array([omega_r0, chi0, kappa0, max(eps2_0, 1e-12)])
