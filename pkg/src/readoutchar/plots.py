"""Figure rendering for protocol reports.

Each protocol's report path can emit a PNG next to the JSON/CSV output.
Figures are diagnostic (data plus fit overlays), not publication styling.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import fitting

_STATE_COLOR = {0: "tab:blue", 1: "tab:red"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_sweep(rep, path):
    """Phase and contrast vs drive frequency with the joint fit overlay."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    fit = rep.fit_diagnostics.get("two_state_lines")
    tau = rep.provenance.get("tau")
    for q, curve in sorted(rep.raw_curves.items()):
        w = np.asarray(curve["omega_d"])
        ax1.errorbar(w, curve["phase"], yerr=curve["phase_err"], fmt=".",
                     color=_STATE_COLOR[q], label=f"state {q}")
        ax2.plot(w, curve["contrast"], ".", color=_STATE_COLOR[q])
        if fit is not None and tau is not None:
            wf = np.linspace(w.min(), w.max(), 400)
            ax1.plot(wf, fitting.model_two_state_lines(wf, fit.params, q, tau),
                     "-", color=_STATE_COLOR[q], alpha=0.6)
    ax1.set_ylabel("Ramsey phase (rad)")
    ax1.legend()
    ax1.set_title(
        f"chi = {rep.chi_hat:.4g} +/- {rep.chi_err:.2g}, "
        f"kappa = {rep.kappa_hat:.4g} +/- {rep.kappa_err:.2g} rad/us"
    )
    ax2.set_ylabel("Ramsey contrast")
    ax2.set_xlabel("drive frequency (rad/us)")
    _save(fig, path)


def plot_ringdown(res, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(res.delays, res.nbar_trace, yerr=res.nbar_err, fmt="o", ms=4)
    tf = np.linspace(res.delays.min(), res.delays.max(), 300)
    ax.plot(tf, fitting.model_exp_decay(tf, res.fit.params), "-", alpha=0.7)
    ax.set_yscale("log")
    ax.set_xlabel("delay after drive off (us)")
    ax.set_ylabel("probed photon number (arb.)")
    ax.set_title(f"kappa = {res.kappa_hat:.4g} +/- {res.kappa_err:.2g} rad/us")
    _save(fig, path)


def plot_clouds(res, path, max_points=3000):
    fig, ax = plt.subplots(figsize=(5, 5))
    for cloud in res.clouds:
        pts = cloud.points[:max_points]
        ax.plot(pts.real, pts.imag, ".", ms=1.5, alpha=0.4,
                color=_STATE_COLOR[cloud.state], label=f"state {cloud.state}")
        mu = np.mean(cloud.points)
        ax.plot(mu.real, mu.imag, "k+", ms=12, mew=2)
    ax.set_aspect("equal")
    ax.set_xlabel("I")
    ax.set_ylabel("Q")
    ax.legend(markerscale=8)
    ax.set_title(f"SNR = {res.snr:.3f}, eta = {res.eta_hat:.3f} +/- {res.eta_err:.3f}")
    _save(fig, path)


def plot_validation_grid(points, path, tolerance=0.10):
    """points: list of dicts with 'label' and 'ratio'."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ratios = [p["ratio"] for p in points]
    ax.plot(range(len(ratios)), ratios, "o", ms=4)
    ax.axhline(1.0, color="k", lw=1)
    ax.axhline(1.0 + tolerance, color="tab:red", ls="--", lw=1)
    ax.axhline(1.0 - tolerance, color="tab:red", ls="--", lw=1)
    ax.set_xlabel("grid point")
    ax.set_ylabel("measured / predicted SNR")
    ax.set_title("SNR model validation")
    _save(fig, path)


def plot_chip(chip_dict, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    kappas = [c["kappa_hat"] for c in chip_dict["channels"] if c.get("kappa_hat")]
    ratios = [c["snr_ratio"] for c in chip_dict["channels"] if c.get("snr_ratio")]
    ax1.hist(kappas, bins=12)
    ax1.set_xlabel("extracted kappa (rad/us)")
    ax1.set_ylabel("channels")
    ax1.set_title(f"max/min = {chip_dict['kappa_ratio']:.3f}")
    ax2.hist(ratios, bins=12)
    ax2.set_xlabel("measured / predicted SNR")
    ax2.set_title("per-channel SNR model ratio")
    _save(fig, path)
