"""Result documents and trace files.

Reports are JSON (sorted keys, full float precision, so pinned-seed runs
reproduce byte-identical files); traces are CSV with the fixed header
``sweep_value,state,observable,stderr``.  Volatile run metadata (wall time)
goes to a separate sidecar so the report itself stays deterministic.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict

import numpy as np

from . import __version__
from .chip import ChipResult
from .protocols import (CharacterizationReport, EfficiencyResult,
                        RingdownResult, SnrValidation)

TRACE_HEADER = ["sweep_value", "state", "observable", "stderr"]


def _plain(obj):
    """Recursively convert numpy scalars/arrays so json round-trips losslessly."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def fit_summary(fit):
    return {
        "params": _plain(fit.params),
        "stderr": _plain(fit.stderr),
        "chi2_reduced": float(fit.chi2_reduced),
        "iterations": int(fit.iterations),
        "converged": bool(fit.converged),
        "message": fit.message,
    }


def characterization_to_dict(rep: CharacterizationReport) -> dict:
    return _plain({
        "omega_r_hat": rep.omega_r_hat, "omega_r_err": rep.omega_r_err,
        "chi_hat": rep.chi_hat, "chi_err": rep.chi_err,
        "kappa_hat": rep.kappa_hat, "kappa_err": rep.kappa_err,
        "eps2_hat": rep.eps2_hat, "eps2_err": rep.eps2_err,
        "nbar_op": {str(q): {"value": v, "stderr": e} for q, (v, e) in rep.nbar_op.items()},
        "omega_op": rep.omega_op,
        "amp_scale": rep.amp_scale,
        "kappa_ringdown": rep.kappa_ringdown,
        "kappa_ringdown_err": rep.kappa_ringdown_err,
        "eta_hat": rep.eta_hat, "eta_err": rep.eta_err,
        "raw_curves": rep.raw_curves,
        "fit_diagnostics": {k: fit_summary(f) for k, f in rep.fit_diagnostics.items()},
        "provenance": rep.provenance,
        "flags": rep.flags,
    })


def ringdown_to_dict(res: RingdownResult) -> dict:
    return _plain({
        "kappa_hat": res.kappa_hat,
        "kappa_err": res.kappa_err,
        "delays": res.delays,
        "nbar_trace": res.nbar_trace,
        "nbar_err": res.nbar_err,
        "fit": fit_summary(res.fit),
        "flags": res.flags,
    })


def efficiency_to_dict(res: EfficiencyResult) -> dict:
    d = {
        "eta_hat": res.eta_hat, "eta_err": res.eta_err,
        "snr": res.snr, "snr_err": res.snr_err,
        "d_hat": res.d_hat, "d_err": res.d_err,
        "contrast": res.contrast,
        "flags": res.flags,
        "clouds": {},
    }
    for cloud in res.clouds:
        d["clouds"][str(cloud.state)] = {
            "mean_i": float(np.mean(cloud.points.real)),
            "mean_q": float(np.mean(cloud.points.imag)),
            "std_i": float(np.std(cloud.points.real, ddof=1)),
            "std_q": float(np.std(cloud.points.imag, ddof=1)),
            "shots": len(cloud.points),
            "seed": cloud.seed,
        }
    return _plain(d)


def validation_to_dict(res: SnrValidation) -> dict:
    return _plain(asdict(res))


def chip_to_dict(res: ChipResult) -> dict:
    channels = []
    for o in res.channels:
        entry = {
            "index": o.index,
            "truth": asdict(o.truth),
            "error": o.error,
            "flags": o.flags,
        }
        if o.report is not None:
            entry.update({
                "chi_hat": o.report.chi_hat, "chi_err": o.report.chi_err,
                "kappa_hat": o.report.kappa_hat, "kappa_err": o.report.kappa_err,
                "kappa_ringdown": o.report.kappa_ringdown,
                "eta_hat": o.report.eta_hat, "eta_err": o.report.eta_err,
            })
        if o.validation is not None:
            entry["snr_ratio"] = o.validation.ratio
            entry["snr_ratio_passed"] = o.validation.passed
        channels.append(entry)
    return _plain({
        "channels": channels,
        "kappa_ratio": res.kappa_ratio,
        "aggregates": res.aggregates,
        "n_failed": res.n_failed,
    })


def build_report(protocol, cfg_echo, results, flags=(), passed=None, error=None) -> dict:
    return _plain({
        "tool": "readoutchar",
        "version": __version__,
        "protocol": protocol,
        "config": cfg_echo,
        "results": results,
        "flags": list(flags),
        "passed": passed,
        "error": error,
    })


def serialize_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_report(report))


def read_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_trace_csv(path, rows) -> None:
    """rows: iterables of (sweep_value, state, observable, stderr)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for sweep_value, state, observable, stderr in rows:
            writer.writerow([repr(float(sweep_value)), state,
                             repr(float(observable)), repr(float(stderr))])


def sweep_trace_rows(rep: CharacterizationReport, observable="phase"):
    err_key = {"phase": "phase_err", "contrast": None}[observable]
    rows = []
    for q, curve in sorted(rep.raw_curves.items()):
        for i, w in enumerate(curve["omega_d"]):
            err = curve[err_key][i] if err_key else 0.0
            rows.append((w, q, curve[observable][i], err))
    return rows


def ringdown_trace_rows(res: RingdownResult):
    return [(d, 0, n, e) for d, n, e in zip(res.delays, res.nbar_trace, res.nbar_err)]
