"""Batch command-line interface.

Exit codes: 0 success, 1 flagged protocol failure (fit unidentifiable,
tolerance exceeded, ...), 2 configuration / operator error.  All outputs are
deterministic given the master seed; wall time goes to a sidecar
(run_meta.json) so report files are byte-reproducible.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from pathlib import Path

from . import chip as chip_mod
from . import config as config_mod
from . import design, plots, protocols, report, rng, signal, snr
from .model import DeviceParams, DrivePulse
from .protocols import ProtocolError, SimulatorBackend


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="readoutchar",
        description="Dispersive-readout characterization: simulate, extract, validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (or READOUTCHAR_THREADS)")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p = sub.add_parser("protocol", help="run one characterization protocol")
    p.add_argument("name", choices=["chi-kappa-power", "ringdown", "efficiency", "validate-snr"])
    p.add_argument("--endpoint", default=None, help="host:port of a remote wire backend")
    add_common(p)

    for name, helptext in [
        ("simulate-iq", "generate IQ clouds for both prepared states"),
        ("predict-snr", "closed-form SNR prediction from device parameters"),
        ("validate", "closed-loop SNR-model validation over a parameter grid"),
        ("chip-scenario", "many-channel simulated chip, all protocols per channel"),
    ]:
        p = sub.add_parser(name, help=helptext)
        if name == "validate":
            p.add_argument("--tolerance", type=float, default=None,
                           help="|ratio - 1| pass threshold (default 0.10)")
        add_common(p)

    p = sub.add_parser("serve", help="serve the simulator over the wire protocol")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7777)
    return parser


def _resolve_threads(args, cfg):
    if args.threads is not None:
        return max(args.threads, 1)
    if cfg.threads != 1:
        return cfg.threads
    env = os.environ.get("READOUTCHAR_THREADS")
    return max(int(env), 1) if env else 1


def _operating_pulse(cfg, device):
    sec = cfg.section("pulse")
    if "eps" in sec:
        for k in ("nbar", "d_target"):
            if k in sec:
                raise config_mod.ConfigError(
                    f"config field 'pulse.{k}': give either an explicit pulse or an "
                    "operating point, not both")
        return DrivePulse(omega_d=sec.get("omega_d", device.omega_r),
                          eps=sec["eps"], t_on=sec.get("t_on", 0.0), t_off=sec["t_off"])
    return design.operating_pulse(device, nbar=sec.get("nbar", 2.0),
                                  d_target=sec.get("d_target", 1.2),
                                  omega_d=sec.get("omega_d"))


def _sweep_for(cfg, device):
    sec = cfg.section("sweep")
    return design.sweep_plan(device,
                             points=sec.get("points", 41),
                             span_factor=sec.get("span_factor", 3.0),
                             shots=sec.get("shots", 30_000),
                             phase_target=sec.get("phase_target", 1.0),
                             tau_over_kappa=sec.get("tau_over_kappa", 10.0))


def _chain(backend, device, cfg, master_seed, tolerance=0.10):
    """Full characterization chain for one device; returns
    (CharacterizationReport, RingdownResult, EfficiencyResult, SnrValidation)."""
    sweep = _sweep_for(cfg, device)
    op = _operating_pulse(cfg, device)
    scale = op.eps / sweep.pulse_template.eps
    rep = protocols.run_chi_kappa_power(backend, sweep, master_seed,
                                        omega_op=op.omega_d, amp_scale=scale)
    rsec = cfg.section("ringdown")
    fill, delays, slice_dt = design.ringdown_plan(
        device,
        slice_dephasing=rsec.get("slice_dephasing", 0.5),
        n_delays=rsec.get("n_delays", 16),
        span_over_kappa=rsec.get("span_over_kappa", 3.0))
    rd = protocols.run_ringdown(backend, fill, delays, rsec.get("shots", 100_000),
                                rep.chi_hat, master_seed, slice_dt)
    rep.kappa_ringdown, rep.kappa_ringdown_err = rd.kappa_hat, rd.kappa_err
    eff = protocols.run_efficiency(backend, op,
                                   cfg.section("efficiency").get("shots", 100_000),
                                   master_seed)
    rep.eta_hat, rep.eta_err = eff.eta_hat, eff.eta_err
    ssec = cfg.section("snr")
    val = protocols.validate_snr(backend, rep, op, ssec.get("shots", 100_000),
                                 master_seed, tolerance=ssec.get("tolerance", tolerance))
    return rep, rd, eff, val


def _make_backend(cfg, endpoint):
    if endpoint:
        from .wire import WireBackend

        host, port = endpoint.rsplit(":", 1)
        return WireBackend(host, port)
    return SimulatorBackend(cfg.device)


def _run_protocol(args, cfg, out: Path, master_seed: int, do_plots: bool):
    device = cfg.device
    backend = _make_backend(cfg, getattr(args, "endpoint", None))
    flags = []
    results = {}
    if args.name == "chi-kappa-power":
        sweep = _sweep_for(cfg, device)
        op = _operating_pulse(cfg, device)
        scale = op.eps / sweep.pulse_template.eps
        rep = protocols.run_chi_kappa_power(backend, sweep, master_seed,
                                            omega_op=op.omega_d, amp_scale=scale)
        flags = rep.flags
        results = report.characterization_to_dict(rep)
        report.write_trace_csv(out / "phase_trace.csv", report.sweep_trace_rows(rep, "phase"))
        report.write_trace_csv(out / "contrast_trace.csv",
                               report.sweep_trace_rows(rep, "contrast"))
        if do_plots:
            plots.plot_sweep(rep, out / "sweep.png")
    elif args.name == "ringdown":
        rsec = cfg.section("ringdown")
        fill, delays, slice_dt = design.ringdown_plan(
            device,
            slice_dephasing=rsec.get("slice_dephasing", 0.5),
            n_delays=rsec.get("n_delays", 16),
            span_over_kappa=rsec.get("span_over_kappa", 3.0))
        rd = protocols.run_ringdown(backend, fill, delays, rsec.get("shots", 100_000),
                                    device.chi, master_seed, slice_dt)
        flags = rd.flags
        results = report.ringdown_to_dict(rd)
        report.write_trace_csv(out / "ringdown_trace.csv", report.ringdown_trace_rows(rd))
        if do_plots:
            plots.plot_ringdown(rd, out / "ringdown.png")
    elif args.name == "efficiency":
        op = _operating_pulse(cfg, device)
        eff = protocols.run_efficiency(backend, op,
                                       cfg.section("efficiency").get("shots", 100_000),
                                       master_seed)
        flags = eff.flags
        results = report.efficiency_to_dict(eff)
        if do_plots:
            plots.plot_clouds(eff, out / "iq_clouds.png")
    elif args.name == "validate-snr":
        rep, rd, eff, val = _chain(backend, device, cfg, master_seed)
        flags = rep.flags + rd.flags + eff.flags
        results = {
            "characterization": report.characterization_to_dict(rep),
            "ringdown": report.ringdown_to_dict(rd),
            "efficiency": report.efficiency_to_dict(eff),
            "validation": report.validation_to_dict(val),
        }
        if not val.passed:
            flags = flags + ["snr_ratio_outside_tolerance"]
        if do_plots:
            plots.plot_sweep(rep, out / "sweep.png")
            plots.plot_clouds(eff, out / "iq_clouds.png")
    return results, flags


def _run_validate(args, cfg, out: Path, master_seed: int, threads: int, do_plots: bool):
    grid = cfg.section("grid")
    if not grid:
        raise config_mod.ConfigError("config field 'grid': required for validate")
    tolerance = args.tolerance if args.tolerance is not None \
        else cfg.section("snr").get("tolerance", 0.10)
    omega_r = grid.get("omega_r", 50.0)
    axes = list(itertools.product(
        grid.get("kappa", [2.0, 4.0, 8.0]),
        grid.get("chi_over_kappa", [0.2, 0.5, 1.0]),
        grid.get("eta", [0.1, 0.5, 0.9]),
        grid.get("nbar", [0.5, 2.0]),
    ))

    def one(i_point):
        i, (kappa, cok, eta, nbar) = i_point
        truth = DeviceParams(omega_r=omega_r, chi=cok * kappa, kappa=kappa, eta=eta)
        seed = rng.stream_seed(master_seed, rng.TAG_VALIDATE_SNR, i)
        o = chip_mod.run_channel(truth, seed, 0, nbar=nbar,
                                 sweep_shots=cfg.section("sweep").get("shots", 30_000),
                                 iq_shots=cfg.section("snr").get("shots", 100_000),
                                 tolerance=tolerance)
        entry = {"kappa": kappa, "chi_over_kappa": cok, "eta": eta, "nbar": nbar,
                 "error": o.error, "flags": o.flags}
        if o.report is not None:
            entry.update(chi_hat=o.report.chi_hat, kappa_hat=o.report.kappa_hat,
                         kappa_ringdown=o.report.kappa_ringdown,
                         eta_hat=o.report.eta_hat)
        if o.validation is not None:
            entry.update(snr_predicted=o.validation.snr_predicted,
                         snr_measured=o.validation.snr_measured,
                         ratio=o.validation.ratio,
                         passed=o.validation.passed)
        return report._plain(entry)

    items = list(enumerate(axes))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = list(pool.map(one, items))
    else:
        table = [one(it) for it in items]

    all_passed = all(t.get("passed") for t in table)
    results = {"tolerance": tolerance, "points": table, "all_passed": all_passed}
    with open(out / "validate_table.csv", "w") as fh:
        cols = ["kappa", "chi_over_kappa", "eta", "nbar", "chi_hat", "kappa_hat",
                "kappa_ringdown", "eta_hat", "snr_predicted", "snr_measured",
                "ratio", "passed"]
        fh.write(",".join(cols) + "\n")
        for t in table:
            fh.write(",".join(repr(t[c]) if isinstance(t.get(c), float)
                              else str(t.get(c, "")) for c in cols) + "\n")
    if do_plots:
        pts = [t for t in table if t.get("ratio") is not None]
        plots.plot_validation_grid(pts, out / "validate_ratios.png", tolerance)
    flags = [] if all_passed else ["snr_ratio_outside_tolerance"]
    return results, flags


def _run_chip(args, cfg, out: Path, master_seed: int, threads: int, do_plots: bool):
    csec = cfg.section("chip")
    if "devices" in cfg.raw:
        devices = [DeviceParams(**d) for d in cfg.raw["devices"]]
    else:
        devices = chip_mod.generate_chip(
            master_seed,
            n_channels=csec.get("channels", 54),
            kappa_min=csec.get("kappa_min", 2.0),
            kappa_spread=csec.get("kappa_spread", 2.0),
            chi_over_kappa=csec.get("chi_over_kappa", 0.5),
            eta_range=(csec.get("eta_min", 0.4), csec.get("eta_max", 0.8)),
        )
    res = chip_mod.run_chip(devices, master_seed,
                            nbar=csec.get("nbar", 2.0),
                            sweep_shots=csec.get("sweep_shots", 20_000),
                            iq_shots=csec.get("iq_shots", 50_000),
                            tolerance=cfg.section("snr").get("tolerance", 0.10),
                            threads=threads)
    results = report.chip_to_dict(res)
    if do_plots:
        plots.plot_chip(results, out / "chip.png")
    ratio_failures = [c for c in results["channels"]
                      if c.get("snr_ratio_passed") is False]
    flags = []
    if ratio_failures:
        flags.append("snr_ratio_outside_tolerance")
    return results, flags


def _run_simulate_iq(cfg, out: Path, master_seed: int, do_plots: bool):
    device = cfg.device
    pulse = _operating_pulse(cfg, device)
    shots = cfg.section("snr").get("shots", 10_000)
    weights = signal.matched_filter(protocols.trajectory_grid(device, pulse))
    clouds = []
    for q in (0, 1):
        seed = rng.stream_seed(master_seed, rng.TAG_SIMULATE_IQ, q)
        clouds.append(signal.sample_iq(device, pulse, q, weights, shots, seed))
    snr_hat, snr_err = signal.snr_with_stderr(clouds[0], clouds[1])
    with open(out / "iq_points.csv", "w") as fh:
        fh.write("state,i,q\n")
        for c in clouds:
            for z in c.points:
                fh.write(f"{c.state},{float(z.real)!r},{float(z.imag)!r}\n")
    results = {
        "snr": snr_hat, "snr_err": snr_err,
        "shots": shots,
        "pulse": {"omega_d": pulse.omega_d, "eps": pulse.eps,
                  "t_on": pulse.t_on, "t_off": pulse.t_off},
    }
    if do_plots:
        import numpy as np

        class _CloudView:
            pass

        view = _CloudView()
        view.clouds = clouds
        view.snr = snr_hat
        view.eta_hat = device.eta
        view.eta_err = 0.0
        plots.plot_clouds(view, out / "iq_clouds.png")
    return results, []


def _run_predict_snr(cfg, out: Path):
    device = cfg.device
    pulse = _operating_pulse(cfg, device)
    pred = snr.predict_snr(device, pulse)
    nbar = pulse.eps**2 / ((pulse.omega_d - device.omega_r - device.chi) ** 2
                           + device.kappa**2 / 4)
    results = {
        "snr": pred.snr,
        "d_exponent": pred.d_exponent,
        "inputs": pred.inputs,
        "steady_state_snr": snr.steady_state_snr(
            device.chi, device.kappa, nbar, device.eta, pulse.duration)
        if pulse.omega_d == device.omega_r and device.chi > 0 else None,
        "separation_error": snr.separation_error(pred.snr),
        "boxcar_snr": snr.boxcar_snr(device, pulse,
                                     (pulse.t_on, pulse.t_off + 8 / device.kappa)),
    }
    return results, []


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = config_mod.load_config(args.config)
    except config_mod.ConfigError as exc:
        print(json.dumps({"error": {"type": "ConfigError", "message": str(exc)}}))
        return 2

    if args.command == "serve":
        from .wire import serve_simulator

        server = serve_simulator(cfg.device, host=args.host, port=args.port)
        print(f"serving on {server.server_address[0]}:{server.server_address[1]}")
        server.serve_forever()
        return 0

    if args.command == "protocol" and cfg.raw.get("protocol") not in (None, args.name):
        print(json.dumps({"error": {
            "type": "ConfigError",
            "message": f"config protocol '{cfg.raw['protocol']}' does not match "
                       f"requested '{args.name}'"}}))
        return 2
    expected = {"validate": "validate-snr", "chip-scenario": "chip-scenario",
                "simulate-iq": "simulate-iq", "predict-snr": "predict-snr"}
    if args.command in expected and cfg.protocol not in (expected[args.command],):
        print(json.dumps({"error": {
            "type": "ConfigError",
            "message": f"config protocol '{cfg.protocol}' does not match "
                       f"subcommand '{args.command}'"}}))
        return 2

    master_seed = args.seed if args.seed is not None else cfg.master_seed
    out = Path(args.out or cfg.output_dir or "readoutchar_out")
    out.mkdir(parents=True, exist_ok=True)
    threads = _resolve_threads(args, cfg)
    do_plots = not args.no_plots

    t0 = time.monotonic()
    error = None
    flags: list = []
    results: dict = {}
    try:
        if args.command == "protocol":
            results, flags = _run_protocol(args, cfg, out, master_seed, do_plots)
        elif args.command == "validate":
            results, flags = _run_validate(args, cfg, out, master_seed, threads, do_plots)
        elif args.command == "chip-scenario":
            results, flags = _run_chip(args, cfg, out, master_seed, threads, do_plots)
        elif args.command == "simulate-iq":
            results, flags = _run_simulate_iq(cfg, out, master_seed, do_plots)
        elif args.command == "predict-snr":
            results, flags = _run_predict_snr(cfg, out)
    except config_mod.ConfigError as exc:
        print(json.dumps({"error": {"type": "ConfigError", "message": str(exc)}}))
        return 2
    except (ProtocolError, ValueError) as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}

    passed = None
    if "all_passed" in results:
        passed = bool(results["all_passed"])
    elif error is None:
        passed = not flags

    cfg_echo = dict(cfg.raw)
    cfg_echo["master_seed"] = int(master_seed)
    doc = report.build_report(
        protocol=getattr(args, "name", None) or args.command,
        cfg_echo=cfg_echo, results=results, flags=flags, passed=passed, error=error)
    report.write_report(out / "report.json", doc)
    with open(out / "run_meta.json", "w") as fh:
        json.dump({"wall_time_s": time.monotonic() - t0, "threads": threads}, fh, indent=2)

    if error is not None:
        print(f"error: {error['type']}: {error['message']}", file=sys.stderr)
        return 1
    if flags:
        print(f"flagged: {', '.join(flags)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
