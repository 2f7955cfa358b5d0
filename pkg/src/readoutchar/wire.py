"""Optional line-oriented wire protocol for remote experiment backends.

One JSON object per line, strict one-request-one-response ordering per
connection.  A server wrapping the in-process simulator must reproduce its
results exactly (all numbers survive the JSON round trip losslessly), which
the loopback tests verify byte-for-byte at the report level.
"""

from __future__ import annotations

import json
import math
import socket
import socketserver

import numpy as np

from . import signal
from .model import DeviceParams, DrivePulse, FieldTrajectory
from .protocols import ExperimentBackend, ProtocolError, SimulatorBackend


class BackendUnavailableError(ProtocolError):
    """The remote backend did not answer in time."""


def _pulse_to_dict(p: DrivePulse) -> dict:
    return {"omega_d": p.omega_d, "eps": p.eps, "t_on": p.t_on, "t_off": p.t_off}


def _pulse_from_dict(d: dict) -> DrivePulse:
    return DrivePulse(omega_d=d["omega_d"], eps=d["eps"], t_on=d["t_on"], t_off=d["t_off"])


def _weights_to_dict(w: signal.FilterWeights) -> dict:
    return {
        "times": w.times.tolist(),
        "w_re": w.w.real.tolist(),
        "w_im": w.w.imag.tolist(),
    }


def _weights_from_dict(d: dict) -> signal.FilterWeights:
    return signal.FilterWeights(
        times=np.asarray(d["times"], dtype=float),
        w=np.asarray(d["w_re"], dtype=float) + 1j * np.asarray(d["w_im"], dtype=float),
    )


def _window_to_json(window):
    if window is None:
        return None
    a, b = window
    return [a, None if math.isinf(b) else b]


def _window_from_json(w):
    if w is None:
        return None
    a, b = w
    return (a, math.inf if b is None else b)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        backend = self.server.backend
        for line in self.rfile:
            try:
                reply = self._dispatch(backend, line)
            except Exception as exc:  # protocol must answer, not drop the line
                reply = {"ok": False,
                         "error": {"type": type(exc).__name__, "message": str(exc)}}
            self.wfile.write((json.dumps(reply) + "\n").encode())
            self.wfile.flush()

    def _dispatch(self, backend, line):
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"ok": False,
                    "error": {"type": "MalformedRequest", "message": str(exc)}}
        op = req.get("op")
        if op == "ramsey":
            r = backend.ramsey_under_drive(
                _pulse_from_dict(req["pulse"]), int(req["state"]),
                int(req["shots"]), int(req["seed"]),
                window=_window_from_json(req.get("window")),
            )
            return {"ok": True, "result": {
                "phase": r.phase, "contrast": r.contrast, "shots": r.shots,
                "phase_err": r.phase_err, "contrast_err": r.contrast_err,
            }}
        if op == "acquire_iq":
            c = backend.acquire_iq(
                _pulse_from_dict(req["pulse"]), int(req["state"]),
                _weights_from_dict(req["weights"]), int(req["shots"]), int(req["seed"]),
            )
            return {"ok": True, "result": {
                "state": c.state, "seed": c.seed,
                "points_re": c.points.real.tolist(),
                "points_im": c.points.imag.tolist(),
            }}
        if op == "mean_records":
            t = backend.mean_records(_pulse_from_dict(req["pulse"]))
            return {"ok": True, "result": {
                "times": t.times.tolist(),
                "alpha0_re": t.alpha0.real.tolist(), "alpha0_im": t.alpha0.imag.tolist(),
                "alpha1_re": t.alpha1.real.tolist(), "alpha1_im": t.alpha1.imag.tolist(),
            }}
        return {"ok": False,
                "error": {"type": "UnknownOp", "message": f"unknown op {op!r}"}}


class BackendServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, backend, host="127.0.0.1", port=0):
        super().__init__((host, port), _Handler)
        self.backend = backend


def serve_simulator(params: DeviceParams, host="127.0.0.1", port=0) -> BackendServer:
    return BackendServer(SimulatorBackend(params), host=host, port=port)


class WireBackend(ExperimentBackend):
    """ExperimentBackend speaking the line protocol to a remote server."""

    def __init__(self, host, port, timeout=30.0):
        self.host, self.port, self.timeout = host, int(port), timeout
        self._sock = None
        self._file = None

    def _connect(self):
        if self._sock is None:
            try:
                self._sock = socket.create_connection((self.host, self.port),
                                                      timeout=self.timeout)
            except OSError as exc:
                raise BackendUnavailableError(
                    f"cannot reach wire backend {self.host}:{self.port}: {exc}"
                ) from exc
            self._file = self._sock.makefile("rwb")

    def close(self):
        if self._sock is not None:
            self._file.close()
            self._sock.close()
            self._sock = self._file = None

    def _roundtrip(self, req: dict) -> dict:
        self._connect()
        try:
            self._file.write((json.dumps(req) + "\n").encode())
            self._file.flush()
            line = self._file.readline()
        except (socket.timeout, OSError) as exc:
            raise BackendUnavailableError(f"wire backend {self.host}:{self.port}: {exc}") from exc
        if not line:
            raise BackendUnavailableError("wire backend closed the connection")
        reply = json.loads(line)
        if not reply.get("ok"):
            err = reply.get("error", {})
            raise ProtocolError(f"{err.get('type', 'RemoteError')}: {err.get('message', '')}")
        return reply["result"]

    def ramsey_under_drive(self, pulse, state, shots, seed, window=None):
        r = self._roundtrip({
            "op": "ramsey", "pulse": _pulse_to_dict(pulse), "state": state,
            "shots": int(shots), "seed": int(seed),
            "window": _window_to_json(window),
        })
        return signal.RamseyResult(**r)

    def acquire_iq(self, pulse, state, weights, shots, seed):
        r = self._roundtrip({
            "op": "acquire_iq", "pulse": _pulse_to_dict(pulse), "state": state,
            "weights": _weights_to_dict(weights), "shots": int(shots), "seed": int(seed),
        })
        pts = np.asarray(r["points_re"]) + 1j * np.asarray(r["points_im"])
        return signal.IQCloud(state=r["state"], points=pts, seed=r["seed"])

    def mean_records(self, pulse):
        r = self._roundtrip({"op": "mean_records", "pulse": _pulse_to_dict(pulse)})
        return FieldTrajectory(
            times=np.asarray(r["times"]),
            alpha0=np.asarray(r["alpha0_re"]) + 1j * np.asarray(r["alpha0_im"]),
            alpha1=np.asarray(r["alpha1_re"]) + 1j * np.asarray(r["alpha1_im"]),
        )
