"""Wire-protocol tests: loopback equivalence with the in-process backend,
and robustness of the line protocol."""

import json
import socket
import threading

import numpy as np
import pytest

from readoutchar import design, protocols, report, wire
from readoutchar.model import DeviceParams, DrivePulse
from readoutchar.protocols import SimulatorBackend

TRUTH = DeviceParams(omega_r=50.0, chi=2.0, kappa=4.0, eta=0.6)


@pytest.fixture
def server():
    srv = wire.serve_simulator(TRUTH)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _client(server):
    host, port = server.server_address
    return wire.WireBackend(host, port, timeout=10.0)


class TestLoopback:
    def test_ramsey_identical(self, server):
        remote = _client(server)
        local = SimulatorBackend(TRUTH)
        pulse = DrivePulse(50.0, 1.0, 0.0, 2.0)
        a = local.ramsey_under_drive(pulse, 0, 5000, 42)
        b = remote.ramsey_under_drive(pulse, 0, 5000, 42)
        assert a == b
        w = (2.0, 2.3)
        assert local.ramsey_under_drive(pulse, 0, 5000, 7, window=w) == \
            remote.ramsey_under_drive(pulse, 0, 5000, 7, window=w)
        remote.close()

    def test_iq_identical(self, server):
        remote = _client(server)
        local = SimulatorBackend(TRUTH)
        pulse = DrivePulse(50.0, 1.5, 0.0, 3.0)
        weights = protocols.trajectory_grid(TRUTH, pulse)
        from readoutchar import signal
        w = signal.matched_filter(weights)
        a = local.acquire_iq(pulse, 1, w, 200, 9)
        b = remote.acquire_iq(pulse, 1, w, 200, 9)
        np.testing.assert_array_equal(a.points, b.points)
        remote.close()

    def test_full_protocol_report_byte_identical(self, server):
        """The characterization protocol produces byte-identical serialized
        results over the wire and in process."""
        remote = _client(server)
        local = SimulatorBackend(TRUTH)
        sweep = design.sweep_plan(TRUTH, points=11, shots=2000)
        rep_l = protocols.run_chi_kappa_power(local, sweep, 3)
        rep_r = protocols.run_chi_kappa_power(remote, sweep, 3)
        doc_l = report.serialize_report(report.characterization_to_dict(rep_l))
        doc_r = report.serialize_report(report.characterization_to_dict(rep_r))
        assert doc_l.encode() == doc_r.encode()
        remote.close()


class TestProtocolRobustness:
    def _raw(self, server, payloads):
        host, port = server.server_address
        with socket.create_connection((host, port), timeout=10.0) as sock:
            f = sock.makefile("rwb")
            replies = []
            for p in payloads:
                f.write(p + b"\n")
                f.flush()
                replies.append(json.loads(f.readline()))
            return replies

    def test_malformed_line_keeps_connection_usable(self, server):
        good = json.dumps({"op": "mean_records",
                           "pulse": {"omega_d": 50.0, "eps": 1.0,
                                     "t_on": 0.0, "t_off": 2.0}}).encode()
        replies = self._raw(server, [b"{not json", good])
        assert replies[0]["ok"] is False
        assert replies[0]["error"]["type"] == "MalformedRequest"
        assert replies[1]["ok"] is True

    def test_unknown_op_named(self, server):
        [reply] = self._raw(server, [json.dumps({"op": "frobnicate"}).encode()])
        assert reply["ok"] is False
        assert "frobnicate" in reply["error"]["message"]

    def test_backend_error_reported_not_dropped(self, server):
        bad = json.dumps({"op": "ramsey",
                          "pulse": {"omega_d": 50.0, "eps": 1.0,
                                    "t_on": 0.0, "t_off": 2.0},
                          "state": 0, "shots": 0, "seed": 1}).encode()
        [reply] = self._raw(server, [bad])
        assert reply["ok"] is False

    def test_client_raises_on_error_reply(self, server):
        remote = _client(server)
        pulse = DrivePulse(50.0, 1.0, 0.0, 2.0)
        with pytest.raises(protocols.ProtocolError):
            remote.ramsey_under_drive(pulse, 0, 0, 1)
        remote.close()

    def test_unreachable_server(self):
        client = wire.WireBackend("127.0.0.1", 1, timeout=0.5)
        with pytest.raises(wire.BackendUnavailableError):
            client.ramsey_under_drive(DrivePulse(50.0, 1.0, 0.0, 2.0), 0, 100, 1)
