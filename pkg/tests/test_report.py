"""Report and config-layer tests: serialization determinism and schema
validation details not covered by the CLI tests."""

import json
import math

import numpy as np
import pytest

from readoutchar import config, report


class TestSerialization:
    def test_sorted_keys_stable(self):
        doc_a = report.build_report("x", {"b": 1, "a": 2}, {"z": 1.0, "y": 2.0})
        doc_b = report.build_report("x", {"a": 2, "b": 1}, {"y": 2.0, "z": 1.0})
        assert report.serialize_report(doc_a) == report.serialize_report(doc_b)

    def test_numpy_and_nonfinite_sanitized(self):
        doc = report.build_report("x", {}, {
            "a": np.float64(1.5), "b": np.int64(3), "c": math.nan,
            "d": math.inf, "e": np.array([1.0, 2.0]), "f": np.bool_(True),
        })
        text = report.serialize_report(doc)
        parsed = json.loads(text)
        res = parsed["results"]
        assert res == {"a": 1.5, "b": 3, "c": None, "d": None,
                       "e": [1.0, 2.0], "f": True}
        # strict JSON: no NaN/Infinity literals in the output
        json.loads(text, parse_constant=lambda c: pytest.fail(f"bare {c}"))

    def test_trace_csv_roundtrip_lossless(self, tmp_path):
        rows = [(0.1 + 0.2, 0, math.pi, 1e-17)]
        path = tmp_path / "t.csv"
        report.write_trace_csv(path, rows)
        header, line = path.read_text().splitlines()
        assert header == "sweep_value,state,observable,stderr"
        vals = line.split(",")
        assert float(vals[0]) == 0.1 + 0.2
        assert float(vals[2]) == math.pi
        assert float(vals[3]) == 1e-17


class TestConfigValidation:
    BASE = {"protocol": "predict-snr", "master_seed": 1}

    def test_minimal_valid(self):
        cfg = config.validate_config(dict(self.BASE))
        assert cfg.protocol == "predict-snr"
        assert cfg.threads == 1

    def test_unknown_top_level_field(self):
        with pytest.raises(config.ConfigError, match="mystery"):
            config.validate_config(dict(self.BASE, mystery=1))

    def test_nested_path_in_message(self):
        bad = dict(self.BASE, ringdown={"n_delays": 1})
        with pytest.raises(config.ConfigError, match="ringdown.n_delays"):
            config.validate_config(bad)

    def test_missing_required(self):
        with pytest.raises(config.ConfigError, match="master_seed"):
            config.validate_config({"protocol": "predict-snr"})

    def test_device_property_guard(self):
        cfg = config.validate_config(dict(self.BASE))
        with pytest.raises(config.ConfigError, match="device"):
            cfg.device

    def test_non_object_root(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("[1, 2]")
        with pytest.raises(config.ConfigError):
            config.load_config(p)
