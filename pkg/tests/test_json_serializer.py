"""Tests for JSON serialization functionality."""

import json
import math
import unittest
from datetime import UTC, datetime
from pathlib import Path

import numpy as np

from ofdm_phy.harness import Experiment, RunReport, build_config
from ofdm_phy.models import ChannelProfile, SchemeName
from ofdm_phy.serializers import EnhancedJSONEncoder, from_json, model_to_dict, to_json


def _report() -> RunReport:
    config = build_config(
        {
            "experiment": "cfo_sweep",
            "sweep": {"variable": "epsilon", "values": [0.0, 0.1]},
            "impairments": {"snr_db": "off", "profile": {"taps": [[1.0, 0.0], [0.0, 0.5]]}},
            "seed": 2**63 + 5,
        }
    )
    return RunReport(
        experiment=Experiment.CFO_SWEEP,
        config=config,
        columns=["epsilon_subcarriers", "predicted_sinr_db", "evm"],
        rows=[[0.0, math.inf, 1e-17], [0.1, 14.98, 0.17]],
        notes=["one note"],
        seed=config.seed,
        wall_time_s=0.25,
        created_at=datetime(2026, 10, 1, 12, 0, tzinfo=UTC),
    )


class TestEnhancedJSONEncoder(unittest.TestCase):
    """Encoding of values the json module does not know."""

    def _encode(self, value):
        return json.loads(json.dumps(value, cls=EnhancedJSONEncoder))

    def test_complex_as_pair(self):
        """Complex numbers become [re, im]."""
        self.assertEqual(self._encode(1 - 2j), [1.0, -2.0])
        self.assertEqual(self._encode(np.complex128(0.5j)), [0.0, 0.5])

    def test_numpy_values(self):
        """Arrays and numpy scalars become plain JSON."""
        self.assertEqual(self._encode(np.arange(3)), [0, 1, 2])
        self.assertEqual(self._encode(np.int64(7)), 7)
        self.assertEqual(self._encode(np.float32(0.5)), 0.5)

    def test_enum_path_and_datetime(self):
        """Enums, paths and datetimes are written as strings."""
        self.assertEqual(self._encode(SchemeName.QAM16), "16QAM")
        self.assertEqual(self._encode(Path("runs/a.csv")), "runs/a.csv")
        self.assertEqual(self._encode(datetime(2026, 1, 2, 3, 4, 5)), "2026-01-02T03:04:05")

    def test_unknown_type(self):
        """Anything else is still an error."""
        with self.assertRaises(TypeError):
            json.dumps(object(), cls=EnhancedJSONEncoder)


class TestJsonRoundTrip(unittest.TestCase):
    """Reports written as JSON and read back."""

    def setUp(self):
        """Build a report with a full config echo."""
        self.report = _report()

    def test_to_json_string(self):
        """Output is valid JSON with the config echo and seed."""
        data = json.loads(to_json(self.report))
        self.assertEqual(data["experiment"], "cfo_sweep")
        self.assertEqual(data["seed"], 2**63 + 5)
        self.assertEqual(data["config"]["impairments"]["profile"]["taps"], [[1.0, 0.0], [0.0, 0.5]])
        self.assertIsNone(data["config"]["impairments"]["snr_db"])
        self.assertEqual(data["created_at"], "2026-10-01T12:00:00+00:00")

    def test_infinity_survives(self):
        """Non-finite cells are written as Infinity and read back."""
        text = to_json(self.report)
        self.assertIn("Infinity", text)
        restored = from_json(text, RunReport)
        self.assertEqual(restored.rows[0][1], math.inf)

    def test_from_json(self):
        """The report validates back to an equal table and config."""
        restored = from_json(to_json(self.report, pretty=True), RunReport)
        self.assertEqual(restored.rows, self.report.rows)
        self.assertEqual(restored.columns, self.report.columns)
        self.assertEqual(restored.config, self.report.config)
        self.assertEqual(restored.created_at, self.report.created_at)

    def test_pretty_and_sorted(self):
        """Formatting options are passed through."""
        pretty = to_json(self.report, pretty=True, sort_keys=True)
        self.assertIn("\n  ", pretty)
        keys = list(json.loads(pretty))
        self.assertEqual(keys, sorted(keys))

    def test_dict_output(self):
        """encode_json=False returns the dict."""
        data = to_json(self.report, encode_json=False)
        self.assertIsInstance(data, dict)
        self.assertEqual(data["columns"], self.report.columns)

    def test_many(self):
        """Lists of models are supported both ways."""
        profiles = [ChannelProfile(taps=[1.0]), ChannelProfile(taps=[0.5, 0.5j])]
        restored = from_json(to_json(profiles), ChannelProfile, many=True)
        self.assertEqual(len(restored), 2)
        np.testing.assert_array_equal(restored[1].taps, np.array([0.5, 0.5j]))
        with self.assertRaises(ValueError):
            from_json("{}", ChannelProfile, many=True)

    def test_model_to_dict(self):
        """exclude_none drops unset optionals."""
        data = model_to_dict(self.report.config, exclude_none=True)
        self.assertNotIn("output", data)
        self.assertIn("output", model_to_dict(self.report.config))


if __name__ == "__main__":
    unittest.main()
