"""Tests for scenario configuration and the experiment runners."""

import json
import math

import pytest

from ofdm_phy.analysis import q_function
from ofdm_phy.exceptions import ConfigurationError, SimulationError
from ofdm_phy.harness import (
    EBN0_NOTE,
    PRESETS,
    THREADS_ENV_VAR,
    Experiment,
    RunReport,
    ScenarioConfig,
    SweepSpec,
    build_config,
    config_schema,
    default_threads,
    ebn0_to_snr_db,
    load_config,
    replay_report,
    resolve_config,
    run_ber_sweep,
    run_cfo_sweep,
    run_cp_sweep,
    run_experiment,
    run_papr_ccdf,
    run_psd,
)
from ofdm_phy.models import SchemeName, SubcarrierPlan
from ofdm_phy.serializers import from_json, to_csv, write_report


def _column(report: RunReport, name: str) -> list:
    index = report.columns.index(name)
    return [row[index] for row in report.rows]


class TestScenarioConfig:
    """Validation of scenario documents."""

    def test_defaults(self):
        """A bare experiment is a valid scenario."""
        config = build_config({"experiment": "ber_sweep"})
        assert config.n_fft == 64
        assert config.scheme is SchemeName.QPSK
        assert config.segment_len == 256
        assert config.plan == SubcarrierPlan(n_fft=64)

    def test_cp_len_must_be_below_n_fft(self):
        """Ng >= N is rejected and the error names cp_len."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "ber_sweep", "n_fft": 16, "cp_len": 16})
        assert excinfo.value.parameter == "cp_len"
        assert "cp_len" in excinfo.value.message

    def test_error_reports_line(self, tmp_path):
        """Errors in a file carry the line of the offending key."""
        path = tmp_path / "bad.json"
        path.write_text('{\n  "experiment": "ber_sweep",\n  "n_fft": 16,\n  "cp_len": 32\n}\n')
        with pytest.raises(ConfigurationError) as excinfo:
            load_config(path)
        assert excinfo.value.line == 4
        assert "line 4" in excinfo.value.message

    def test_unknown_key(self):
        """Typos are errors."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "ber_sweep", "n_ftt": 64})
        assert excinfo.value.parameter == "n_ftt"

    def test_nested_unknown_key(self):
        """Unknown keys inside impairments are errors with a dotted path."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "ber_sweep", "impairments": {"snr": 10}})
        assert excinfo.value.parameter == "impairments.snr"

    def test_malformed_json(self, tmp_path):
        """Syntax errors report their line."""
        path = tmp_path / "broken.json"
        path.write_text('{\n  "experiment": "psd",\n  "n_fft": ,\n}\n')
        with pytest.raises(ConfigurationError) as excinfo:
            load_config(path)
        assert excinfo.value.line == 3

    def test_zero_symbols_rejected(self):
        """A run needs at least one symbol."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "ber_sweep", "symbols_per_trial": 0})
        assert excinfo.value.parameter == "symbols_per_trial"

    def test_plan_without_active_subcarriers(self):
        """Guards that swallow the band are rejected."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "ber_sweep", "n_fft": 8, "null_dc": True, "guard_nulls_per_side": 4})
        assert excinfo.value.parameter == "guard_nulls_per_side"

    def test_rolloff_within_prefix(self):
        """The roll-off must fit in the prefix."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "psd", "cp_len": 4, "rolloff_len": 5, "symbols_per_trial": 10})
        assert excinfo.value.parameter == "rolloff_len"

    def test_taps_longer_than_symbol(self):
        """Channel taps must fit in N."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "ber_sweep", "n_fft": 4, "impairments": {"profile": {"taps": [1, 0, 0, 0, 1]}}})
        assert excinfo.value.parameter == "impairments"

    def test_epsilon_out_of_range(self):
        """|epsilon| >= 0.5 is rejected."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "cfo_sweep", "sweep": {"variable": "epsilon", "values": [0.1, 0.5]}})
        assert excinfo.value.parameter == "sweep"

    def test_sweep_variable_must_match(self):
        """Each experiment sweeps its own variable."""
        with pytest.raises(ConfigurationError):
            build_config({"experiment": "cp_sweep", "sweep": {"variable": "epsilon", "values": [0.1]}})
        with pytest.raises(ConfigurationError):
            build_config({"experiment": "psd", "sweep": {"variable": "ebn0_db", "values": [1.0]}})
        with pytest.raises(ConfigurationError):
            build_config({"experiment": "cfo_sweep"})

    def test_cp_points_must_be_integers(self):
        """Prefix lengths are whole samples below N."""
        with pytest.raises(ConfigurationError):
            build_config({"experiment": "cp_sweep", "sweep": {"variable": "cp_len", "values": [1.5]}})
        with pytest.raises(ConfigurationError):
            build_config({"experiment": "cp_sweep", "sweep": {"variable": "cp_len", "values": [64]}})

    def test_psd_segment_must_fit_in_a_trial(self):
        """A trial must hold at least one Welch segment."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"experiment": "psd", "symbols_per_trial": 2})
        assert excinfo.value.parameter == "psd_segment_len"

    def test_seed_range(self):
        """Seeds are unsigned 64-bit."""
        assert build_config({"experiment": "psd", "seed": 2**64 - 1, "symbols_per_trial": 4}).seed == 2**64 - 1
        with pytest.raises(ConfigurationError):
            build_config({"experiment": "ber_sweep", "seed": -1})

    def test_schema_version(self):
        """Only schema version 1 is read."""
        with pytest.raises(ConfigurationError) as excinfo:
            build_config({"schema_version": 2, "experiment": "ber_sweep"})
        assert excinfo.value.parameter == "schema_version"

    def test_schema_is_published(self):
        """The JSON schema lists every key."""
        schema = config_schema()
        assert {"experiment", "n_fft", "cp_len", "sweep", "seed"} <= set(schema["properties"])

    def test_schema_describes_taps(self):
        """Channel taps appear in the schema as numbers or [re, im] pairs."""
        schema = config_schema()
        taps = schema["$defs"]["ChannelProfile"]["properties"]["taps"]
        assert taps["type"] == "array"
        assert {"type": "number"} in taps["items"]["anyOf"]
        assert json.loads(json.dumps(schema)) == schema

    def test_every_preset_is_valid(self):
        """All presets validate."""
        for name in PRESETS:
            assert isinstance(resolve_config(preset=name), ScenarioConfig)


class TestSweepSpec:
    """Sweep point resolution."""

    def test_range(self):
        """start/stop/step includes the stop value."""
        assert SweepSpec(variable="ebn0_db", start=0, stop=8, step=2).points == [0.0, 2.0, 4.0, 6.0, 8.0]

    def test_values_kept_in_order(self):
        """Explicit values are used as given."""
        assert SweepSpec(variable="epsilon", values=[0.2, 0.0]).points == [0.2, 0.0]

    def test_exactly_one_form(self):
        """values and a range cannot be mixed."""
        with pytest.raises(ValueError):
            SweepSpec(variable="epsilon", values=[0.1], start=0.0, stop=1.0, step=0.1)
        with pytest.raises(ValueError):
            SweepSpec(variable="epsilon", start=0.0)


class TestResolveConfig:
    """Merging presets, files and overrides."""

    def test_precedence(self, tmp_path):
        """Overrides beat the file, the file beats the preset."""
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"n_trials": 3, "seed": 5}))
        config = resolve_config(preset="awgn", config_path=path, overrides={"seed": 9, "output": None})
        assert config.n_trials == 3
        assert config.seed == 9
        assert config.symbols_per_trial == PRESETS["awgn"]["symbols_per_trial"]

    def test_experiment_fills_in(self, tmp_path):
        """A file without an experiment takes the subcommand's."""
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"n_fft": 32, "sweep": {"variable": "epsilon", "values": [0.1]}}))
        assert resolve_config(config_path=path, experiment=Experiment.CFO_SWEEP).experiment is Experiment.CFO_SWEEP

    def test_experiment_conflict(self):
        """A preset for another experiment is rejected."""
        with pytest.raises(ConfigurationError) as excinfo:
            resolve_config(preset="fig5", experiment=Experiment.PSD)
        assert excinfo.value.parameter == "experiment"

    def test_unknown_preset(self):
        """Preset names are checked."""
        with pytest.raises(ConfigurationError):
            resolve_config(preset="fig9")

    def test_missing_file(self, tmp_path):
        """Unreadable files are configuration errors."""
        with pytest.raises(ConfigurationError):
            resolve_config(config_path=tmp_path / "nope.json")

    def test_default_threads(self, monkeypatch):
        """Thread count comes from the environment."""
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert default_threads() == 1
        monkeypatch.setenv(THREADS_ENV_VAR, "6")
        assert default_threads() == 6
        monkeypatch.setenv(THREADS_ENV_VAR, "zero")
        with pytest.raises(ConfigurationError):
            default_threads()


class TestRunPsd:
    """PSD experiment."""

    def test_null_bands_suppressed(self):
        """The fig2 layout holds DC and guard nulls 30 dB down."""
        config = resolve_config(preset="fig2", overrides={"n_trials": 2})
        report = run_psd(config)
        assert report.columns == ["frequency_cycles_per_sample", "power_db_rel"]
        power = dict(zip(_column(report, "frequency_cycles_per_sample"), _column(report, "power_db_rel"), strict=True))
        plan = config.plan
        for k in plan.null_indices:
            assert power[plan.signed_frequency(k) / 64] <= -30.0

    def test_deterministic(self):
        """Same seed, same bytes."""
        config = build_config({"experiment": "psd", "n_trials": 2, "symbols_per_trial": 50, "seed": 3})
        assert to_csv(run_psd(config)) == to_csv(run_psd(config))
        assert to_csv(run_psd(config, threads=1)) == to_csv(run_psd(config, threads=2))


class TestRunPaprCcdf:
    """CCDF experiment."""

    def test_both_statistics_per_scheme(self):
        """Rows cover each scheme and statistic at ascending thresholds."""
        config = build_config(
            {
                "experiment": "papr_ccdf",
                "n_fft": 32,
                "schemes": ["BPSK", "QPSK"],
                "thresholds_db": [9.0, 3.0, 6.0],
                "n_trials": 500,
            }
        )
        report = run_papr_ccdf(config)
        assert report.columns == ["statistic", "scheme", "threshold_db", "exceed_prob", "trials"]
        assert len(report.rows) == 2 * 2 * 3
        assert {(row[0], row[1]) for row in report.rows} == {
            ("papr", "BPSK"),
            ("sample_power", "BPSK"),
            ("papr", "QPSK"),
            ("sample_power", "QPSK"),
        }
        assert [row[2] for row in report.rows[:3]] == [3.0, 6.0, 9.0]

    def test_single_trial_is_a_step(self):
        """One symbol gives probabilities of 0 or 1."""
        config = build_config({"experiment": "papr_ccdf", "n_fft": 16, "n_trials": 1})
        papr_rows = [row for row in run_papr_ccdf(config).rows if row[0] == "papr"]
        assert {row[3] for row in papr_rows} <= {0.0, 1.0}

    @pytest.mark.slow
    def test_fig5_thread_independent(self):
        """The fig5 preset gives the same CSV with 1 and 8 threads."""
        config = resolve_config(preset="fig5", overrides={"n_trials": 20_000})
        assert to_csv(run_papr_ccdf(config, threads=1)) == to_csv(run_papr_ccdf(config, threads=8))


class TestRunBerSweep:
    """BER experiment."""

    def test_ebn0_conversion(self):
        """Full QPSK plan without a prefix adds 10 log10(2)."""
        assert ebn0_to_snr_db(4.0, SchemeName.QPSK, SubcarrierPlan(n_fft=64), 0) == pytest.approx(
            4.0 + 10 * math.log10(2)
        )
        assert ebn0_to_snr_db(0.0, SchemeName.BPSK, SubcarrierPlan(n_fft=64), 16) == pytest.approx(
            10 * math.log10(64 / 80)
        )

    def test_qpsk_matches_theory(self):
        """Measured BER at 4 dB is within 3 binomial sigma of Q(sqrt(2 Eb/N0))."""
        config = build_config(
            {
                "experiment": "ber_sweep",
                "sweep": {"variable": "ebn0_db", "values": [4.0]},
                "n_trials": 50,
                "symbols_per_trial": 80,
                "seed": 11,
            }
        )
        report = run_ber_sweep(config)
        measured = _column(report, "ber")[0]
        bits = _column(report, "bits")[0]
        expected = float(q_function(math.sqrt(2 * 10**0.4)))
        assert bits == 50 * 80 * 128
        assert abs(measured - expected) < 3 * math.sqrt(expected * (1 - expected) / bits)
        assert _column(report, "theory_ber")[0] == pytest.approx(expected)
        assert report.notes == [EBN0_NOTE]

    @pytest.mark.slow
    def test_awgn_preset_matches_theory_at_every_point(self):
        """Each Eb/N0 point of the awgn preset is within 3 binomial sigma of theory."""
        report = run_ber_sweep(resolve_config(preset="awgn"))
        assert _column(report, "ebn0_db") == [0.0, 2.0, 4.0, 6.0, 8.0]
        for ebn0_db, measured, bits in zip(
            _column(report, "ebn0_db"), _column(report, "ber"), _column(report, "bits"), strict=True
        ):
            expected = float(q_function(math.sqrt(2 * 10 ** (ebn0_db / 10))))
            assert bits >= 1_000_000
            assert abs(measured - expected) < 3 * math.sqrt(expected * (1 - expected) / bits), ebn0_db

    def test_noise_off_is_error_free(self):
        """No noise, no errors."""
        config = build_config({"experiment": "ber_sweep", "n_trials": 4, "symbols_per_trial": 50})
        report = run_ber_sweep(config)
        assert _column(report, "ber") == [0.0]
        assert _column(report, "ebn0_db") == [math.inf]

    def test_non_increasing(self):
        """Common random numbers keep the curve monotone."""
        config = resolve_config(preset="awgn", overrides={"n_trials": 10})
        values = _column(run_ber_sweep(config), "ber")
        assert all(b <= a for a, b in zip(values, values[1:], strict=False))
        assert values[0] > values[-1]

    def test_runner_failure_is_a_simulation_error(self, monkeypatch):
        """Unexpected failures inside a trial surface as SimulationError."""
        config = build_config({"experiment": "ber_sweep", "n_trials": 2, "symbols_per_trial": 1})

        def boom(*args, **kwargs):
            raise FloatingPointError("overflow")

        monkeypatch.setattr("ofdm_phy.harness.ImpairmentChain", boom)
        with pytest.raises(SimulationError) as excinfo:
            run_experiment(config)
        assert excinfo.value.trial == 0


class TestRunCfoSweep:
    """CFO experiment."""

    def test_prediction_matches_measurement(self):
        """Kernel SINR and measured SINR agree within 0.2 dB."""
        config = build_config(
            {
                "experiment": "cfo_sweep",
                "sweep": {"variable": "epsilon", "values": [0.0, 0.05, 0.1, 0.2]},
                "n_trials": 10,
                "symbols_per_trial": 100,
            }
        )
        report = run_cfo_sweep(config)
        evm_values = _column(report, "evm")
        assert evm_values[0] < 1e-9
        predicted = _column(report, "predicted_sinr_db")
        measured = _column(report, "measured_sinr_db")
        assert predicted[0] == math.inf
        for p, m in zip(predicted[1:], measured[1:], strict=True):
            assert abs(p - m) < 0.2

    def test_prediction_matches_measurement_with_nulls(self):
        """With DC and guard nulls the pooled prediction still tracks the measurement."""
        config = build_config(
            {
                "experiment": "cfo_sweep",
                "null_dc": True,
                "guard_nulls_per_side": 11,
                "sweep": {"variable": "epsilon", "values": [0.05, 0.1, 0.2]},
                "n_trials": 10,
                "symbols_per_trial": 100,
            }
        )
        report = run_cfo_sweep(config)
        predicted = _column(report, "predicted_sinr_db")
        measured = _column(report, "measured_sinr_db")
        for p, m in zip(predicted, measured, strict=True):
            assert abs(p - m) < 0.2

    def test_ber_grows_with_offset(self):
        """At 15 dB SNR the BER does not fall as the offset grows."""
        config = build_config(
            {
                "experiment": "cfo_sweep",
                "impairments": {"snr_db": 15.0},
                "sweep": {"variable": "epsilon", "values": [0.0, 0.1, 0.2, 0.3]},
                "n_trials": 10,
                "symbols_per_trial": 100,
            }
        )
        values = _column(run_cfo_sweep(config), "ber")
        assert all(b >= a for a, b in zip(values, values[1:], strict=False))
        assert values[-1] > 0

    def test_thread_independent(self):
        """The sweep preset gives the same CSV on 1 and 8 threads."""
        config = resolve_config(preset="sweep", overrides={"n_trials": 8, "symbols_per_trial": 20})
        assert to_csv(run_cfo_sweep(config, threads=1)) == to_csv(run_cfo_sweep(config, threads=8))


class TestRunCpSweep:
    """Cyclic prefix experiment."""

    def test_prefix_absorbs_delay_spread(self):
        """EVM vanishes once Ng covers the excess delay and grows below it."""
        config = resolve_config(preset="multipath", overrides={"n_trials": 2})
        report = run_cp_sweep(config)
        rows = {row[0]: row for row in report.rows}
        for guard in (4, 6, 8, 16):
            assert rows[guard][1] < 1e-9
            assert rows[guard][2] == 0.0
        for guard in (0, 1, 2, 3):
            assert rows[guard][1] > 1e-3
            assert rows[guard][1] > rows[4][1]

    def test_flat_channel_needs_no_prefix(self):
        """With taps = [1] even Ng = 0 is clean."""
        config = build_config(
            {
                "experiment": "cp_sweep",
                "sweep": {"variable": "cp_len", "values": [0]},
                "n_trials": 2,
                "symbols_per_trial": 5,
            }
        )
        assert run_cp_sweep(config).rows[0][1] < 1e-9


class TestReports:
    """Report metadata and replay."""

    def test_report_echoes_config(self):
        """The report carries the resolved config and seed."""
        config = build_config({"experiment": "psd", "n_trials": 1, "symbols_per_trial": 8, "seed": 42})
        report = run_experiment(config)
        assert report.config == config
        assert report.seed == 42
        assert report.experiment is Experiment.PSD
        assert report.wall_time_s >= 0

    def test_replay_reproduces_table(self, tmp_path):
        """Re-running the sidecar's config gives the same CSV bytes."""
        config = resolve_config(preset="multipath", overrides={"n_trials": 1, "seed": 7})
        report = run_experiment(config)
        csv_path, sidecar = write_report(report, tmp_path / "cp.csv")
        replayed = replay_report(sidecar)
        assert to_csv(replayed) == csv_path.read_text()
        restored = from_json(sidecar.read_text(), RunReport)
        assert restored.rows == report.rows
        assert restored.config == report.config

    def test_replay_needs_config(self, tmp_path):
        """A sidecar without a config echo cannot be replayed."""
        path = tmp_path / "x.report.json"
        path.write_text("{}")
        with pytest.raises(ConfigurationError):
            replay_report(path)
