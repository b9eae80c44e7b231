"""Experiment orchestration: scenario configuration, presets and Monte-Carlo runners.

A scenario is one JSON document validated by :class:`ScenarioConfig`. Each
runner turns a scenario into a :class:`RunReport` holding a per-point table.

Reproducibility contract:

* trial ``t`` draws all of its randomness from ``RngStream(seed, t)``
  (bits from substream ``STREAM_BITS``, noise from ``STREAM_AWGN``, phase
  noise from ``STREAM_PHASE_NOISE``);
* every sweep point reuses the same trial streams;
* trials may run on worker threads but are reduced in trial order, so the
  table does not depend on the thread count.
"""

import json
import math
import os
import time
from collections.abc import Callable
from datetime import UTC, datetime
from enum import Enum
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from . import __version__
from .analysis import (
    evm,
    ls_sinr,
    normalize_psd,
    papr_ccdf,
    pooled_cfo_sinr,
    sample_power_ccdf,
    theoretical_ber,
    welch_periodogram,
)
from .channel import ImpairmentChain, apply_awgn, apply_cfo, apply_phase_noise, channel_frequency_response
from .exceptions import ConfigurationError, OfdmPhyError, SimulationError
from .modem import BITS_PER_SYMBOL, OfdmModem, allocate, deallocate, demap_symbols, ofdm_demodulate, ofdm_modulate
from .models import (
    ChannelProfile,
    CyclicPrefixSpec,
    FilterSpec,
    ImpairmentConfig,
    SchemeName,
    SubcarrierPlan,
    TimeSignal,
)
from .numerics import STREAM_AWGN, STREAM_BITS, STREAM_PHASE_NOISE, RngStream, ordered_map
from .utils import LogContext, get_logger, log_function_call, log_to_json

logger = get_logger("harness")

SCHEMA_VERSION = 1

THREADS_ENV_VAR = "OFDM_PHY_THREADS"

_U64_MAX = 2**64 - 1

EBN0_NOTE = (
    "snr_db = ebn0_db + 10*log10(bits_per_symbol * n_active / n_fft * n_fft / (n_fft + cp_len)); "
    "snr_db is referenced to the measured power of the transmitted stream"
)


class Experiment(str, Enum):
    """Enum for the experiment kinds a scenario can run."""

    PSD = "psd"
    PAPR_CCDF = "papr_ccdf"
    BER_SWEEP = "ber_sweep"
    CFO_SWEEP = "cfo_sweep"
    CP_SWEEP = "cp_sweep"


# Sweep variable each experiment accepts
SWEEP_VARIABLES = {
    Experiment.BER_SWEEP: "ebn0_db",
    Experiment.CFO_SWEEP: "epsilon",
    Experiment.CP_SWEEP: "cp_len",
}


class SweepSpec(BaseModel):
    """Sweep variable and its points, given as a list or as start/stop/step."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variable: Literal["ebn0_db", "epsilon", "cp_len"]
    values: list[float] | None = None
    start: float | None = None
    stop: float | None = None
    step: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def check_range(self) -> "SweepSpec":
        """Exactly one of values or start/stop/step must be given."""
        ranged = (self.start, self.stop, self.step)
        if self.values is not None:
            if any(v is not None for v in ranged):
                raise ValueError("give either values or start/stop/step, not both")
            if not self.values:
                raise ValueError("values must not be empty")
        elif any(v is None for v in ranged):
            raise ValueError("start, stop and step are all required without values")
        elif self.stop < self.start:
            raise ValueError("stop must not be below start")
        return self

    @property
    def points(self) -> list[float]:
        """The resolved sweep points, in the given order."""
        if self.values is not None:
            return [float(v) for v in self.values]
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 12) for i in range(count)]


def _default_thresholds() -> list[float]:
    return [round(0.5 * i, 12) for i in range(0, 27)]


class ScenarioConfig(BaseModel):
    """One experiment definition.

    Cross-field checks run as field validators so that every error names the
    offending key; fields are therefore declared in dependency order.

    Attributes:
        schema_version: Config schema version (only 1)
        experiment: Which runner to use
        n_fft: Transform length N
        null_dc: Leave the DC subcarrier empty
        guard_nulls_per_side: Empty subcarriers at each band edge
        scheme: Constellation for psd/ber/cfo/cp runs
        schemes: Constellations compared by papr_ccdf (default: ``[scheme]``)
        cp_len: Cyclic prefix length Ng
        rolloff_len: Raised-cosine roll-off inside the prefix
        tx_filter: Transmit low-pass filter, or null for none
        impairments: Channel impairments
        sweep: Sweep variable and points (ber/cfo/cp runs)
        thresholds_db: CCDF thresholds, any order
        clip_ratio_db: Clip symbols at this ratio before the PAPR statistics
        n_trials: Monte-Carlo trials
        symbols_per_trial: OFDM symbols streamed per trial
        seed: 64-bit master seed
        output: CSV path; the JSON sidecar goes next to it
        psd_segment_len: Welch segment length (default 4 * n_fft)
        psd_overlap: Welch overlap (default half a segment)
        psd_window: scipy window name

    """

    model_config = ConfigDict(frozen=True, extra="forbid", ser_json_inf_nan="constants")

    schema_version: int = SCHEMA_VERSION
    experiment: Experiment
    n_fft: int = Field(default=64, ge=1, le=1 << 16)
    null_dc: bool = False
    guard_nulls_per_side: int = Field(default=0, ge=0, validate_default=True)
    scheme: SchemeName = SchemeName.QPSK
    schemes: list[SchemeName] | None = None
    cp_len: int = Field(default=0, ge=0)
    rolloff_len: int = Field(default=0, ge=0)
    tx_filter: FilterSpec | None = None
    impairments: ImpairmentConfig = Field(default_factory=ImpairmentConfig)
    sweep: SweepSpec | None = Field(default=None, validate_default=True)
    thresholds_db: list[float] = Field(default_factory=_default_thresholds, min_length=1)
    clip_ratio_db: float | None = None
    n_trials: int = Field(default=100, ge=1)
    symbols_per_trial: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, le=_U64_MAX)
    output: str | None = None
    psd_segment_len: int | None = Field(default=None, ge=1, validate_default=True)
    psd_overlap: int | None = Field(default=None, ge=0)
    psd_window: str = "hann"

    @field_validator("schema_version")
    @classmethod
    def check_schema_version(cls, value: int) -> int:
        """Only the current schema is understood."""
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}; this release reads version {SCHEMA_VERSION}")
        return value

    @field_validator("guard_nulls_per_side")
    @classmethod
    def check_plan(cls, value: int, info: ValidationInfo) -> int:
        """The subcarrier plan must leave active subcarriers."""
        n_fft = info.data.get("n_fft")
        if n_fft is not None:
            try:
                SubcarrierPlan(n_fft=n_fft, null_dc=info.data.get("null_dc", False), guard_nulls_per_side=value)
            except ValidationError as e:
                raise ValueError(e.errors()[0]["msg"]) from e
        return value

    @field_validator("cp_len")
    @classmethod
    def check_cp_len(cls, value: int, info: ValidationInfo) -> int:
        """The prefix must be shorter than the symbol."""
        n_fft = info.data.get("n_fft")
        if n_fft is not None and value >= n_fft:
            raise ValueError(f"cp_len={value} must be smaller than n_fft={n_fft}")
        return value

    @field_validator("rolloff_len")
    @classmethod
    def check_rolloff(cls, value: int, info: ValidationInfo) -> int:
        """The roll-off lives inside the prefix."""
        cp_len = info.data.get("cp_len")
        if cp_len is not None and value > cp_len:
            raise ValueError(f"rolloff_len={value} must not exceed cp_len={cp_len}")
        return value

    @field_validator("impairments")
    @classmethod
    def check_impairments(cls, value: ImpairmentConfig, info: ValidationInfo) -> ImpairmentConfig:
        """Channel taps must fit in one symbol."""
        n_fft = info.data.get("n_fft")
        if value.profile is not None and n_fft is not None and value.profile.taps.size > n_fft:
            raise ValueError(f"{value.profile.taps.size} channel taps exceed n_fft={n_fft}")
        return value

    @field_validator("sweep")
    @classmethod
    def check_sweep(cls, value: SweepSpec | None, info: ValidationInfo) -> SweepSpec | None:
        """The sweep must fit the experiment and stay within each variable's range."""
        experiment = info.data.get("experiment")
        if experiment is None:
            return value
        expected = SWEEP_VARIABLES.get(experiment)
        if value is None:
            if experiment in (Experiment.CFO_SWEEP, Experiment.CP_SWEEP):
                raise ValueError(f"{experiment.value} needs a sweep over {expected}")
            return value
        if expected is None:
            raise ValueError(f"{experiment.value} does not take a sweep")
        if value.variable != expected:
            raise ValueError(f"{experiment.value} sweeps {expected}, not {value.variable}")
        points = value.points
        if expected == "epsilon" and any(not abs(p) < 0.5 for p in points):
            raise ValueError("every epsilon must satisfy |epsilon| < 0.5")
        if expected == "cp_len":
            n_fft = info.data.get("n_fft")
            rolloff = info.data.get("rolloff_len", 0)
            for p in points:
                if p != int(p) or p < rolloff or (n_fft is not None and p >= n_fft):
                    raise ValueError(f"cp_len point {p} must be an integer in [rolloff_len, n_fft)")
        if expected == "ebn0_db" and any(not math.isfinite(p) for p in points):
            raise ValueError("ebn0_db points must be finite")
        return value

    @field_validator("thresholds_db")
    @classmethod
    def check_thresholds(cls, value: list[float]) -> list[float]:
        """Thresholds may be infinite but not NaN."""
        if any(math.isnan(v) for v in value):
            raise ValueError("thresholds must not be NaN")
        return value

    @field_validator("psd_segment_len")
    @classmethod
    def check_segment(cls, value: int | None, info: ValidationInfo) -> int | None:
        """Each trial's stream must hold at least one segment."""
        if info.data.get("experiment") != Experiment.PSD:
            return value
        n_fft = info.data.get("n_fft", 0)
        segment = value or 4 * n_fft
        length = info.data.get("symbols_per_trial", 0) * (n_fft + info.data.get("cp_len", 0))
        if segment > length:
            raise ValueError(f"psd_segment_len={segment} exceeds the {length}-sample stream of one trial")
        return value

    @field_validator("psd_overlap")
    @classmethod
    def check_overlap(cls, value: int | None, info: ValidationInfo) -> int | None:
        """Overlap must be shorter than a segment."""
        if value is None:
            return value
        segment = info.data.get("psd_segment_len") or 4 * info.data.get("n_fft", 0)
        if value >= segment:
            raise ValueError(f"psd_overlap={value} must be smaller than the segment length {segment}")
        return value

    @property
    def plan(self) -> SubcarrierPlan:
        """Subcarrier layout."""
        return SubcarrierPlan(n_fft=self.n_fft, null_dc=self.null_dc, guard_nulls_per_side=self.guard_nulls_per_side)

    @property
    def segment_len(self) -> int:
        """Welch segment length actually used."""
        return self.psd_segment_len or 4 * self.n_fft

    def modem(self, cp_len: int | None = None) -> OfdmModem:
        """Modem for this scenario, optionally with another prefix length."""
        guard = self.cp_len if cp_len is None else cp_len
        return OfdmModem(
            scheme=self.scheme,
            plan=self.plan,
            cyclic_prefix=CyclicPrefixSpec(n_fft=self.n_fft, guard_len=guard),
            rolloff_len=self.rolloff_len,
            transmit_filter=self.tx_filter,
        )


PRESETS: dict[str, dict[str, Any]] = {
    "fig1": {
        "experiment": "psd",
        "n_fft": 64,
        "scheme": "QPSK",
        "n_trials": 4,
        "symbols_per_trial": 1000,
    },
    "fig2": {
        "experiment": "psd",
        "n_fft": 64,
        "scheme": "QPSK",
        "null_dc": True,
        "guard_nulls_per_side": 11,
        "n_trials": 4,
        "symbols_per_trial": 1000,
        "psd_segment_len": 4096,
    },
    "fig5": {
        "experiment": "papr_ccdf",
        "n_fft": 128,
        "schemes": ["BPSK", "QPSK", "16QAM"],
        "thresholds_db": [round(4.0 + 0.25 * i, 12) for i in range(37)],
        "n_trials": 100_000,
    },
    "awgn": {
        "experiment": "ber_sweep",
        "n_fft": 64,
        "scheme": "QPSK",
        "sweep": {"variable": "ebn0_db", "start": 0.0, "stop": 8.0, "step": 2.0},
        "n_trials": 100,
        "symbols_per_trial": 80,
    },
    "sweep": {
        "experiment": "cfo_sweep",
        "n_fft": 64,
        "scheme": "QPSK",
        "sweep": {"variable": "epsilon", "values": [0.0, 0.02, 0.05, 0.1, 0.2, 0.3]},
        "n_trials": 10,
        "symbols_per_trial": 100,
    },
    "multipath": {
        "experiment": "cp_sweep",
        "n_fft": 64,
        "scheme": "QPSK",
        "impairments": {"profile": {"taps": [[0.8, 0.0], [0.0, 0.45], [-0.3, 0.1], [0.0, -0.2], [0.1, 0.05]]}},
        "sweep": {"variable": "cp_len", "values": [0, 1, 2, 3, 4, 6, 8, 16]},
        "n_trials": 10,
        "symbols_per_trial": 20,
    },
}


def config_schema() -> dict[str, Any]:
    """JSON schema of the scenario file."""
    return ScenarioConfig.model_json_schema()


def _key_line(text: str | None, loc: tuple) -> int | None:
    """1-based line of the deepest named key of ``loc`` in the JSON text."""
    if not text:
        return None
    names = [part for part in loc if isinstance(part, str)]
    if not names:
        return None
    lines = text.splitlines()
    start = 0
    line_no = None
    for name in names:
        needle = f'"{name}"'
        for i in range(start, len(lines)):
            if needle in lines[i]:
                line_no = i + 1
                start = i
                break
    return line_no


def _configuration_error(error: ValidationError, text: str | None = None) -> ConfigurationError:
    first = error.errors()[0]
    loc = tuple(first.get("loc", ()))
    parameter = ".".join(str(part) for part in loc) or None
    line = _key_line(text, loc)
    where = f" (line {line})" if line else ""
    message = f"Invalid configuration value for {parameter or 'config'}{where}: {first.get('msg')}"
    value = first.get("input")
    if isinstance(value, dict | list):
        value = None
    return ConfigurationError(message, parameter=parameter, value=value, line=line, cause=error)


def build_config(data: dict[str, Any], text: str | None = None) -> ScenarioConfig:
    """Validate a config mapping, converting pydantic errors to ConfigurationError."""
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise _configuration_error(e, text) from e


def _read_json(path: str | Path) -> tuple[dict[str, Any], str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}", parameter="config", cause=e) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Malformed JSON in {path}: {e.msg}", parameter="config", line=e.lineno) from e
    if not isinstance(data, dict):
        raise ConfigurationError("Config document must be a JSON object", parameter="config", line=1)
    return data, text


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a scenario file.

    Raises:
        ConfigurationError: If the file is unreadable, malformed or invalid

    """
    data, text = _read_json(path)
    return build_config(data, text)


def resolve_config(
    preset: str | None = None,
    config_path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    experiment: Experiment | None = None,
) -> ScenarioConfig:
    """Merge a preset, a config file and explicit overrides, in that order.

    Args:
        preset: Name of an entry in PRESETS
        config_path: JSON scenario file
        overrides: Top-level keys that win over both (e.g. seed, output)
        experiment: Experiment implied by the caller; fills a missing
            ``experiment`` key and must agree with an explicit one

    Raises:
        ConfigurationError: On unknown presets, conflicting experiments or invalid values

    """
    data: dict[str, Any] = {}
    text = None
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(
                f"Unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}", parameter="preset", value=preset
            )
        data.update(json.loads(json.dumps(PRESETS[preset])))
    if config_path is not None:
        file_data, text = _read_json(config_path)
        data.update(file_data)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if experiment is not None:
        given = data.setdefault("experiment", experiment.value)
        if given != experiment.value:
            raise ConfigurationError(
                f"Config describes a {given!r} experiment, but {experiment.value!r} was requested",
                parameter="experiment",
                value=given,
                line=_key_line(text, ("experiment",)),
            )
    return build_config(data, text)


def default_threads() -> int:
    """Worker threads from OFDM_PHY_THREADS, or 1."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if not raw:
        return 1
    try:
        threads = int(raw)
    except ValueError as e:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be an integer", parameter=THREADS_ENV_VAR, value=raw) from e
    if threads < 1:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be at least 1", parameter=THREADS_ENV_VAR, value=raw)
    return threads


class RunReport(BaseModel):
    """Result table of one run plus the metadata needed to replay it."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    experiment: Experiment
    config: ScenarioConfig
    columns: list[str]
    rows: list[list[float | int | str]]
    notes: list[str] = Field(default_factory=list)
    seed: int
    wall_time_s: float = 0.0
    library_version: str = __version__
    created_at: datetime = Field(default_factory=lambda: datetime.now(UTC))


def _run_trials(config: ScenarioConfig, func: Callable[[int], Any], threads: int, experiment: str) -> list[Any]:
    def guarded(trial: int) -> Any:
        try:
            return func(trial)
        except OfdmPhyError:
            raise
        except Exception as e:
            raise SimulationError(f"Trial {trial} failed", experiment=experiment, trial=trial, cause=e) from e

    return ordered_map(guarded, range(config.n_trials), threads)


def _trial_bits(config: ScenarioConfig, modem: OfdmModem, trial: int) -> np.ndarray:
    stream = RngStream(config.seed, trial).substream(STREAM_BITS)
    return stream.bits(config.symbols_per_trial * modem.bits_per_ofdm_symbol)


def _cell(value: Any) -> float | int | str:
    if isinstance(value, str):
        return value
    if isinstance(value, int | np.integer):
        return int(value)
    return float(value)


def _report(config: ScenarioConfig, columns: list[str], rows: list[list[Any]], notes: list[str], started: float):
    clean = [[_cell(v) for v in row] for row in rows]
    report = RunReport(
        experiment=config.experiment,
        config=config,
        columns=columns,
        rows=clean,
        notes=notes,
        seed=config.seed,
        wall_time_s=time.perf_counter() - started,
    )
    log_to_json(
        "Run finished",
        experiment=config.experiment.value,
        seed=config.seed,
        rows=len(clean),
        wall_time_s=round(report.wall_time_s, 3),
    )
    return report


def run_psd(config: ScenarioConfig, threads: int = 1) -> RunReport:
    """Average the Welch PSD of the transmitted stream over all trials.

    Columns: normalized frequency (cycles/sample) and power in dB relative to
    the in-band mean at the active subcarrier centers.
    """
    started = time.perf_counter()
    modem = config.modem()
    segment = config.segment_len
    overlap = config.psd_overlap if config.psd_overlap is not None else segment // 2

    def trial_psd(trial: int) -> np.ndarray:
        stream = modem.transmit(_trial_bits(config, modem, trial))
        _, pxx = welch_periodogram(stream, segment, overlap, config.psd_window)
        return pxx

    with LogContext("run_psd", "harness", seed=config.seed, trials=config.n_trials):
        spectra = _run_trials(config, trial_psd, threads, "psd")
        total = np.zeros_like(spectra[0])
        for pxx in spectra:
            total += pxx
        freqs = np.fft.fftshift(np.fft.fftfreq(segment))
        power_db = normalize_psd(freqs, total / len(spectra), config.plan)
    rows = [[f, p] for f, p in zip(freqs, power_db, strict=True)]
    notes = [
        "frequency is normalized to the sample rate (cycles/sample, Nyquist = 0.5)",
        "power_db is relative to the in-band mean at the active subcarrier centers",
        f"welch: segment_len={segment}, overlap={overlap}, window={config.psd_window}",
    ]
    return _report(config, ["frequency_cycles_per_sample", "power_db_rel"], rows, notes, started)


def run_papr_ccdf(config: ScenarioConfig, threads: int = 1) -> RunReport:
    """PAPR and per-sample power CCDFs for each configured scheme.

    Every scheme draws its symbols from the same streams; ``n_trials *
    symbols_per_trial`` OFDM symbols are measured per scheme.
    """
    started = time.perf_counter()
    schemes = config.schemes or [config.scheme]
    n_symbols = config.n_trials * config.symbols_per_trial
    thresholds = sorted(config.thresholds_db)
    rows: list[list[Any]] = []
    with LogContext("run_papr_ccdf", "harness", seed=config.seed, symbols=n_symbols):
        for scheme in schemes:
            for measure in (papr_ccdf, sample_power_ccdf):
                curve = measure(
                    scheme,
                    config.plan,
                    n_symbols,
                    thresholds,
                    RngStream(config.seed, 0),
                    threads=threads,
                    clip_ratio_db=config.clip_ratio_db,
                )
                rows.extend(
                    [curve.statistic, curve.label, t, p, curve.trials]
                    for t, p in zip(curve.thresholds, curve.exceed_prob, strict=True)
                )
    notes = [
        "papr: fraction of OFDM symbols whose PAPR (dB, N useful samples) exceeds the threshold",
        "sample_power: fraction of samples whose power over the symbol mean (dB) exceeds the threshold",
    ]
    if config.clip_ratio_db is not None:
        notes.append(f"symbols clipped at {config.clip_ratio_db} dB before measuring")
    columns = ["statistic", "scheme", "threshold_db", "exceed_prob", "trials"]
    return _report(config, columns, rows, notes, started)


def ebn0_to_snr_db(ebn0_db: float, scheme: SchemeName, plan: SubcarrierPlan, cp_len: int) -> float:
    """Per-sample SNR for a given Eb/N0, counting nulls and prefix overhead."""
    k = BITS_PER_SYMBOL[scheme]
    factor = k * (plan.n_active / plan.n_fft) * (plan.n_fft / (plan.n_fft + cp_len))
    return ebn0_db + 10.0 * math.log10(factor)


def run_ber_sweep(config: ScenarioConfig, threads: int = 1) -> RunReport:
    """Measured BER against Eb/N0, next to the AWGN theory curve.

    Without a sweep, a single row is produced at the configured ``snr_db``
    (``"off"`` meaning no noise, reported as Eb/N0 = inf).
    """
    started = time.perf_counter()
    modem = config.modem()
    if config.sweep is not None:
        ebn0_points = config.sweep.points
        snr_points: list[float | None] = [
            ebn0_to_snr_db(e, config.scheme, config.plan, config.cp_len) for e in ebn0_points
        ]
    else:
        snr = config.impairments.snr_db
        snr_points = [snr]
        if snr is None:
            ebn0_points = [math.inf]
        else:
            ebn0_points = [snr - ebn0_to_snr_db(0.0, config.scheme, config.plan, config.cp_len)]
    n_symbols = config.symbols_per_trial
    response = None
    if config.impairments.profile is not None:
        response = channel_frequency_response(config.impairments.profile, config.n_fft)

    def trial_errors(trial: int) -> list[int]:
        bits = _trial_bits(config, modem, trial)
        tx = modem.transmit(bits)
        errors = []
        for snr in snr_points:
            impairments = config.impairments.model_copy(update={"snr_db": snr})
            chain = ImpairmentChain(impairments, config.n_fft, RngStream(config.seed, trial))
            rx_bits = modem.receive_bits(chain.apply(tx), n_symbols, response)
            errors.append(int(np.count_nonzero(rx_bits != bits)))
        return errors

    with LogContext("run_ber_sweep", "harness", seed=config.seed, points=len(snr_points)):
        per_trial = _run_trials(config, trial_errors, threads, "ber_sweep")
    bits_per_point = config.n_trials * n_symbols * modem.bits_per_ofdm_symbol
    rows = []
    for i, (ebn0, snr) in enumerate(zip(ebn0_points, snr_points, strict=True)):
        errors = sum(t[i] for t in per_trial)
        theory = float(theoretical_ber(config.scheme, ebn0)) if math.isfinite(ebn0) else 0.0
        rows.append([ebn0, math.inf if snr is None else snr, errors / bits_per_point, errors, bits_per_point, theory])
    columns = ["ebn0_db", "snr_db", "ber", "bit_errors", "bits", "theory_ber"]
    return _report(config, columns, rows, [EBN0_NOTE], started)


def _isolated_symbol_rx(
    config: ScenarioConfig, x: np.ndarray, epsilon: float, stream: RngStream
) -> np.ndarray:
    """Impair each useful symbol on its own (origin 0) and return Y(k) per row."""
    imp = config.impairments
    y = apply_cfo(TimeSignal(samples=x), epsilon, config.n_fft)
    if imp.phase_noise_sigma > 0:
        y = apply_phase_noise(y, imp.phase_noise_sigma, stream.substream(STREAM_PHASE_NOISE))
    if imp.snr_db is not None:
        y = apply_awgn(y, imp.snr_db, stream.substream(STREAM_AWGN))
    return ofdm_demodulate(y).bins


def run_cfo_sweep(config: ScenarioConfig, threads: int = 1) -> RunReport:
    """Kernel-predicted versus measured SINR, EVM and BER under a frequency offset.

    Each symbol is offset in isolation with the phase origin at its first
    useful sample, which is the setting of the ICI kernel; multipath is not
    applied. Measured SINR removes the least-squares common gain.
    """
    started = time.perf_counter()
    if config.impairments.profile is not None:
        logger.warning("cfo_sweep ignores the multipath profile")
    modem = config.modem()
    plan = config.plan
    epsilons = config.sweep.points

    def trial_stats(trial: int) -> list[tuple[np.ndarray, np.ndarray, int]]:
        bits = _trial_bits(config, modem, trial)
        data = modem.symbols_from_bits(bits)
        x = ofdm_modulate(allocate(data, plan)).samples
        out = []
        for eps in epsilons:
            rx = deallocate(_isolated_symbol_rx(config, x, eps, RngStream(config.seed, trial)), plan)
            errors = int(np.count_nonzero(demap_symbols(rx, config.scheme) != bits))
            out.append((rx, data, errors))
        return out

    with LogContext("run_cfo_sweep", "harness", seed=config.seed, points=len(epsilons)):
        per_trial = _run_trials(config, trial_stats, threads, "cfo_sweep")
    bits_per_point = config.n_trials * config.symbols_per_trial * modem.bits_per_ofdm_symbol
    rows = []
    for i, eps in enumerate(epsilons):
        rx = np.concatenate([t[i][0] for t in per_trial])
        ref = np.concatenate([t[i][1] for t in per_trial])
        errors = sum(t[i][2] for t in per_trial)
        predicted = pooled_cfo_sinr(eps, config.n_fft, plan)
        measured = ls_sinr(rx, ref)
        rows.append(
            [eps, _db(predicted), _db(measured), evm(rx, ref), errors / bits_per_point, bits_per_point]
        )
    notes = [
        "predicted_sinr_db: ICI kernel ratio pooled over all active subcarriers, noise free",
        "measured_sinr_db: |g|^2 P / mean|Y - gX|^2 with the least-squares gain g over all active subcarriers",
    ]
    columns = ["epsilon_subcarriers", "predicted_sinr_db", "measured_sinr_db", "evm", "ber", "bits"]
    return _report(config, columns, rows, notes, started)


def _db(value: float) -> float:
    return math.inf if math.isinf(value) else 10.0 * math.log10(value)


def run_cp_sweep(config: ScenarioConfig, threads: int = 1) -> RunReport:
    """Post-equalization EVM and BER against the cyclic prefix length.

    Symbols stream back to back through the multipath channel (zero initial
    state); the receiver removes the prefix and divides by H_u(k).
    """
    started = time.perf_counter()
    profile = config.impairments.profile or ChannelProfile(taps=[1.0])
    impairments = config.impairments.model_copy(update={"profile": profile})
    response = channel_frequency_response(profile, config.n_fft)
    guards = [int(p) for p in config.sweep.points]
    modems = [config.modem(cp_len=g) for g in guards]
    n_symbols = config.symbols_per_trial

    def trial_stats(trial: int) -> list[tuple[float, float, int]]:
        out = []
        for modem in modems:
            bits = _trial_bits(config, modem, trial)
            data = modem.symbols_from_bits(bits)
            chain = ImpairmentChain(impairments, config.n_fft, RngStream(config.seed, trial))
            rx = modem.receive(chain.apply(modem.transmit_symbols(data)), n_symbols, response)
            errors = int(np.count_nonzero(demap_symbols(rx, config.scheme) != bits))
            out.append((float(np.sum(np.abs(rx - data) ** 2)), float(np.sum(np.abs(data) ** 2)), errors))
        return out

    with LogContext("run_cp_sweep", "harness", seed=config.seed, points=len(guards)):
        per_trial = _run_trials(config, trial_stats, threads, "cp_sweep")
    rows = []
    for i, (guard, modem) in enumerate(zip(guards, modems, strict=True)):
        err_energy = sum(t[i][0] for t in per_trial)
        ref_energy = sum(t[i][1] for t in per_trial)
        errors = sum(t[i][2] for t in per_trial)
        bits = config.n_trials * n_symbols * modem.bits_per_ofdm_symbol
        rows.append([guard, math.sqrt(err_energy / ref_energy), errors / bits, bits])
    notes = [
        f"channel max excess delay: {profile.max_excess_delay_samples} samples",
        "equalizer: Y(k) / H_u(k), H_u the unscaled DFT of the zero-padded taps",
    ]
    return _report(config, ["cp_len_samples", "evm", "ber", "bits"], rows, notes, started)


RUNNERS: dict[Experiment, Callable[[ScenarioConfig, int], RunReport]] = {
    Experiment.PSD: run_psd,
    Experiment.PAPR_CCDF: run_papr_ccdf,
    Experiment.BER_SWEEP: run_ber_sweep,
    Experiment.CFO_SWEEP: run_cfo_sweep,
    Experiment.CP_SWEEP: run_cp_sweep,
}


@log_function_call
def run_experiment(config: ScenarioConfig, threads: int = 1) -> RunReport:
    """Dispatch a scenario to its runner.

    Raises:
        SimulationError: If the run fails after validation

    """
    runner = RUNNERS[config.experiment]
    logger.info(f"Running {config.experiment.value} (seed={config.seed}, threads={threads})")
    try:
        return runner(config, threads)
    except (SimulationError, ConfigurationError):
        raise
    except (OfdmPhyError, ValueError, ArithmeticError) as e:
        raise SimulationError(
            f"{config.experiment.value} run failed", experiment=config.experiment.value, cause=e
        ) from e


@log_function_call
def replay_report(path: str | Path, threads: int = 1) -> RunReport:
    """Re-run the configuration echoed in a report sidecar.

    Raises:
        ConfigurationError: If the sidecar is unreadable or its config invalid

    """
    data, text = _read_json(path)
    if "config" not in data:
        raise ConfigurationError(f"{path} holds no config echo", parameter="config")
    return run_experiment(build_config(data["config"], text), threads)
