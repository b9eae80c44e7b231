"""Pydantic models for the ofdm_phy package.

Signals are carried as complex128 numpy arrays inside frozen models. A signal
array is either 1-D (one stream or one symbol) or 2-D (a batch of symbols, one
per row); the last axis is always the sample or bin axis.
"""

import math
from enum import Enum
from functools import cached_property
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, WithJsonSchema, field_serializer, field_validator, model_validator


def _complex_array(value: Any, name: str, allow_empty: bool = False) -> np.ndarray:
    """Coerce ``value`` to a read-only complex128 array with 1 or 2 dimensions."""
    if isinstance(value, TimeSignal):
        value = value.samples
    elif isinstance(value, Spectrum):
        value = value.bins
    arr = np.array(value, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got {arr.ndim}-D")
    if not allow_empty and arr.shape[-1] < 1:
        raise ValueError(f"{name} must hold at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite (no NaN/Inf)")
    arr.setflags(write=False)
    return arr


class SchemeName(str, Enum):
    """Enum for the supported constellation schemes."""

    BPSK = "BPSK"
    QPSK = "QPSK"
    QAM16 = "16QAM"
    QAM64 = "64QAM"


class TimeSignal(BaseModel):
    """Time-domain complex samples x(n).

    ``sample_index_origin`` is the global index of the first sample; the CFO
    model uses it to keep the offset phase continuous across symbols.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    sample_index_origin: int = 0

    @field_validator("samples", mode="before")
    @classmethod
    def coerce_samples(cls, value: Any) -> np.ndarray:
        """Convert array-likes to a finite complex128 array."""
        return _complex_array(value, "samples")

    def __len__(self) -> int:
        return int(self.samples.shape[-1])

    def with_samples(self, samples: Any) -> "TimeSignal":
        """Return a signal with the same origin and new sample values."""
        return TimeSignal(samples=samples, sample_index_origin=self.sample_index_origin)


class Spectrum(BaseModel):
    """Frequency-domain symbols X(k); bin k holds the symbol on subcarrier k."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bins: np.ndarray

    @field_validator("bins", mode="before")
    @classmethod
    def coerce_bins(cls, value: Any) -> np.ndarray:
        """Convert array-likes to a finite complex128 array."""
        return _complex_array(value, "bins")

    @property
    def n_fft(self) -> int:
        """Transform length N."""
        return int(self.bins.shape[-1])

    def __len__(self) -> int:
        return self.n_fft


class ConstellationScheme(BaseModel):
    """A Gray-labeled, unit-average-power constellation.

    ``points[label]`` is the symbol for the integer ``label`` whose binary
    expansion (most significant bit first) is the bit label of the point.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: SchemeName
    bits_per_symbol: int = Field(ge=1)
    points: np.ndarray

    @field_validator("points", mode="before")
    @classmethod
    def coerce_points(cls, value: Any) -> np.ndarray:
        """Convert the point table to a complex128 array."""
        return _complex_array(value, "points")

    @model_validator(mode="after")
    def check_points(self) -> "ConstellationScheme":
        """Validate point count and unit average power."""
        if self.points.ndim != 1 or self.points.size != 2**self.bits_per_symbol:
            raise ValueError(f"{self.name.value} needs {2**self.bits_per_symbol} points, got {self.points.size}")
        power = float(np.mean(np.abs(self.points) ** 2))
        if abs(power - 1.0) > 1e-12:
            raise ValueError(f"{self.name.value} average power is {power!r}, expected 1.0")
        return self

    @property
    def order(self) -> int:
        """Number of constellation points M."""
        return int(self.points.size)


class SubcarrierPlan(BaseModel):
    """Active/null subcarrier layout.

    Bin convention: bin 0 is DC, bins ``1 .. ceil(N/2)-1`` are positive
    frequencies and bins ``ceil(N/2) .. N-1`` negative frequencies (for even N
    the Nyquist bin N/2 is on the negative side). Guard nulls are the
    ``guard_nulls_per_side`` bins on each side closest to Nyquist.

    For N=8, DC null and one guard per side the null bins are {0, 3, 4} and the
    active bins, in ascending frequency order, are (5, 6, 7, 1, 2).
    """

    model_config = ConfigDict(frozen=True)

    n_fft: int = Field(ge=1)
    null_dc: bool = False
    guard_nulls_per_side: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_layout(self) -> "SubcarrierPlan":
        """Reject layouts whose guards overrun a side or leave no active bin."""
        if self.guard_nulls_per_side > len(self.positive_bins):
            raise ValueError(
                f"guard_nulls_per_side={self.guard_nulls_per_side} exceeds the "
                f"{len(self.positive_bins)} positive-frequency bins of n_fft={self.n_fft}"
            )
        if self.n_active <= 0:
            raise ValueError(f"plan leaves no active subcarrier (n_fft={self.n_fft})")
        return self

    @property
    def positive_bins(self) -> range:
        """Bins carrying positive frequencies."""
        return range(1, (self.n_fft + 1) // 2)

    @property
    def negative_bins(self) -> range:
        """Bins carrying negative frequencies, most negative first."""
        return range((self.n_fft + 1) // 2, self.n_fft)

    @property
    def n_active(self) -> int:
        """Active subcarrier count N - DC null - 2 * guards."""
        return self.n_fft - (1 if self.null_dc else 0) - 2 * self.guard_nulls_per_side

    def signed_frequency(self, k: int) -> int:
        """Signed frequency index of bin ``k``."""
        return k if k < (self.n_fft + 1) // 2 else k - self.n_fft

    @cached_property
    def null_indices(self) -> tuple[int, ...]:
        """Null bins in ascending bin order."""
        g = self.guard_nulls_per_side
        nulls = set()
        if self.null_dc:
            nulls.add(0)
        if g:
            nulls.update(self.positive_bins[-g:])
            nulls.update(self.negative_bins[:g])
        return tuple(sorted(nulls))

    @cached_property
    def active_indices(self) -> tuple[int, ...]:
        """Active bins in ascending frequency order."""
        nulls = set(self.null_indices)
        active = [k for k in range(self.n_fft) if k not in nulls]
        return tuple(sorted(active, key=self.signed_frequency))

    @cached_property
    def active_mask(self) -> np.ndarray:
        """Boolean mask over bins, True on active subcarriers."""
        mask = np.zeros(self.n_fft, dtype=bool)
        mask[list(self.active_indices)] = True
        mask.setflags(write=False)
        return mask


class CyclicPrefixSpec(BaseModel):
    """Cyclic prefix of ``guard_len`` samples on an ``n_fft``-sample symbol."""

    model_config = ConfigDict(frozen=True)

    n_fft: int = Field(ge=1)
    guard_len: int = Field(default=0, ge=0)
    sample_period: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_guard(self) -> "CyclicPrefixSpec":
        """Require 0 <= Ng < N."""
        if self.guard_len >= self.n_fft:
            raise ValueError(f"guard_len={self.guard_len} must be smaller than n_fft={self.n_fft}")
        return self

    @property
    def guard_duration(self) -> float:
        """Guard duration T_g = Ng * sample period."""
        return self.guard_len * self.sample_period

    @property
    def symbol_len(self) -> int:
        """Samples per CP-extended symbol."""
        return self.n_fft + self.guard_len


class OfdmSymbol(BaseModel):
    """A CP-extended OFDM symbol (or a batch of them, one per row)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    useful: np.ndarray
    prefix: np.ndarray
    rolloff_len: int = Field(default=0, ge=0)

    @field_validator("useful", mode="before")
    @classmethod
    def coerce_useful(cls, value: Any) -> np.ndarray:
        """Convert the useful part to complex128."""
        return _complex_array(value, "useful")

    @field_validator("prefix", mode="before")
    @classmethod
    def coerce_prefix(cls, value: Any) -> np.ndarray:
        """Convert the prefix to complex128; an empty prefix is allowed."""
        return _complex_array(value, "prefix", allow_empty=True)

    @model_validator(mode="after")
    def check_prefix_copy(self) -> "OfdmSymbol":
        """The prefix must be an exact copy of the useful tail."""
        ng = self.prefix.shape[-1]
        n = self.useful.shape[-1]
        if ng >= n:
            raise ValueError(f"prefix length {ng} must be smaller than the useful length {n}")
        if self.prefix.shape[:-1] != self.useful.shape[:-1]:
            raise ValueError("prefix and useful batch shapes differ")
        if ng and not np.array_equal(self.prefix, self.useful[..., n - ng :]):
            raise ValueError("prefix is not a copy of the last guard_len useful samples")
        return self

    @property
    def samples(self) -> np.ndarray:
        """Prefix followed by the useful samples."""
        return np.concatenate([self.prefix, self.useful], axis=-1)

    def to_signal(self, sample_index_origin: int = 0) -> TimeSignal:
        """The CP-extended samples as a TimeSignal."""
        return TimeSignal(samples=self.samples, sample_index_origin=sample_index_origin)


class FilterSpec(BaseModel):
    """Hamming-windowed sinc low-pass transmit filter."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_taps: int = Field(default=63, ge=1)
    cutoff: float = Field(default=0.45, gt=0.0, le=0.5)

    @field_validator("num_taps")
    @classmethod
    def check_odd(cls, value: int) -> int:
        """Linear phase with an integer group delay needs an odd tap count."""
        if value % 2 == 0:
            raise ValueError(f"num_taps must be odd, got {value}")
        return value

    @property
    def group_delay(self) -> int:
        """Filter delay (num_taps - 1) / 2 in samples."""
        return (self.num_taps - 1) // 2


# Taps in scenario files: numbers or [re, im] pairs
TAPS_JSON_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "items": {
        "anyOf": [
            {"type": "number"},
            {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        ]
    },
}


class ChannelProfile(BaseModel):
    """Sample-spaced multipath taps; tap 0 is the direct path.

    In JSON the taps are written as numbers or ``[re, im]`` pairs.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    taps: Annotated[np.ndarray, WithJsonSchema(TAPS_JSON_SCHEMA)]

    @field_validator("taps", mode="before")
    @classmethod
    def coerce_taps(cls, value: Any) -> np.ndarray:
        """Accept complex numbers, reals or [re, im] pairs."""
        if isinstance(value, list | tuple) and value and all(isinstance(t, list | tuple) for t in value):
            if any(len(t) != 2 for t in value):
                raise ValueError("taps given as pairs must be [re, im]")
            value = [complex(t[0], t[1]) for t in value]
        arr = _complex_array(value, "taps")
        if arr.ndim != 1:
            raise ValueError("taps must be a flat list")
        if not np.any(arr != 0):
            raise ValueError("taps must not be all zero")
        return arr

    @field_serializer("taps")
    def serialize_taps(self, taps: np.ndarray) -> list[list[float]]:
        """Write taps as [re, im] pairs."""
        return [[float(t.real), float(t.imag)] for t in taps]

    def __eq__(self, other: object) -> bool:
        """Taps compare element-wise."""
        if not isinstance(other, ChannelProfile):
            return NotImplemented
        return np.array_equal(self.taps, other.taps)

    __hash__ = None

    @property
    def max_excess_delay_samples(self) -> int:
        """Maximum excess delay tau_max in samples (len(taps) - 1)."""
        return int(self.taps.size - 1)


class ImpairmentConfig(BaseModel):
    """Channel impairments applied to the transmitted stream.

    ``snr_db`` may be ``"off"`` (no noise) and ``profile`` may be
    ``"identity"`` (no multipath); both are stored as ``None``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    epsilon: float = 0.0
    phase_noise_sigma: float = Field(default=0.0, ge=0.0)
    snr_db: float | None = None
    profile: ChannelProfile | None = None

    @field_validator("snr_db", mode="before")
    @classmethod
    def parse_snr(cls, value: Any) -> Any:
        """Map the "off" keyword to None."""
        if isinstance(value, str) and value.strip().lower() == "off":
            return None
        return value

    @field_validator("profile", mode="before")
    @classmethod
    def parse_profile(cls, value: Any) -> Any:
        """Map the "identity" keyword to None."""
        if isinstance(value, str) and value.strip().lower() == "identity":
            return None
        return value

    @field_validator("epsilon", "snr_db")
    @classmethod
    def check_finite(cls, value: float | None) -> float | None:
        """Reject NaN and infinities."""
        if value is not None and not math.isfinite(value):
            raise ValueError("must be finite")
        return value


class PaprResult(BaseModel):
    """Discrete-time PAPR of one OFDM symbol."""

    model_config = ConfigDict(frozen=True)

    papr_linear: float
    papr_db: float
    peak_power: float
    mean_power: float = Field(gt=0.0)

    @model_validator(mode="after")
    def check_ratio(self) -> "PaprResult":
        """PAPR must equal peak/mean and be at least one."""
        ratio = self.peak_power / self.mean_power
        if abs(self.papr_linear - ratio) > 1e-12 * max(1.0, ratio):
            raise ValueError("papr_linear must equal peak_power / mean_power")
        if self.papr_linear < 1.0 - 1e-12:
            raise ValueError(f"papr_linear={self.papr_linear} is below 1")
        return self


class CcdfCurve(BaseModel):
    """Exceedance probability of a statistic versus threshold (dB)."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    thresholds: list[float]
    exceed_prob: list[float]
    trials: int = Field(ge=1)
    statistic: Literal["papr", "sample_power"] = "papr"
    label: str | None = None

    @model_validator(mode="after")
    def check_curve(self) -> "CcdfCurve":
        """Thresholds ascend, probabilities lie in [0, 1] and never increase."""
        if len(self.thresholds) != len(self.exceed_prob):
            raise ValueError("thresholds and exceed_prob differ in length")
        if any(b < a for a, b in zip(self.thresholds, self.thresholds[1:], strict=False)):
            raise ValueError("thresholds must be ascending")
        if any(not 0.0 <= p <= 1.0 for p in self.exceed_prob):
            raise ValueError("exceed_prob values must lie in [0, 1]")
        if any(b > a for a, b in zip(self.exceed_prob, self.exceed_prob[1:], strict=False)):
            raise ValueError("exceed_prob must be non-increasing")
        return self


class PsdEstimate(BaseModel):
    """Averaged-periodogram PSD in relative dB over normalized frequency."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    freq_bins: np.ndarray
    power_db: np.ndarray
    segment_len: int = Field(ge=1)
    overlap: int = Field(ge=0)
    window: str

    @field_validator("freq_bins", "power_db", mode="before")
    @classmethod
    def coerce_real(cls, value: Any) -> np.ndarray:
        """Convert to a finite read-only float array."""
        arr = np.array(value, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("PSD vectors must be 1-D")
        if not np.all(np.isfinite(arr)):
            raise ValueError("PSD values must be finite")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_lengths(self) -> "PsdEstimate":
        """Frequency and power vectors must pair up."""
        if self.freq_bins.size != self.power_db.size:
            raise ValueError("freq_bins and power_db differ in length")
        return self
