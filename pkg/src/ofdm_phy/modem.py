"""Bits to waveform and back.

The transmit chain is: coding hook -> constellation mapping -> subcarrier
allocation -> inverse transform -> cyclic prefix -> raised-cosine edge
window -> overlap-add -> optional low-pass transmit filter. The receive chain
undoes it: symbol framing -> prefix removal -> forward transform ->
(optional one-tap equalization) -> deallocation -> hard demapping -> coding hook.

Bit labels are most-significant-bit first. Square QAM takes the high half of
the label for the in-phase axis and the low half for quadrature; each axis is
a Gray-coded PAM where label 0 sits at the most positive level. BPSK maps
bit 0 to +1 and bit 1 to -1.
"""

import functools
from abc import ABC, abstractmethod
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy import signal

from .channel import equalize
from .exceptions import InvalidArgumentError
from .models import (
    ConstellationScheme,
    CyclicPrefixSpec,
    FilterSpec,
    OfdmSymbol,
    SchemeName,
    Spectrum,
    SubcarrierPlan,
    TimeSignal,
)
from .numerics import as_array, fft_array, ifft_array
from .utils import get_logger

logger = get_logger("modem")

BITS_PER_SYMBOL = {
    SchemeName.BPSK: 1,
    SchemeName.QPSK: 2,
    SchemeName.QAM16: 4,
    SchemeName.QAM64: 6,
}

# Symbols compared against the constellation per demapping pass
_DEMAP_CHUNK = 1 << 15


def _gray_decode(gray: np.ndarray) -> np.ndarray:
    """Position of each Gray-coded label along its axis."""
    binary = gray.copy()
    shift = gray >> 1
    while np.any(shift):
        binary ^= shift
        shift >>= 1
    return binary


def _pam_levels(bits: int) -> np.ndarray:
    """Gray-labeled PAM amplitudes indexed by label, label 0 at +(L-1)."""
    levels = 2**bits
    positions = _gray_decode(np.arange(levels))
    return ((levels - 1) - 2 * positions).astype(np.float64)


def _scheme_name(scheme: Any) -> SchemeName:
    if isinstance(scheme, ConstellationScheme):
        return scheme.name
    try:
        return SchemeName(scheme)
    except ValueError as e:
        allowed = ", ".join(s.value for s in SchemeName)
        raise InvalidArgumentError(f"Unknown scheme {scheme!r}; expected one of {allowed}", "scheme", scheme) from e


@functools.cache
def _build_constellation(name: SchemeName) -> ConstellationScheme:
    k = BITS_PER_SYMBOL[name]
    if name is SchemeName.BPSK:
        points = _pam_levels(1).astype(np.complex128)
    else:
        half = k // 2
        pam = _pam_levels(half)
        labels = np.arange(2**k)
        raw = pam[labels >> half] + 1j * pam[labels & ((1 << half) - 1)]
        side = 2**half
        points = raw / np.sqrt(2 * (side**2 - 1) / 3)
    logger.debug(f"Built {name.value} constellation with {points.size} points")
    return ConstellationScheme(name=name, bits_per_symbol=k, points=points)


def constellation(scheme: SchemeName | str | ConstellationScheme) -> ConstellationScheme:
    """Look up the Gray-labeled, unit-power constellation for a scheme.

    Args:
        scheme: Scheme name ("BPSK", "QPSK", "16QAM", "64QAM") or a scheme object

    Returns:
        The cached ConstellationScheme

    Raises:
        InvalidArgumentError: If the name is unknown

    """
    if isinstance(scheme, ConstellationScheme):
        return scheme
    return _build_constellation(_scheme_name(scheme))


def _as_bits(bits: Any) -> np.ndarray:
    arr = np.asarray(bits).ravel()
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise InvalidArgumentError("bits must contain only 0 and 1", parameter="bits")
    return arr.astype(np.uint8)


def map_bits(bits: Any, scheme: SchemeName | str | ConstellationScheme) -> np.ndarray:
    """Map a bit sequence onto constellation points.

    Args:
        bits: Sequence of 0/1 values, most significant bit of each label first
        scheme: Constellation to map onto

    Returns:
        complex128 array with one point per ``bits_per_symbol`` bits

    Raises:
        InvalidArgumentError: If the bit count is not a multiple of bits_per_symbol

    Examples:
        >>> map_bits([0, 1], "BPSK")
        array([ 1.+0.j, -1.+0.j])

    """
    const = constellation(scheme)
    k = const.bits_per_symbol
    arr = _as_bits(bits)
    if arr.size % k:
        raise InvalidArgumentError(
            f"{arr.size} bits cannot be grouped into {const.name.value} symbols of {k} bits",
            parameter="bits",
            value=arr.size,
        )
    weights = 1 << np.arange(k - 1, -1, -1)
    labels = arr.reshape(-1, k).astype(np.int64) @ weights
    return const.points[labels]


def demap_symbols(symbols: Any, scheme: SchemeName | str | ConstellationScheme) -> np.ndarray:
    """Hard-decision demapping to the nearest constellation point.

    Equidistant candidates resolve to the lowest label, so a QPSK symbol at
    exactly 0 decodes to bits ``00``. A 2-D input is read row by row.

    Returns:
        uint8 bit array, ``bits_per_symbol`` bits per input symbol
    """
    const = constellation(scheme)
    k = const.bits_per_symbol
    flat = np.asarray(symbols, dtype=np.complex128).ravel()
    labels = np.empty(flat.size, dtype=np.int64)
    for start in range(0, flat.size, _DEMAP_CHUNK):
        chunk = flat[start : start + _DEMAP_CHUNK]
        dist = np.abs(chunk[:, None] - const.points[None, :]) ** 2
        labels[start : start + _DEMAP_CHUNK] = np.argmin(dist, axis=1)
    shifts = np.arange(k - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def allocate(symbols: Any, plan: SubcarrierPlan) -> Spectrum:
    """Place data symbols on the active subcarriers, zeros elsewhere.

    Symbols fill ``plan.active_indices`` in ascending frequency order. A 2-D
    input allocates one OFDM symbol per row.

    Raises:
        InvalidArgumentError: If the symbol count differs from the active count

    """
    arr = np.asarray(symbols, dtype=np.complex128)
    if arr.ndim == 0 or arr.shape[-1] != plan.n_active:
        got = 0 if arr.ndim == 0 else arr.shape[-1]
        raise InvalidArgumentError(
            f"Plan has {plan.n_active} active subcarriers, got {got} symbols", parameter="symbols", value=got
        )
    spectrum = np.zeros((*arr.shape[:-1], plan.n_fft), dtype=np.complex128)
    spectrum[..., list(plan.active_indices)] = arr
    return Spectrum(bins=spectrum)


def deallocate(spectrum: Spectrum | Any, plan: SubcarrierPlan) -> np.ndarray:
    """Read the data symbols back from the active subcarriers; null bins are ignored."""
    bins = as_array(spectrum, "spectrum")
    if bins.shape[-1] != plan.n_fft:
        raise InvalidArgumentError(
            f"Spectrum has {bins.shape[-1]} bins, plan expects {plan.n_fft}", parameter="spectrum"
        )
    return np.array(bins[..., list(plan.active_indices)])


def ofdm_modulate(spectrum: Spectrum | Any) -> TimeSignal:
    """Synthesize the useful OFDM samples x(n) = IDFT{X(k)}, unscaled."""
    return TimeSignal(samples=ifft_array(as_array(spectrum, "spectrum")))


def ofdm_demodulate(samples: TimeSignal | Any) -> Spectrum:
    """Recover Y(k) from N useful samples with the 1/N forward transform."""
    return Spectrum(bins=fft_array(as_array(samples, "samples")))


def _cp_spec(spec: CyclicPrefixSpec | int, n_fft: int) -> CyclicPrefixSpec:
    if isinstance(spec, CyclicPrefixSpec):
        if spec.n_fft != n_fft:
            raise InvalidArgumentError(
                f"Cyclic prefix spec is for N={spec.n_fft}, signal has N={n_fft}", parameter="spec"
            )
        return spec
    try:
        return CyclicPrefixSpec(n_fft=n_fft, guard_len=spec)
    except ValidationError as e:
        raise InvalidArgumentError(
            f"Invalid cyclic prefix length {spec} for N={n_fft}", parameter="guard_len", value=spec, cause=e
        ) from e


def add_cyclic_prefix(x: TimeSignal | Any, spec: CyclicPrefixSpec | int) -> OfdmSymbol:
    """Prepend a copy of the last ``guard_len`` samples.

    Args:
        x: The N useful samples (or a batch, one symbol per row)
        spec: Cyclic prefix spec, or a bare guard length

    Returns:
        OfdmSymbol whose ``samples`` are ``x[N-Ng:] + x``

    Raises:
        InvalidArgumentError: If Ng >= N

    Examples:
        >>> add_cyclic_prefix([1, 2, 3, 4], 2).samples.real
        array([3., 4., 1., 2., 3., 4.])

    """
    useful = as_array(x, "x")
    cp = _cp_spec(spec, useful.shape[-1])
    n = cp.n_fft
    return OfdmSymbol(useful=useful, prefix=useful[..., n - cp.guard_len : n])


def remove_cyclic_prefix(samples: TimeSignal | Any, spec: CyclicPrefixSpec) -> TimeSignal:
    """Drop the guard interval, keeping the last N samples.

    Raises:
        InvalidArgumentError: If the input is not exactly N + Ng samples long

    """
    arr = as_array(samples, "samples")
    if arr.shape[-1] != spec.symbol_len:
        raise InvalidArgumentError(
            f"Expected {spec.symbol_len} samples (N={spec.n_fft} + Ng={spec.guard_len}), got {arr.shape[-1]}",
            parameter="samples",
            value=arr.shape[-1],
        )
    return TimeSignal(samples=arr[..., spec.guard_len :])


def raised_cosine_ramp(rolloff_len: int) -> np.ndarray:
    """Taper values w(i) = 0.5 * (1 - cos(pi * i / R)) for i = 0..R."""
    if rolloff_len == 0:
        return np.ones(1)
    i = np.arange(rolloff_len + 1)
    return 0.5 * (1.0 - np.cos(np.pi * i / rolloff_len))


def apply_edge_window(sym: OfdmSymbol, rolloff_len: int) -> TimeSignal:
    """Taper a CP-extended symbol inside its guard region.

    The first ``rolloff_len`` samples ramp up with the raised cosine, and a
    ``rolloff_len`` postfix copied from the head of the useful part ramps
    down. Consecutive symbols overlap-add by ``rolloff_len`` samples (see
    :func:`overlap_add`), so the N useful samples are never touched.

    Returns:
        Samples of length ``Ng + N + rolloff_len``

    Raises:
        InvalidArgumentError: If rolloff_len exceeds the prefix length

    """
    ng = sym.prefix.shape[-1]
    if rolloff_len < 0 or rolloff_len > ng:
        raise InvalidArgumentError(
            f"rolloff_len={rolloff_len} must lie in [0, Ng={ng}]", parameter="rolloff_len", value=rolloff_len
        )
    samples = sym.samples
    if rolloff_len == 0:
        return TimeSignal(samples=samples)
    ramp = raised_cosine_ramp(rolloff_len)[:-1]
    postfix = sym.useful[..., :rolloff_len] * (1.0 - ramp)
    head = samples[..., :rolloff_len] * ramp
    return TimeSignal(samples=np.concatenate([head, samples[..., rolloff_len:], postfix], axis=-1))


def overlap_add(windowed_symbols: TimeSignal | Any, rolloff_len: int) -> TimeSignal:
    """Concatenate windowed symbols, overlapping neighbours by ``rolloff_len`` samples.

    Args:
        windowed_symbols: One windowed symbol per row, each ``Ng + N + rolloff_len`` long
        rolloff_len: Overlap between consecutive symbols

    Returns:
        A single stream of ``n_sym * (Ng + N) + rolloff_len`` samples

    """
    arr = as_array(windowed_symbols, "windowed_symbols")
    if arr.ndim == 1:
        arr = arr[None, :]
    n_sym, length = arr.shape
    step = length - rolloff_len
    if step <= 0 or rolloff_len < 0:
        raise InvalidArgumentError("rolloff_len must be smaller than the symbol length", "rolloff_len", rolloff_len)
    out = np.zeros(n_sym * step + rolloff_len, dtype=np.complex128)
    out[: n_sym * step] = arr[:, :step].ravel()
    if rolloff_len:
        idx = (np.arange(1, n_sym + 1) * step)[:, None] + np.arange(rolloff_len)
        out[idx] += arr[:, step:]
    return TimeSignal(samples=out)


def _filter_spec(num_taps: int, cutoff: float) -> FilterSpec:
    try:
        return FilterSpec(num_taps=num_taps, cutoff=cutoff)
    except ValidationError as e:
        raise InvalidArgumentError(
            f"Invalid transmit filter (num_taps={num_taps}, cutoff={cutoff})",
            parameter="tx_filter",
            details={"num_taps": num_taps, "cutoff": cutoff},
            cause=e,
        ) from e


def design_tx_filter(num_taps: int, cutoff: float) -> np.ndarray:
    """Hamming-windowed sinc low-pass taps with unit DC gain.

    ``cutoff`` is in cycles/sample; 0.5 passes everything and yields a
    centered unit impulse.
    """
    spec = _filter_spec(num_taps, cutoff)
    if spec.cutoff >= 0.5:
        taps = np.zeros(spec.num_taps)
        taps[spec.group_delay] = 1.0
        return taps
    return signal.firwin(spec.num_taps, spec.cutoff, window="hamming", fs=1.0)


def tx_filter(
    samples: TimeSignal | Any, num_taps: int, cutoff: float, compensate_delay: bool = False
) -> TimeSignal:
    """Low-pass filter a sample stream by linear convolution.

    Args:
        samples: Input stream (or one stream per row)
        num_taps: Odd FIR length
        cutoff: Normalized cutoff in cycles/sample, 0 < cutoff <= 0.5
        compensate_delay: If True, drop the ``(num_taps - 1) / 2`` sample group
            delay and return as many samples as were given; otherwise return
            the full convolution

    Raises:
        InvalidArgumentError: If num_taps is even or cutoff is out of range

    """
    taps = design_tx_filter(num_taps, cutoff)
    arr = as_array(samples, "samples")
    kernel = taps if arr.ndim == 1 else taps[None, :]
    full = signal.convolve(arr, kernel, mode="full", method="direct")
    if compensate_delay:
        delay = (num_taps - 1) // 2
        full = full[..., delay : delay + arr.shape[-1]]
    origin = samples.sample_index_origin if isinstance(samples, TimeSignal) else 0
    return TimeSignal(samples=full, sample_index_origin=origin)


class BitCodec(ABC):
    """Coding/interleaving seam applied before mapping and after demapping."""

    @abstractmethod
    def encode(self, bits: np.ndarray) -> np.ndarray:
        """Turn information bits into channel bits."""

    @abstractmethod
    def decode(self, bits: np.ndarray) -> np.ndarray:
        """Turn hard-decided channel bits back into information bits."""

    def encoded_length(self, n_bits: int) -> int:
        """Channel bits produced for ``n_bits`` information bits."""
        return n_bits


class PassThroughCodec(BitCodec):
    """Identity codec: no FEC, no interleaving."""

    def encode(self, bits: np.ndarray) -> np.ndarray:
        """Return the bits unchanged."""
        return np.asarray(bits, dtype=np.uint8)

    def decode(self, bits: np.ndarray) -> np.ndarray:
        """Return the bits unchanged."""
        return np.asarray(bits, dtype=np.uint8)


class OfdmModem(BaseModel):
    """Transmitter and receiver for one OFDM numerology.

    Attributes:
        scheme: Constellation used on every active subcarrier
        plan: Active/null subcarrier layout
        cyclic_prefix: Guard interval
        rolloff_len: Raised-cosine roll-off inside the guard interval
        transmit_filter: Optional low-pass filter, applied with delay compensation
        codec: Coding hook

    Examples:
        >>> modem = OfdmModem(scheme="QPSK", plan=SubcarrierPlan(n_fft=64), cyclic_prefix=CyclicPrefixSpec(n_fft=64))
        >>> stream = modem.transmit(bits)
        >>> rx_bits = modem.receive_bits(stream, n_symbols=len(bits) // modem.bits_per_ofdm_symbol)

    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scheme: SchemeName
    plan: SubcarrierPlan
    cyclic_prefix: CyclicPrefixSpec
    rolloff_len: int = Field(default=0, ge=0)
    transmit_filter: FilterSpec | None = None
    codec: BitCodec = Field(default_factory=PassThroughCodec)

    @model_validator(mode="after")
    def check_numerology(self) -> "OfdmModem":
        """The prefix must match the plan and hold the roll-off."""
        if self.cyclic_prefix.n_fft != self.plan.n_fft:
            raise ValueError(f"cyclic prefix N={self.cyclic_prefix.n_fft} differs from plan N={self.plan.n_fft}")
        if self.rolloff_len > self.cyclic_prefix.guard_len:
            raise ValueError(f"rolloff_len={self.rolloff_len} exceeds guard_len={self.cyclic_prefix.guard_len}")
        return self

    @property
    def constellation(self) -> ConstellationScheme:
        """The scheme's constellation."""
        return constellation(self.scheme)

    @property
    def bits_per_ofdm_symbol(self) -> int:
        """Channel bits carried by one OFDM symbol."""
        return self.plan.n_active * BITS_PER_SYMBOL[self.scheme]

    @property
    def symbol_len(self) -> int:
        """Stream samples per OFDM symbol (N + Ng)."""
        return self.cyclic_prefix.symbol_len

    def stream_len(self, n_symbols: int) -> int:
        """Length of the stream produced for ``n_symbols`` OFDM symbols."""
        return n_symbols * self.symbol_len + self.rolloff_len

    def symbols_from_bits(self, bits: Any) -> np.ndarray:
        """Encode and map bits into one row of data symbols per OFDM symbol."""
        channel_bits = self.codec.encode(_as_bits(bits))
        if channel_bits.size % self.bits_per_ofdm_symbol:
            raise InvalidArgumentError(
                f"{channel_bits.size} channel bits do not fill whole OFDM symbols of {self.bits_per_ofdm_symbol} bits",
                parameter="bits",
                value=channel_bits.size,
            )
        return map_bits(channel_bits, self.scheme).reshape(-1, self.plan.n_active)

    def transmit_symbols(self, data_symbols: Any) -> TimeSignal:
        """Build the transmitted stream from data symbols (one OFDM symbol per row)."""
        rows = np.atleast_2d(np.asarray(data_symbols, dtype=np.complex128))
        useful = ofdm_modulate(allocate(rows, self.plan))
        windowed = apply_edge_window(add_cyclic_prefix(useful, self.cyclic_prefix), self.rolloff_len)
        stream = overlap_add(windowed, self.rolloff_len)
        if self.transmit_filter is not None:
            stream = tx_filter(
                stream, self.transmit_filter.num_taps, self.transmit_filter.cutoff, compensate_delay=True
            )
        return stream

    def transmit(self, bits: Any) -> TimeSignal:
        """Encode, map and modulate bits into a sample stream."""
        return self.transmit_symbols(self.symbols_from_bits(bits))

    def frame(self, stream: TimeSignal | Any, n_symbols: int) -> np.ndarray:
        """Cut ``n_symbols`` CP-extended symbols out of a stream, one per row."""
        arr = as_array(stream, "stream")
        needed = n_symbols * self.symbol_len
        if arr.ndim != 1 or arr.size < needed:
            raise InvalidArgumentError(
                f"Stream holds {arr.size} samples, {n_symbols} symbols need {needed}", parameter="stream"
            )
        return arr[:needed].reshape(n_symbols, self.symbol_len)

    def receive(
        self, stream: TimeSignal | Any, n_symbols: int, channel_response: np.ndarray | None = None
    ) -> np.ndarray:
        """Demodulate a stream back to data symbols.

        Args:
            stream: Received samples, symbol 0 starting at index 0
            n_symbols: OFDM symbols to recover
            channel_response: Unscaled channel DFT H_u(k); when given, each bin
                is divided by it (one-tap equalization)

        Returns:
            complex array of shape (n_symbols, n_active)

        """
        useful = remove_cyclic_prefix(self.frame(stream, n_symbols), self.cyclic_prefix)
        spectrum = ofdm_demodulate(useful)
        if channel_response is not None:
            spectrum = equalize(spectrum, channel_response)
        return deallocate(spectrum, self.plan)

    def receive_bits(
        self, stream: TimeSignal | Any, n_symbols: int, channel_response: np.ndarray | None = None
    ) -> np.ndarray:
        """Demodulate, hard-demap and decode a stream."""
        symbols = self.receive(stream, n_symbols, channel_response)
        return self.codec.decode(demap_symbols(symbols, self.scheme))
