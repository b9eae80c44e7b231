"""Channel impairments applied to a transmitted sample stream.

Impairments compose in a fixed order inside :class:`ImpairmentChain`:
multipath, carrier frequency offset, phase noise, then AWGN.
"""

import math
from typing import Any

import numpy as np
from pydantic import ValidationError
from scipy import signal

from .exceptions import InvalidArgumentError
from .models import ChannelProfile, ImpairmentConfig, Spectrum, TimeSignal
from .numerics import STREAM_AWGN, STREAM_PHASE_NOISE, RngStream, as_array, fft_array
from .utils import get_logger

logger = get_logger("channel")


def _profile(profile: ChannelProfile | Any) -> ChannelProfile:
    if isinstance(profile, ChannelProfile):
        return profile
    try:
        return ChannelProfile(taps=profile)
    except ValidationError as e:
        raise InvalidArgumentError("Invalid channel taps", parameter="taps", cause=e) from e


def _origin(x: Any) -> int:
    return x.sample_index_origin if isinstance(x, TimeSignal) else 0


class MultipathChannel:
    """Sample-spaced FIR channel that keeps its filter state between calls.

    Feeding a stream in pieces gives the same output as feeding it at once,
    so symbols can be pushed through one at a time.

    Examples:
        >>> chan = MultipathChannel(ChannelProfile(taps=[1.0, 0.5]))
        >>> first = chan.process(symbol_a)
        >>> second = chan.process(symbol_b)  # carries the tail of symbol_a

    """

    def __init__(self, profile: ChannelProfile | Any):
        self.profile = _profile(profile)
        self.reset()

    def reset(self) -> None:
        """Zero the delay line."""
        self._state = np.zeros(self.profile.max_excess_delay_samples, dtype=np.complex128)

    def process(self, x: TimeSignal | Any) -> TimeSignal:
        """Filter the next block of the stream."""
        arr = as_array(x, "x")
        if arr.ndim != 1:
            raise InvalidArgumentError("MultipathChannel processes one 1-D stream", parameter="x")
        taps = self.profile.taps
        if taps.size == 1:
            out = arr * taps[0]
        else:
            out, self._state = signal.lfilter(taps, [1.0], arr, zi=self._state)
        return TimeSignal(samples=out, sample_index_origin=_origin(x))


def apply_multipath(x: TimeSignal | Any, profile: ChannelProfile | Any) -> TimeSignal:
    """Linear convolution with the channel taps, truncated to the input length.

    The delay line starts at zero. A 2-D input filters each row on its own.

    Raises:
        InvalidArgumentError: If the taps are empty or all zero

    """
    prof = _profile(profile)
    arr = as_array(x, "x")
    out = signal.lfilter(prof.taps, [1.0], arr, axis=-1)
    return TimeSignal(samples=out, sample_index_origin=_origin(x))


def apply_cfo(x: TimeSignal | Any, epsilon: float, n_fft: int) -> TimeSignal:
    """Rotate by the carrier frequency offset: y(n) = x(n) * exp(j 2 pi eps n / N).

    ``n`` is the global sample index ``sample_index_origin + local index``,
    keeping the phase continuous from one block to the next. Each row of a
    2-D input is treated as a block starting at the same origin.

    Args:
        x: Input samples
        epsilon: Offset as a fraction of the subcarrier spacing
        n_fft: Transform length N

    Raises:
        InvalidArgumentError: If n_fft < 1

    """
    if n_fft < 1:
        raise InvalidArgumentError("n_fft must be at least 1", parameter="n_fft", value=n_fft)
    arr = as_array(x, "x")
    origin = _origin(x)
    n = origin + np.arange(arr.shape[-1])
    rotation = np.exp(2j * np.pi * epsilon * n / n_fft)
    return TimeSignal(samples=arr * rotation, sample_index_origin=origin)


def wiener_phase(
    shape: int | tuple[int, ...], sigma: float, stream: RngStream, initial_phase: float = 0.0
) -> np.ndarray:
    """Random-walk phase phi(n) = phi(n-1) + sigma * g(n) along the last axis, phi(-1) = ``initial_phase``."""
    if sigma < 0:
        raise InvalidArgumentError("phase noise sigma must be non-negative", parameter="sigma", value=sigma)
    increments = stream.standard_normal(shape)
    return initial_phase + sigma * np.cumsum(increments, axis=-1)


def apply_phase_noise(
    x: TimeSignal | Any, sigma: float, stream: RngStream, initial_phase: float = 0.0
) -> TimeSignal:
    """Multiply by exp(j phi(n)) with a Wiener phase process.

    Args:
        x: Input samples
        sigma: Standard deviation of the per-sample phase increment (radians)
        stream: Random source for the increments
        initial_phase: phi(-1), the phase reached at the end of the previous block

    Raises:
        InvalidArgumentError: If sigma is negative

    """
    arr = as_array(x, "x")
    phase = wiener_phase(arr.shape, sigma, stream, initial_phase)
    return TimeSignal(samples=arr * np.exp(1j * phase), sample_index_origin=_origin(x))


def apply_awgn(x: TimeSignal | Any, snr_db: float, stream: RngStream) -> TimeSignal:
    """Add complex white Gaussian noise at ``snr_db`` relative to the measured power.

    The noise density is ``N0 = P / 10^(snr_db / 10)`` where ``P`` is the mean
    power of ``x`` as given (prefix, windowing and nulls included); each of the
    real and imaginary parts has variance ``N0 / 2``.

    Raises:
        InvalidArgumentError: If the input has zero power or snr_db is not finite

    """
    arr = as_array(x, "x")
    if not math.isfinite(snr_db):
        raise InvalidArgumentError("snr_db must be finite", parameter="snr_db", value=snr_db)
    power = float(np.mean(np.abs(arr) ** 2))
    if power == 0.0:
        raise InvalidArgumentError("cannot reference SNR to a zero-power signal", parameter="x")
    n0 = power / 10.0 ** (snr_db / 10.0)
    noise = stream.complex_normal(arr.shape, scale=math.sqrt(n0 / 2.0))
    return TimeSignal(samples=arr + noise, sample_index_origin=_origin(x))


def channel_frequency_response(profile: ChannelProfile | Any, n_fft: int) -> np.ndarray:
    """Unscaled DFT H_u(k) of the taps zero-padded to N.

    With the package's 1/N forward transform, a prefix at least as long as the
    excess delay turns the channel into ``Y(k) = H_u(k) * X(k)``.

    Raises:
        InvalidArgumentError: If the channel is longer than N

    """
    prof = _profile(profile)
    if prof.taps.size > n_fft:
        raise InvalidArgumentError(
            f"{prof.taps.size} taps do not fit in N={n_fft}", parameter="profile", value=prof.taps.size
        )
    padded = np.zeros(n_fft, dtype=np.complex128)
    padded[: prof.taps.size] = prof.taps
    return n_fft * fft_array(padded)


def equalize(spectrum: Spectrum | Any, channel_response: Any) -> Spectrum:
    """One-tap equalizer: Y(k) / H_u(k) on every bin.

    Bins where the response is exactly zero carry no information and are set to 0.
    """
    bins = as_array(spectrum, "spectrum")
    response = np.asarray(channel_response, dtype=np.complex128)
    if response.shape[-1] != bins.shape[-1]:
        raise InvalidArgumentError(
            f"Channel response has {response.shape[-1]} bins, spectrum has {bins.shape[-1]}",
            parameter="channel_response",
        )
    dead = response == 0
    if np.any(dead):
        logger.warning(f"Channel response is zero on {int(np.count_nonzero(dead))} bins; zeroing them")
    safe = np.where(dead, 1.0, response)
    return Spectrum(bins=np.where(dead, 0.0, bins / safe))


class ImpairmentChain:
    """Applies an ImpairmentConfig to a stream: multipath, CFO, phase noise, AWGN.

    The chain owns its multipath delay line and its random substreams
    (``STREAM_AWGN`` and ``STREAM_PHASE_NOISE`` under the trial stream), so
    successive ``apply`` calls on a 1-D stream continue the same realization:
    the delay line and the Wiener phase carry over from one block to the next.
    CFO phase follows the ``sample_index_origin`` of each block.
    """

    def __init__(self, config: ImpairmentConfig, n_fft: int, stream: RngStream | None = None):
        self.config = config
        self.n_fft = n_fft
        stochastic = config.snr_db is not None or config.phase_noise_sigma > 0
        if stochastic and stream is None:
            raise InvalidArgumentError("noise impairments need an RngStream", parameter="stream")
        self._multipath = MultipathChannel(config.profile) if config.profile is not None else None
        self._awgn_stream = stream.substream(STREAM_AWGN) if stream is not None else None
        self._phase_stream = stream.substream(STREAM_PHASE_NOISE) if stream is not None else None
        self._phase = 0.0

    def reset(self) -> None:
        """Clear the multipath delay line and restart the phase walk at zero."""
        self._phase = 0.0
        if self._multipath is not None:
            self._multipath.reset()

    def apply(self, x: TimeSignal) -> TimeSignal:
        """Impair the next block of the stream."""
        y = x
        if self._multipath is not None:
            y = self._multipath.process(y)
        if self.config.epsilon != 0.0:
            y = apply_cfo(y, self.config.epsilon, self.n_fft)
        if self.config.phase_noise_sigma > 0:
            arr = as_array(y, "x")
            phase = wiener_phase(arr.shape, self.config.phase_noise_sigma, self._phase_stream, self._phase)
            if phase.ndim == 1:
                self._phase = float(phase[-1])
            y = TimeSignal(samples=arr * np.exp(1j * phase), sample_index_origin=_origin(y))
        if self.config.snr_db is not None:
            y = apply_awgn(y, self.config.snr_db, self._awgn_stream)
        return y
