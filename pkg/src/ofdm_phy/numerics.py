"""Transforms and the deterministic random-number contract.

Transform scaling follows one convention across the whole package:

* forward: ``F(k) = (1/N) * sum_n f(n) * exp(-j*2*pi*k*n/N)``
* inverse: ``f(n) = sum_k F(k) * exp(+j*2*pi*k*n/N)`` (no scale factor)

The ICI kernel in :mod:`ofdm_phy.analysis` inherits its leading ``1/N`` from
the forward scale, so nothing in the package uses numpy's FFT scaling.
Under this convention Parseval reads ``sum |f|^2 == N * sum |F|^2``.

Random numbers come from :class:`RngStream`: numpy's PCG64 bit generator
seeded through ``SeedSequence(entropy=seed, spawn_key=(stream_id, ...))``.
Normal variates use numpy's ziggurat method (``Generator.standard_normal``).
Both are fixed for the lifetime of the package so seeded runs reproduce.
"""

from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any, TypeVar

import numpy as np

from .exceptions import InvalidArgumentError
from .models import Spectrum, TimeSignal
from .utils import get_logger

logger = get_logger("numerics")

T = TypeVar("T")
R = TypeVar("R")

# Substream ids under a trial stream
STREAM_BITS = 0
STREAM_AWGN = 1
STREAM_PHASE_NOISE = 2

_U64_MAX = 2**64 - 1

# Rows of the twiddle matrix materialized at once by the direct transform
_DIRECT_CHUNK_ELEMENTS = 1 << 22


def as_array(value: Any, name: str = "x") -> np.ndarray:
    """Return the complex sample array behind a signal, spectrum or array-like.

    Args:
        value: TimeSignal, Spectrum or anything numpy can turn into a complex array
        name: Argument name used in error messages

    Returns:
        complex128 array with at least one dimension

    Raises:
        InvalidArgumentError: If the input is empty

    """
    if isinstance(value, TimeSignal):
        return value.samples
    if isinstance(value, Spectrum):
        return value.bins
    arr = np.asarray(value, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.size == 0 or arr.shape[-1] == 0:
        raise InvalidArgumentError(f"{name} must not be empty", parameter=name)
    return arr


def is_power_of_two(n: int) -> bool:
    """Return True for 1, 2, 4, 8, ..."""
    return n >= 1 and (n & (n - 1)) == 0


def _direct(x: np.ndarray, sign: int) -> np.ndarray:
    """O(N^2) summation along the last axis with exp(sign*j*2*pi*k*n/N)."""
    n = x.shape[-1]
    twiddle = np.exp(sign * 2j * np.pi * np.arange(n) / n)
    idx = np.arange(n)
    out = np.empty(x.shape, dtype=np.complex128)
    rows = max(1, _DIRECT_CHUNK_ELEMENTS // n)
    for start in range(0, n, rows):
        k = idx[start : start + rows]
        kernel = twiddle[np.outer(k, idx) % n]
        out[..., start : start + rows] = x @ kernel.T
    return out


def _bit_reverse_indices(n: int) -> np.ndarray:
    """Bit-reversal permutation for a power-of-two ``n``."""
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.intp)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2(x: np.ndarray, sign: int) -> np.ndarray:
    """Iterative radix-2 decimation-in-time transform along the last axis.

    Every stage works on the whole batch at once: the array is viewed as
    blocks of ``2*m`` samples whose halves are the even and odd sub-transforms.
    """
    n = x.shape[-1]
    batch = x.shape[:-1]
    a = x[..., _bit_reverse_indices(n)]
    m = 1
    while m < n:
        twiddle = np.exp(sign * 1j * np.pi * np.arange(m) / m)
        blocks = a.reshape(*batch, n // (2 * m), 2, m)
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * twiddle
        a = np.stack((even + odd, even - odd), axis=-2)
        m *= 2
    return a.reshape(x.shape)


def dft(f: TimeSignal | Any) -> Spectrum:
    """Forward transform by direct summation, with the 1/N factor.

    Args:
        f: Time-domain samples; a 2-D input transforms each row

    Returns:
        Spectrum with ``F(k) = (1/N) sum_n f(n) exp(-j 2 pi k n / N)``

    Raises:
        InvalidArgumentError: If the input is empty

    Examples:
        >>> dft([1, 0, 0, 0]).bins
        array([0.25+0.j, 0.25+0.j, 0.25+0.j, 0.25+0.j])

    """
    x = as_array(f, "f")
    return Spectrum(bins=_direct(x, -1) / x.shape[-1])


def idft(F: Spectrum | Any) -> TimeSignal:  # noqa: N803
    """Inverse transform by direct summation, without scaling.

    Args:
        F: Frequency-domain bins; a 2-D input transforms each row

    Returns:
        TimeSignal with ``f(n) = sum_k F(k) exp(j 2 pi k n / N)``

    Raises:
        InvalidArgumentError: If the input is empty

    """
    x = as_array(F, "F")
    return TimeSignal(samples=_direct(x, 1))


def fft_array(x: np.ndarray) -> np.ndarray:
    """Array form of :func:`fft` used by the batched Monte-Carlo paths."""
    x = as_array(x, "f")
    n = x.shape[-1]
    if is_power_of_two(n):
        return _radix2(x, -1) / n
    logger.debug(f"fft: N={n} is not a power of two, using direct summation")
    return _direct(x, -1) / n


def ifft_array(x: np.ndarray) -> np.ndarray:
    """Array form of :func:`ifft`."""
    x = as_array(x, "F")
    n = x.shape[-1]
    if is_power_of_two(n):
        return _radix2(x, 1)
    logger.debug(f"ifft: N={n} is not a power of two, using direct summation")
    return _direct(x, 1)


def fft(f: TimeSignal | Any) -> Spectrum:
    """Fast forward transform; same contract as :func:`dft`.

    Power-of-two lengths use a radix-2 decimation-in-time FFT, any other
    length falls back to direct summation.
    """
    return Spectrum(bins=fft_array(as_array(f, "f")))


def ifft(F: Spectrum | Any) -> TimeSignal:  # noqa: N803
    """Fast inverse transform; same contract as :func:`idft`."""
    return TimeSignal(samples=ifft_array(as_array(F, "F")))


def _check_u64(value: int, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int | np.integer):
        raise InvalidArgumentError(f"{name} must be an integer", parameter=name, value=value)
    value = int(value)
    if not 0 <= value <= _U64_MAX:
        raise InvalidArgumentError(f"{name} must fit in 64 unsigned bits", parameter=name, value=value)
    return value


class RngStream:
    """Deterministic random source bound to a ``(seed, stream_id)`` pair.

    The generator is PCG64 seeded with ``SeedSequence(entropy=seed,
    spawn_key=(stream_id, *path))``; normals come from numpy's ziggurat
    sampler. Identical keys give identical sequences on every platform.

    A stream is single-owner: hand each trial or impairment its own stream
    (``RngStream(seed, trial)`` and ``substream``) instead of sharing one
    across threads.

    Examples:
        >>> trial = RngStream(seed=7, stream_id=3)
        >>> noise = trial.substream(STREAM_AWGN).standard_normal(4)

    """

    def __init__(self, seed: int, stream_id: int = 0, path: Sequence[int] = ()):
        self.seed = _check_u64(seed, "seed")
        self.stream_id = _check_u64(stream_id, "stream_id")
        self.path = tuple(_check_u64(p, "path") for p in path)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    @property
    def key(self) -> tuple[int, ...]:
        """Spawn key identifying this stream under its seed."""
        return (self.stream_id, *self.path)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self.key})"

    def substream(self, index: int) -> "RngStream":
        """Independent child stream; children with different indices never share draws."""
        return RngStream(self.seed, self.stream_id, (*self.path, index))

    def standard_normal(self, size: int | tuple[int, ...] | None = None) -> np.ndarray:
        """Standard normal variates (ziggurat)."""
        return self._generator.standard_normal(size)

    def complex_normal(self, size: int | tuple[int, ...], scale: float = 1.0) -> np.ndarray:
        """Complex samples whose real and imaginary parts are N(0, scale^2).

        The real parts are drawn first, then the imaginary parts.
        """
        shape = (size,) if isinstance(size, int) else tuple(size)
        z = self._generator.standard_normal((2, *shape))
        return scale * (z[0] + 1j * z[1])

    def integers(self, low: int, high: int, size: int | tuple[int, ...] | None = None) -> np.ndarray:
        """Uniform integers in ``[low, high)``."""
        return self._generator.integers(low, high, size=size)

    def bits(self, count: int) -> np.ndarray:
        """``count`` uniform bits as a uint8 array."""
        return self._generator.integers(0, 2, size=count, dtype=np.uint8)


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Apply ``func`` to every item, possibly on worker threads, keeping input order.

    Callers reduce the returned list in order, so results do not depend on
    the thread count as long as each item carries its own RngStream.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def gaussian_pair(stream: RngStream) -> tuple[float, float]:
    """Draw two independent standard-normal variates from ``stream``.

    Uses numpy's ziggurat sampler on a PCG64 generator; see :class:`RngStream`.
    """
    a, b = stream.standard_normal(2)
    return float(a), float(b)
