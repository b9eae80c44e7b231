"""Measurements: ICI prediction, PAPR and its CCDF, PSD, BER/EVM/SINR, clipping.

ICI kernel
----------
A carrier frequency offset ``eps`` (in subcarrier spacings) applied to one
isolated symbol gives

    Y(k) = sum_m X(m) * S(m - k + eps),    S(d) = (1/N) sum_n exp(j 2 pi n d / N)

with the time index ``n`` inside the exponent. The geometric sum closes to
``S(d) = (1/N) exp(j pi d (N-1)/N) sin(pi d) / sin(pi d / N)`` and is 1 at
``d = 0 (mod N)`` and 0 at any other integer. Over one period the kernel keeps
all energy: ``sum_{d=0}^{N-1} |S(d + eps)|^2 == 1``.
"""

import math
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import signal, stats

from .exceptions import InvalidArgumentError
from .modem import BITS_PER_SYMBOL, allocate, constellation, map_bits
from .models import CcdfCurve, PaprResult, PsdEstimate, SchemeName, SubcarrierPlan, TimeSignal
from .numerics import RngStream, as_array, ifft_array, ordered_map
from .utils import get_logger

logger = get_logger("analysis")

# OFDM symbols per Monte-Carlo block; block b draws from stream.substream(b)
CCDF_BLOCK_SYMBOLS = 1024

# Floor applied before converting PSD values to dB
_PSD_FLOOR = 1e-300


def ici_kernel(d: Any, n_fft: int) -> np.ndarray:
    """Closed-form S(d) evaluated element-wise over an array of distances."""
    if n_fft < 1:
        raise InvalidArgumentError("n_fft must be at least 1", parameter="n_fft", value=n_fft)
    d = np.asarray(d, dtype=np.float64)
    integer = d == np.round(d)
    out = np.where(np.mod(d, n_fft) == 0, 1.0 + 0j, 0.0 + 0j)
    frac = ~integer
    if np.any(frac):
        df = d[frac]
        out[frac] = (
            np.exp(1j * np.pi * df * (n_fft - 1) / n_fft) * np.sin(np.pi * df) / np.sin(np.pi * df / n_fft) / n_fft
        )
    return out


def ici_coefficient(d: float, n_fft: int, method: Literal["closed", "direct"] = "closed") -> complex:
    """ICI kernel value S(d) for a (possibly fractional) bin distance.

    Args:
        d: Bin distance m - k + eps
        n_fft: Transform length N
        method: "closed" for the geometric-sum form, "direct" for the N-term sum

    Returns:
        S(d); exactly 1 at d = 0 (mod N) and 0 at other integers with the closed form

    Examples:
        >>> ici_coefficient(0, 16)
        (1+0j)
        >>> abs(ici_coefficient(3, 16))
        0.0

    """
    if n_fft < 1:
        raise InvalidArgumentError("n_fft must be at least 1", parameter="n_fft", value=n_fft)
    if method == "direct":
        n = np.arange(n_fft)
        return complex(np.sum(np.exp(2j * np.pi * n * d / n_fft)) / n_fft)
    if method != "closed":
        raise InvalidArgumentError(f"Unknown method {method!r}", parameter="method", value=method)
    return complex(ici_kernel(d, n_fft))


class IciKernel(BaseModel):
    """The ICI kernel S(d) of an N-point numerology."""

    model_config = ConfigDict(frozen=True)

    n_fft: int = Field(ge=1)

    def __call__(self, d: Any) -> np.ndarray:
        return ici_kernel(d, self.n_fft)

    def matrix(self, epsilon: float) -> np.ndarray:
        """Mixing matrix M[k, m] = S(m - k + eps)."""
        idx = np.arange(self.n_fft)
        return self(idx[None, :] - idx[:, None] + epsilon)

    def energy(self, epsilon: float) -> float:
        """Sum of |S(d + eps)|^2 over one period of integer d."""
        return float(np.sum(np.abs(self(np.arange(self.n_fft) + epsilon)) ** 2))


def predict_cfo_output(spectrum: Any, epsilon: float) -> np.ndarray:
    """Receive spectrum predicted by the ICI kernel for an isolated symbol.

    Returns:
        Y with ``Y(k) = sum_m X(m) S(m - k + eps)``; a 2-D input predicts each row

    """
    x = as_array(spectrum, "spectrum")
    mixing = IciKernel(n_fft=x.shape[-1]).matrix(epsilon)
    return x @ mixing.T


def cfo_sinr(epsilon: float, n_fft: int, plan: SubcarrierPlan | None = None) -> float:
    """Noise-free SINR of the middle active subcarrier under a frequency offset.

    Signal power is ``|S(eps)|^2``; interference sums ``|S(m - k + eps)|^2``
    over the other active subcarriers m. Symbols have unit power.

    Returns:
        Linear SINR; ``math.inf`` when nothing interferes (eps = 0)

    Raises:
        InvalidArgumentError: If |eps| >= 0.5

    """
    if not abs(epsilon) < 0.5:
        raise InvalidArgumentError("|epsilon| must be below 0.5", parameter="epsilon", value=epsilon)
    plan = plan or SubcarrierPlan(n_fft=n_fft)
    if plan.n_fft != n_fft:
        raise InvalidArgumentError(f"plan N={plan.n_fft} differs from n_fft={n_fft}", parameter="plan")
    active = np.array(plan.active_indices)
    k = active[len(active) // 2]
    others = active[active != k]
    signal_power = abs(ici_coefficient(epsilon, n_fft)) ** 2
    interference = float(np.sum(np.abs(ici_kernel(others - k + epsilon, n_fft)) ** 2))
    if interference == 0.0:
        return math.inf
    return signal_power / interference


def pooled_cfo_sinr(epsilon: float, n_fft: int, plan: SubcarrierPlan | None = None) -> float:
    """Noise-free SINR pooled over every active subcarrier.

    ``|S(eps)|^2`` over the interference averaged across the active set.
    This is the ratio a measurement over all active subcarriers estimates.
    With nulls in the plan, subcarriers next to a null see less ICI, so it
    differs from :func:`cfo_sinr`; on a full plan the two agree.

    Raises:
        InvalidArgumentError: If |eps| >= 0.5

    """
    if not abs(epsilon) < 0.5:
        raise InvalidArgumentError("|epsilon| must be below 0.5", parameter="epsilon", value=epsilon)
    plan = plan or SubcarrierPlan(n_fft=n_fft)
    if plan.n_fft != n_fft:
        raise InvalidArgumentError(f"plan N={plan.n_fft} differs from n_fft={n_fft}", parameter="plan")
    active = np.array(plan.active_indices)
    power = np.abs(ici_kernel(active[None, :] - active[:, None] + epsilon, n_fft)) ** 2
    interference = float(np.mean(np.sum(np.where(np.eye(active.size, dtype=bool), 0.0, power), axis=1)))
    if interference == 0.0:
        return math.inf
    return abs(ici_coefficient(epsilon, n_fft)) ** 2 / interference


def papr_values(x: Any) -> np.ndarray:
    """Linear PAPR of each row (or of a single 1-D symbol)."""
    arr = as_array(x, "x")
    power = np.abs(arr) ** 2
    mean = power.mean(axis=-1)
    if np.any(mean == 0):
        raise InvalidArgumentError("PAPR of a zero-power symbol is undefined", parameter="x")
    return power.max(axis=-1) / mean


def papr(x: TimeSignal | Any) -> PaprResult:
    """PAPR of one symbol over its N useful samples (no prefix).

    Raises:
        InvalidArgumentError: If the symbol has zero power

    """
    arr = as_array(x, "x")
    if arr.ndim != 1:
        raise InvalidArgumentError("papr takes one symbol; use papr_values for a batch", parameter="x")
    power = np.abs(arr) ** 2
    mean = float(power.mean())
    if mean == 0.0:
        raise InvalidArgumentError("PAPR of a zero-power symbol is undefined", parameter="x")
    peak = float(power.max())
    ratio = peak / mean
    return PaprResult(papr_linear=ratio, papr_db=10.0 * math.log10(ratio), peak_power=peak, mean_power=mean)


def clip(x: TimeSignal | Any, clip_ratio_db: float) -> TimeSignal:
    """Soft amplitude clipping that keeps phase.

    Samples above ``A = sqrt(P_in * 10^(r/10))`` are scaled down to magnitude
    A, with ``P_in`` the mean power of the input (per row for a batch). The
    clipped peak power never exceeds ``P_in * 10^(r/10)``.
    """
    arr = as_array(x, "x")
    mean = np.mean(np.abs(arr) ** 2, axis=-1, keepdims=True)
    limit = np.sqrt(mean * 10.0 ** (clip_ratio_db / 10.0))
    magnitude = np.abs(arr)
    over = magnitude > limit
    scale = np.where(over, limit / np.where(over, magnitude, 1.0), 1.0)
    origin = x.sample_index_origin if isinstance(x, TimeSignal) else 0
    return TimeSignal(samples=arr * scale, sample_index_origin=origin)


def random_ofdm_symbols(scheme: Any, plan: SubcarrierPlan, n_symbols: int, stream: RngStream) -> np.ndarray:
    """Useful samples of ``n_symbols`` random OFDM symbols, one per row."""
    k = BITS_PER_SYMBOL[constellation(scheme).name]
    bits = stream.bits(n_symbols * plan.n_active * k)
    data = map_bits(bits, scheme).reshape(n_symbols, plan.n_active)
    return ifft_array(allocate(data, plan).bins)


def _blocks(n_symbols: int) -> list[tuple[int, int]]:
    return [
        (b, min(CCDF_BLOCK_SYMBOLS, n_symbols - b * CCDF_BLOCK_SYMBOLS))
        for b in range(math.ceil(n_symbols / CCDF_BLOCK_SYMBOLS))
    ]


def _ccdf(
    statistic_db,
    scheme: Any,
    plan: SubcarrierPlan,
    n_symbols: int,
    thresholds_db: list[float],
    stream: RngStream,
    threads: int,
    clip_ratio_db: float | None,
) -> tuple[list[float], np.ndarray, int]:
    if n_symbols < 1:
        raise InvalidArgumentError("n_symbols must be at least 1", parameter="n_symbols", value=n_symbols)
    thresholds = sorted(float(t) for t in thresholds_db)
    grid = np.array(thresholds)

    def run_block(block: tuple[int, int]) -> tuple[np.ndarray, int]:
        index, count = block
        x = random_ofdm_symbols(scheme, plan, count, stream.substream(index))
        if clip_ratio_db is not None:
            x = clip(x, clip_ratio_db).samples
        values = statistic_db(x).ravel()
        return (values[:, None] > grid[None, :]).sum(axis=0), values.size

    results = ordered_map(run_block, _blocks(n_symbols), threads)
    exceed = np.zeros(grid.size, dtype=np.int64)
    total = 0
    for counts, size in results:
        exceed += counts
        total += size
    return thresholds, exceed, total


def _papr_db(x: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(papr_values(x))


def _sample_power_db(x: np.ndarray) -> np.ndarray:
    power = np.abs(x) ** 2
    ratio = power / power.mean(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(ratio)


def papr_ccdf(
    scheme: SchemeName | str,
    plan: SubcarrierPlan,
    n_symbols: int,
    thresholds_db: list[float],
    stream: RngStream,
    threads: int = 1,
    clip_ratio_db: float | None = None,
) -> CcdfCurve:
    """Monte-Carlo CCDF of per-symbol PAPR.

    Symbols are drawn in blocks of ``CCDF_BLOCK_SYMBOLS``, block ``b`` from
    ``stream.substream(b)``, so the curve depends on the seed and not on the
    thread count.

    Args:
        scheme: Constellation on the active subcarriers
        plan: Subcarrier layout
        n_symbols: Number of OFDM symbols to draw
        thresholds_db: Thresholds x0 in dB, any order
        stream: Random source
        threads: Worker threads
        clip_ratio_db: Clip each symbol at this ratio before measuring

    Returns:
        CcdfCurve of P(PAPR_dB > x0) at ascending thresholds

    """
    thresholds, exceed, total = _ccdf(
        _papr_db, scheme, plan, n_symbols, thresholds_db, stream, threads, clip_ratio_db
    )
    return CcdfCurve(
        thresholds=thresholds,
        exceed_prob=(exceed / total).tolist(),
        trials=total,
        statistic="papr",
        label=constellation(scheme).name.value,
    )


def sample_power_ccdf(
    scheme: SchemeName | str,
    plan: SubcarrierPlan,
    n_symbols: int,
    thresholds_db: list[float],
    stream: RngStream,
    threads: int = 1,
    clip_ratio_db: float | None = None,
) -> CcdfCurve:
    """Monte-Carlo CCDF of per-sample power normalized to its symbol's mean power.

    Same drawing scheme as :func:`papr_ccdf`; every sample counts as a trial.
    """
    thresholds, exceed, total = _ccdf(
        _sample_power_db, scheme, plan, n_symbols, thresholds_db, stream, threads, clip_ratio_db
    )
    return CcdfCurve(
        thresholds=thresholds,
        exceed_prob=(exceed / total).tolist(),
        trials=total,
        statistic="sample_power",
        label=constellation(scheme).name.value,
    )


def ccdf_crossing(curve: CcdfCurve, probability: float) -> float:
    """Threshold (dB) where the curve falls to ``probability``, linearly interpolated in log10(p)."""
    thresholds = np.array(curve.thresholds)
    probs = np.array(curve.exceed_prob)
    below = np.nonzero(probs <= probability)[0]
    if below.size == 0 or below[0] == 0:
        raise InvalidArgumentError("curve does not cross the requested probability", "probability", probability)
    i = below[0]
    p0, p1 = probs[i - 1], probs[i]
    if p1 <= 0:
        return float(thresholds[i])
    t = (math.log10(p0) - math.log10(probability)) / (math.log10(p0) - math.log10(p1))
    return float(thresholds[i - 1] + t * (thresholds[i] - thresholds[i - 1]))


def welch_periodogram(
    x: TimeSignal | Any, segment_len: int, overlap: int, window: str = "hann"
) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided averaged periodogram, centered so frequency runs from -0.5 to 0.5.

    Returns:
        Tuple of (normalized frequencies in cycles/sample, linear PSD)

    """
    arr = as_array(x, "x")
    if arr.ndim != 1:
        raise InvalidArgumentError("PSD estimation takes one 1-D stream", parameter="x")
    if segment_len < 1 or arr.size < segment_len:
        raise InvalidArgumentError(
            f"Stream of {arr.size} samples is shorter than segment_len={segment_len}",
            parameter="segment_len",
            value=segment_len,
        )
    if not 0 <= overlap < segment_len:
        raise InvalidArgumentError("overlap must lie in [0, segment_len)", parameter="overlap", value=overlap)
    freqs, pxx = signal.welch(
        arr,
        fs=1.0,
        window=window,
        nperseg=segment_len,
        noverlap=overlap,
        detrend=False,
        return_onesided=False,
        scaling="density",
        average="mean",
    )
    return np.fft.fftshift(freqs), np.fft.fftshift(pxx)


def _nearest_bins(freqs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return np.abs(freqs[None, :] - targets[:, None]).argmin(axis=1)


def active_center_frequencies(plan: SubcarrierPlan) -> np.ndarray:
    """Normalized center frequency of every active subcarrier."""
    return np.array([plan.signed_frequency(k) / plan.n_fft for k in plan.active_indices])


def normalize_psd(freqs: np.ndarray, pxx: np.ndarray, plan: SubcarrierPlan | None = None) -> np.ndarray:
    """Convert a linear PSD to dB relative to its in-band mean.

    The in-band reference is the mean linear power at the bins nearest the
    active subcarrier centers; without a plan, the mean over all bins.
    """
    if plan is None:
        reference = float(np.mean(pxx))
    else:
        reference = float(np.mean(pxx[_nearest_bins(freqs, active_center_frequencies(plan))]))
    if reference <= 0:
        raise InvalidArgumentError("in-band PSD reference is zero", parameter="x")
    return 10.0 * np.log10(np.maximum(pxx / reference, _PSD_FLOOR))


def estimate_psd(
    x: TimeSignal | Any,
    segment_len: int | None = None,
    overlap: int | None = None,
    window: str = "hann",
    plan: SubcarrierPlan | None = None,
) -> PsdEstimate:
    """Welch PSD in dB relative to the in-band mean.

    Args:
        x: Transmitted stream
        segment_len: Samples per periodogram segment; defaults to 4 * N from ``plan``
        overlap: Overlapping samples; defaults to half a segment
        window: scipy window name
        plan: Subcarrier layout defining the in-band reference

    Raises:
        InvalidArgumentError: If the stream is shorter than one segment

    """
    if segment_len is None:
        if plan is None:
            raise InvalidArgumentError("segment_len is required without a plan", parameter="segment_len")
        segment_len = 4 * plan.n_fft
    if overlap is None:
        overlap = segment_len // 2
    freqs, pxx = welch_periodogram(x, segment_len, overlap, window)
    return PsdEstimate(
        freq_bins=freqs,
        power_db=normalize_psd(freqs, pxx, plan),
        segment_len=segment_len,
        overlap=overlap,
        window=window,
    )


def power_at(psd: PsdEstimate, freqs: Any) -> np.ndarray:
    """PSD values (dB) at the bins nearest the given normalized frequencies."""
    targets = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    return psd.power_db[_nearest_bins(psd.freq_bins, targets)]


def band_power_db(psd: PsdEstimate, f_low: float, f_high: float, two_sided: bool = True) -> float:
    """Mean power (dB, linear averaging) over f_low <= f <= f_high.

    With ``two_sided`` the band is matched against |f|.
    """
    f = np.abs(psd.freq_bins) if two_sided else psd.freq_bins
    mask = (f >= f_low) & (f <= f_high)
    if not np.any(mask):
        raise InvalidArgumentError(f"No PSD bins in [{f_low}, {f_high}]", parameter="band")
    linear = 10.0 ** (psd.power_db[mask] / 10.0)
    return float(10.0 * np.log10(np.mean(linear)))


def ber(tx_bits: Any, rx_bits: Any) -> float:
    """Fraction of mismatched bits.

    Raises:
        InvalidArgumentError: If the lengths differ or the streams are empty

    """
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.size != rx.size:
        raise InvalidArgumentError(f"Bit streams differ in length ({tx.size} vs {rx.size})", parameter="rx_bits")
    if tx.size == 0:
        raise InvalidArgumentError("BER of an empty stream is undefined", parameter="tx_bits")
    return float(np.count_nonzero(tx != rx) / tx.size)


def evm(rx_symbols: Any, ref_symbols: Any) -> float:
    """RMS error vector magnitude, sqrt(mean|rx - ref|^2 / mean|ref|^2).

    Raises:
        InvalidArgumentError: If the lengths differ or the reference has zero power

    """
    rx = np.asarray(rx_symbols, dtype=np.complex128).ravel()
    ref = np.asarray(ref_symbols, dtype=np.complex128).ravel()
    if rx.size != ref.size:
        raise InvalidArgumentError(f"Symbol streams differ in length ({rx.size} vs {ref.size})", "rx_symbols")
    ref_power = float(np.mean(np.abs(ref) ** 2)) if ref.size else 0.0
    if ref_power == 0.0:
        raise InvalidArgumentError("reference symbols have zero power", parameter="ref_symbols")
    return math.sqrt(float(np.mean(np.abs(rx - ref) ** 2)) / ref_power)


def ls_sinr(rx_symbols: Any, ref_symbols: Any) -> float:
    """SINR after removing the least-squares common gain g.

    ``g = <ref, rx> / <ref, ref>`` and SINR = |g|^2 P_ref / mean|rx - g ref|^2;
    ``math.inf`` when the residual is exactly zero.
    """
    rx = np.asarray(rx_symbols, dtype=np.complex128).ravel()
    ref = np.asarray(ref_symbols, dtype=np.complex128).ravel()
    if rx.size != ref.size or rx.size == 0:
        raise InvalidArgumentError("rx and ref must be non-empty and of equal length", parameter="rx_symbols")
    ref_energy = float(np.vdot(ref, ref).real)
    gain = np.vdot(ref, rx) / ref_energy
    residual = float(np.mean(np.abs(rx - gain * ref) ** 2))
    if residual == 0.0:
        return math.inf
    return abs(gain) ** 2 * (ref_energy / ref.size) / residual


def q_function(x: Any) -> Any:
    """Gaussian tail probability Q(x)."""
    return stats.norm.sf(x)


def theoretical_ber(scheme: SchemeName | str, ebn0_db: Any) -> Any:
    """AWGN bit error rate for Gray-mapped constellations.

    Exact for BPSK and QPSK, ``Q(sqrt(2 Eb/N0))``; square M-QAM uses the
    nearest-neighbour approximation ``(4/k)(1 - 1/sqrt(M)) Q(sqrt(3k Eb/N0 / (M-1)))``.
    """
    const = constellation(scheme)
    ebn0 = 10.0 ** (np.asarray(ebn0_db, dtype=np.float64) / 10.0)
    if const.name in (SchemeName.BPSK, SchemeName.QPSK):
        return q_function(np.sqrt(2.0 * ebn0))
    k = const.bits_per_symbol
    m = const.order
    return (4.0 / k) * (1.0 - 1.0 / math.sqrt(m)) * q_function(np.sqrt(3.0 * k * ebn0 / (m - 1)))


class GaussianityMoments(BaseModel):
    """Skewness and excess kurtosis of the real and imaginary parts of a signal."""

    model_config = ConfigDict(frozen=True)

    samples: int
    real_skewness: float
    real_excess_kurtosis: float
    imag_skewness: float
    imag_excess_kurtosis: float


def gaussianity_moments(x: TimeSignal | Any) -> GaussianityMoments:
    """Moment check of the samples' real and imaginary parts (all rows pooled)."""
    arr = as_array(x, "x").ravel()
    return GaussianityMoments(
        samples=arr.size,
        real_skewness=float(stats.skew(arr.real)),
        real_excess_kurtosis=float(stats.kurtosis(arr.real, fisher=True)),
        imag_skewness=float(stats.skew(arr.imag)),
        imag_excess_kurtosis=float(stats.kurtosis(arr.imag, fisher=True)),
    )


class MomentAccumulator:
    """Streaming skewness/kurtosis over batches too large to hold at once.

    Keeps raw power sums of the real and imaginary parts; the result matches
    :func:`gaussianity_moments` on the concatenated batches.
    """

    def __init__(self):
        self.count = 0
        self._sums = np.zeros((2, 4))

    def update(self, x: TimeSignal | Any) -> None:
        """Add a batch of complex samples."""
        arr = as_array(x, "x").ravel()
        parts = np.stack([arr.real, arr.imag])
        for p in range(1, 5):
            self._sums[:, p - 1] += np.sum(parts**p, axis=1)
        self.count += arr.size

    def _moments(self, part: int) -> tuple[float, float]:
        n = self.count
        s1, s2, s3, s4 = self._sums[part] / n
        m2 = s2 - s1**2
        m3 = s3 - 3 * s1 * s2 + 2 * s1**3
        m4 = s4 - 4 * s1 * s3 + 6 * s1**2 * s2 - 3 * s1**4
        return m3 / m2**1.5, m4 / m2**2 - 3.0

    def result(self) -> GaussianityMoments:
        """Moments of everything seen so far."""
        if self.count < 2:
            raise InvalidArgumentError("need at least two samples", parameter="count", value=self.count)
        real_skew, real_kurt = self._moments(0)
        imag_skew, imag_kurt = self._moments(1)
        return GaussianityMoments(
            samples=self.count,
            real_skewness=real_skew,
            real_excess_kurtosis=real_kurt,
            imag_skewness=imag_skew,
            imag_excess_kurtosis=imag_kurt,
        )
