"""Signal-processing kernels shared by the sensing pipelines.

Everything here operates on bare float64 series; callers pull series and
sample rates out of traces. Filtering is strictly causal (direct-form-II
transposed, zero initial state) because the downstream estimators are meant
to run on live streams; there is deliberately no zero-phase (forward-backward)
path in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import sosfilt

# Consistency constant relating MAD to the standard deviation of a Gaussian.
MAD_SCALE = 1.4826

_HAMPEL_CHUNK = 1 << 15


@dataclass(frozen=True)
class HampelConfig:
    n_sigmas: float = 3.0
    half_window: int = 100  # window is 2*half_window + 1 samples

    def __post_init__(self):
        if self.n_sigmas <= 0:
            raise ValueError("n_sigmas must be positive")
        if self.half_window < 1:
            raise ValueError("half_window must be >= 1")


def _shrunken_window_hampel(x: np.ndarray, out: np.ndarray, idx, cfg: HampelConfig) -> None:
    k = cfg.half_window
    n = len(x)
    for i in idx:
        w = x[max(0, i - k): min(n, i + k + 1)]
        med = np.median(w)
        mad = np.median(np.abs(w - med))
        if np.abs(x[i] - med) > cfg.n_sigmas * MAD_SCALE * mad:
            out[i] = med


def hampel_filter(x, cfg: HampelConfig = HampelConfig()) -> np.ndarray:
    """Median/MAD outlier rejection over a sliding window.

    x[i] is replaced by the window median m iff |x[i] - m| exceeds
    n_sigmas * 1.4826 * MAD, where MAD is the median absolute deviation
    within the window. With MAD == 0 any deviation from the median is
    replaced. Windows shrink one-sidedly at the edges. Replacement is
    non-recursive: every decision is made against the original samples.
    """
    x = np.asarray(x, dtype=np.float64)
    k = cfg.half_window
    win = 2 * k + 1
    n = len(x)
    if n < win:
        raise ValueError(f"series of {n} samples is shorter than the {win}-sample window")
    out = x.copy()

    # Interior: full windows, processed in chunks to bound the memory of the
    # windowed median (len x 201 working copies).
    centers = np.arange(k, n - k)
    for lo in range(0, len(centers), _HAMPEL_CHUNK):
        cs = centers[lo: lo + _HAMPEL_CHUNK]
        w = np.lib.stride_tricks.sliding_window_view(x[cs[0] - k: cs[-1] + k + 1], win)
        med = np.median(w, axis=1)
        mad = np.median(np.abs(w - med[:, None]), axis=1)
        bad = np.abs(x[cs] - med) > cfg.n_sigmas * MAD_SCALE * mad
        out[cs[bad]] = med[bad]

    _shrunken_window_hampel(x, out, range(0, k), cfg)
    _shrunken_window_hampel(x, out, range(n - k, n), cfg)
    return out


def hampel_refresh_edges(x: np.ndarray, full: np.ndarray, start: int, stop: int,
                         cfg: HampelConfig) -> np.ndarray:
    """Hampel output for the slice x[start:stop], given `full` = hampel(x).

    Interior samples of the slice see exactly the same window either way, so
    only the first/last half_window samples need recomputing with shrunken
    windows. Equivalent to hampel_filter(x[start:stop], cfg), cheaper when
    slices overlap heavily.
    """
    k = cfg.half_window
    seg = x[start:stop]
    n = len(seg)
    if n < 2 * k + 1:
        raise ValueError("slice shorter than the filter window")
    out = full[start:stop].copy()
    out[:k] = seg[:k]
    out[n - k:] = seg[n - k:]
    _shrunken_window_hampel(seg, out, range(0, k), cfg)
    _shrunken_window_hampel(seg, out, range(n - k, n), cfg)
    return out


# ---------------------------------------------------------------------------
# IIR Butterworth design (analog prototype -> bilinear transform -> biquads)
# ---------------------------------------------------------------------------

STABILITY_MARGIN = 1e-9


@dataclass
class IirFilter:
    """Second-order-section cascade with per-section state.

    sos rows are (b0, b1, b2, a1, a2) with a0 normalized to 1. `state` holds
    the two direct-form-II-transposed delay values per section; an instance
    is therefore confined to one stream at a time.
    """

    sos: np.ndarray
    kind: str = ""
    order: int = 0
    cutoff_hz: tuple[float, ...] = ()
    sample_rate_hz: float = 0.0
    state: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.sos = np.asarray(self.sos, dtype=np.float64)
        if self.sos.ndim != 2 or self.sos.shape[1] != 6:
            raise ValueError("sos must have shape (n_sections, 6)")
        if not np.allclose(self.sos[:, 3], 1.0, rtol=0, atol=0):
            raise ValueError("sections must be normalized to a0 == 1")
        for a1, a2 in self.sos[:, 4:6]:
            poles = np.roots([1.0, a1, a2])
            if np.any(np.abs(poles) >= 1.0 - STABILITY_MARGIN):
                raise ValueError(f"unstable section: pole magnitudes {np.abs(poles)}")
        if self.state is None:
            self.state = np.zeros((len(self.sos), 2))

    @property
    def n_sections(self) -> int:
        return len(self.sos)

    def reset(self) -> None:
        self.state[:] = 0.0

    def process(self, chunk) -> np.ndarray:
        """Streaming application; carries state across calls."""
        y, self.state = sosfilt(self.sos, np.asarray(chunk, dtype=np.float64),
                                zi=self.state)
        return y


def filter_forward(filt: IirFilter, x) -> np.ndarray:
    """Causal cascade from zero initial state; does not touch `filt.state`."""
    return sosfilt(filt.sos, np.asarray(x, dtype=np.float64))


def sos_response(sos: np.ndarray, freqs_hz, fs: float) -> np.ndarray:
    """Complex frequency response of an SOS cascade at the given frequencies."""
    w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / fs
    z1 = np.exp(-1j * w)
    z2 = z1 * z1
    h = np.ones_like(z1, dtype=np.complex128)
    for b0, b1, b2, _, a1, a2 in np.atleast_2d(sos):
        h *= (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2)
    return h


def _prototype_poles(n: int) -> np.ndarray:
    # Left-half-plane poles of the unit-cutoff analog Butterworth prototype.
    k = np.arange(n)
    return np.exp(1j * np.pi * (2 * k + n + 1) / (2 * n))


def _bilinear_poles(analog_poles: np.ndarray, fs: float) -> np.ndarray:
    c = 2.0 * fs
    return (c + analog_poles) / (c - analog_poles)


def _pair_conjugates(poles: np.ndarray) -> list[tuple[complex, complex]]:
    pairs = []
    used = np.zeros(len(poles), dtype=bool)
    order = np.lexsort((np.abs(poles.imag), poles.real))
    for i in order:
        if used[i]:
            continue
        used[i] = True
        if abs(poles[i].imag) > 1e-10:
            # find the conjugate partner
            cand = np.where(~used & (np.abs(poles - np.conj(poles[i])) < 1e-8))[0]
            if len(cand) == 0:
                raise ValueError("complex pole without conjugate partner")
            j = cand[0]
        else:
            cand = np.where(~used & (np.abs(poles.imag) <= 1e-10))[0]
            if len(cand) == 0:
                raise ValueError("odd number of real poles cannot form biquads")
            j = cand[0]
        used[j] = True
        pairs.append((poles[i], poles[j]))
    return pairs


def _sos_from_pairs(pole_pairs, zero_pairs, gain: float) -> np.ndarray:
    sos = []
    for idx, (pp, zp) in enumerate(zip(pole_pairs, zero_pairs)):
        b = np.real(np.poly(list(zp)))
        a = np.real(np.poly(list(pp)))
        if idx == 0:
            b = b * gain
        sos.append(np.concatenate([b, a]))
    return np.asarray(sos)


def butterworth_lowpass(order: int, cutoff_hz: float, fs: float) -> IirFilter:
    """Digital Butterworth lowpass; `order` is the total pole count.

    Designed as an analog prototype scaled to the prewarped cutoff and mapped
    by the bilinear transform, so the -3 dB point lands exactly on cutoff_hz.
    """
    _check_order(order)
    if not 0 < cutoff_hz < fs / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz outside (0, fs/2)")
    wc = 2.0 * fs * np.tan(np.pi * cutoff_hz / fs)
    analog = wc * _prototype_poles(order)
    zpoles = _bilinear_poles(analog, fs)
    pole_pairs = _pair_conjugates(zpoles)
    zero_pairs = [(-1.0, -1.0)] * len(pole_pairs)
    sos = _sos_from_pairs(pole_pairs, zero_pairs, 1.0)
    gain = 1.0 / abs(sos_response(sos, [0.0], fs)[0])
    sos[0, :3] *= gain
    return IirFilter(sos, kind="lowpass", order=order, cutoff_hz=(cutoff_hz,),
                     sample_rate_hz=fs)


def butterworth_bandpass(order: int, low_hz: float, high_hz: float, fs: float) -> IirFilter:
    """Digital Butterworth bandpass; `order` is the total pole count.

    The lowpass prototype of order/2 is frequency-transformed to a bandpass
    and mapped by the bilinear transform with prewarped edges, so both band
    edges sit exactly at -3 dB.
    """
    _check_order(order)
    if not 0 < low_hz < high_hz < fs / 2:
        raise ValueError(f"band ({low_hz}, {high_hz}) Hz invalid for fs={fs}")
    n = order // 2
    w1 = 2.0 * fs * np.tan(np.pi * low_hz / fs)
    w2 = 2.0 * fs * np.tan(np.pi * high_hz / fs)
    bw, w0sq = w2 - w1, w1 * w2
    analog = []
    for p in _prototype_poles(n):
        bp = bw * p
        disc = np.sqrt(bp * bp - 4.0 * w0sq)
        analog.extend([(bp + disc) / 2.0, (bp - disc) / 2.0])
    zpoles = _bilinear_poles(np.asarray(analog), fs)
    pole_pairs = _pair_conjugates(zpoles)
    # n zeros at z=+1 (from the n analog zeros at s=0) and n at z=-1 (from
    # the implicit zeros at infinity): one of each per biquad.
    zero_pairs = [(1.0, -1.0)] * len(pole_pairs)
    sos = _sos_from_pairs(pole_pairs, zero_pairs, 1.0)
    f_center = fs / np.pi * np.arctan(np.sqrt(w0sq) / (2.0 * fs))
    gain = 1.0 / abs(sos_response(sos, [f_center], fs)[0])
    sos[0, :3] *= gain
    return IirFilter(sos, kind="bandpass", order=order, cutoff_hz=(low_hz, high_hz),
                     sample_rate_hz=fs)


def _check_order(order: int) -> None:
    if order not in (2, 4, 6, 8):
        raise ValueError(f"supported orders are 2, 4, 6, 8; got {order}")


# ---------------------------------------------------------------------------
# Spectral estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Psd:
    """One-sided power spectral density.

    frequencies run uniformly from 0 to Nyquist; `power` is a density scaled
    so that sum(power) * df equals the mean square of the mean-removed,
    Hann-windowed signal (Parseval).
    """

    frequencies: np.ndarray
    power: np.ndarray

    @property
    def df(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def total_power(self) -> float:
        return float(np.sum(self.power) * self.df)


def next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1)).bit_length()


def periodogram(x, fs: float, nfft: int | None = None) -> Psd:
    """Hann-windowed, mean-removed, zero-padded one-sided periodogram."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("periodogram needs at least two samples")
    if nfft is None:
        nfft = next_pow2(n)
    if nfft < n:
        raise ValueError(f"nfft={nfft} shorter than the signal ({n})")
    y = (x - x.mean()) * np.hanning(n)
    spec = np.fft.rfft(y, nfft)
    power = np.abs(spec) ** 2
    # One-sided fold: interior bins carry the conjugate half too.
    weights = np.full(len(power), 2.0)
    weights[0] = 1.0
    if nfft % 2 == 0:
        weights[-1] = 1.0
    power *= weights / (n * fs)
    freqs = np.arange(len(power)) * (fs / nfft)
    return Psd(frequencies=freqs, power=power)


@dataclass(frozen=True)
class Spectrogram:
    """Per-window periodograms; power columns are time steps.

    Each window has its local mean removed before the transform, so columns
    carry only in-window fluctuation. times are window centers in seconds
    relative to the start of the series.
    """

    times: np.ndarray
    frequencies: np.ndarray
    power: np.ndarray  # shape (n_freqs, n_times)


def spectrogram(x, fs: float, window_s: float, hop_s: float,
                nfft: int | None = None) -> Spectrogram:
    x = np.asarray(x, dtype=np.float64)
    win_n = int(round(window_s * fs))
    hop_n = max(1, int(round(hop_s * fs)))
    if win_n < 2:
        raise ValueError("window too short")
    if len(x) < win_n:
        raise ValueError("series shorter than one window")
    if nfft is None:
        nfft = next_pow2(win_n)
    starts = np.arange(0, len(x) - win_n + 1, hop_n)
    cols = []
    freqs = None
    for s in starts:
        psd = periodogram(x[s: s + win_n], fs, nfft)
        freqs = psd.frequencies
        cols.append(psd.power)
    times = (starts + win_n / 2.0) / fs
    return Spectrogram(times=times, frequencies=freqs, power=np.column_stack(cols))


# ---------------------------------------------------------------------------
# Moving statistics
# ---------------------------------------------------------------------------


def moving_variance(x, window: int) -> np.ndarray:
    """Sample variance (ddof=1) over each full window; length n - window + 1.

    Element j covers x[j : j + window]; callers attribute it to the window
    end when aligning against the original series.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if window < 2:
        raise ValueError("window must be >= 2")
    if n < window:
        raise ValueError("series shorter than window")
    # Center for numerical stability; variance is shift-invariant.
    xc = x - x.mean()
    c1 = np.concatenate([[0.0], np.cumsum(xc)])
    c2 = np.concatenate([[0.0], np.cumsum(xc * xc)])
    s1 = c1[window:] - c1[:-window]
    s2 = c2[window:] - c2[:-window]
    var = (s2 - s1 * s1 / window) / (window - 1)
    return np.maximum(var, 0.0)


def moving_average(x, window: int) -> np.ndarray:
    """Centered moving mean with shrunken edge windows; length preserved."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if window < 1:
        raise ValueError("window must be >= 1")
    left = (window - 1) // 2
    right = window - 1 - left
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - left, 0)
    hi = np.minimum(idx + right + 1, n)
    return (c[hi] - c[lo]) / (hi - lo)
