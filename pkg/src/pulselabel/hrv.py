"""PPG signal chain: band-pass filter, smoothing, beat detection, HRV features.

The chain is deterministic: identical input windows produce bit-identical
feature vectors. Every stage is a pure function over immutable inputs and is
safe to call concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import ConfigError, QualityTooLow

# Physiological acceptance band for beat intervals (42-210 bpm).
BPM_MIN = 42.0
BPM_MAX = 210.0
NN_MIN_MS = 286.0
NN_MAX_MS = 1429.0

# Maximum relative deviation of an interval from the running median of the
# last MEDIAN_WINDOW accepted intervals before it is discarded as artifact.
NN_MAX_MEDIAN_DEVIATION = 0.30
MEDIAN_WINDOW = 5

BR_BAND_HZ = (0.1, 0.4)
BR_RESAMPLE_HZ = 4.0

FEATURE_NAMES = (
    "bpm", "ibi_ms", "sdnn_ms", "sdsd_ms", "rmssd_ms", "pnn20", "pnn50",
    "mad_ms", "sd1_ms", "sd2_ms", "s_area_ms2", "sd1_sd2_ratio", "br_hz",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class PpgWindow:
    """One PPG recording window at a fixed sampling rate.

    ``samples`` are raw sensor amplitudes (arbitrary units); ``t_start_ms``
    is the epoch timestamp of the first sample.
    """
    subject_id: str
    t_start_ms: int
    fs: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.fs <= 0:
            raise ConfigError(f"fs must be positive, got {self.fs}")
        if self.samples.ndim != 1:
            raise ConfigError("PPG samples must be a 1-d sequence")
        if len(self.samples) < self.fs * 30:
            raise ConfigError(
                f"window too short: {len(self.samples)} samples < 30 s at {self.fs} Hz")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigError("PPG samples contain non-finite values")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs

    def with_samples(self, samples: np.ndarray) -> "PpgWindow":
        return PpgWindow(self.subject_id, self.t_start_ms, self.fs, samples)


@dataclass(frozen=True)
class FilterSpec:
    """Band-pass corner frequencies and order for the cleaning filter."""
    order: int = 3
    low_cut_hz: float = 0.7
    high_cut_hz: float = 3.5

    def validate(self, fs: float) -> None:
        if self.order < 1:
            raise ConfigError(f"filter order must be >= 1, got {self.order}")
        if not (0.0 < self.low_cut_hz < self.high_cut_hz < fs / 2.0):
            raise ConfigError(
                f"cutoffs ({self.low_cut_hz}, {self.high_cut_hz}) Hz invalid for "
                f"fs = {fs} Hz (need 0 < low < high < Nyquist)")


@dataclass(frozen=True)
class PeakTrain:
    """Detected beat locations: integer sample indices plus refined times.

    ``peak_times_ms`` are relative to the window start and carry sub-sample
    precision from parabolic interpolation around each index.
    """
    peak_indices: np.ndarray
    peak_times_ms: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.peak_indices, dtype=int)
        t = np.asarray(self.peak_times_ms, dtype=float)
        object.__setattr__(self, "peak_indices", idx)
        object.__setattr__(self, "peak_times_ms", t)
        if len(idx) != len(t):
            raise ConfigError("peak indices and times must have equal length")
        if len(idx) > 1 and not np.all(np.diff(idx) > 0):
            raise ConfigError("peak indices must be strictly increasing")

    @classmethod
    def from_indices(cls, indices, fs: float) -> "PeakTrain":
        idx = np.asarray(indices, dtype=int)
        return cls(idx, idx / fs * 1000.0)

    def __len__(self) -> int:
        return len(self.peak_indices)


@dataclass(frozen=True)
class NnSeries:
    """Accepted inter-beat intervals in milliseconds."""
    intervals_ms: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "intervals_ms",
                           np.asarray(self.intervals_ms, dtype=float))

    def __len__(self) -> int:
        return len(self.intervals_ms)


@dataclass(frozen=True)
class FeatureVector:
    """The 13 HRV features extracted from one window."""
    bpm: float
    ibi_ms: float
    sdnn_ms: float
    sdsd_ms: float
    rmssd_ms: float
    pnn20: float
    pnn50: float
    mad_ms: float
    sd1_ms: float
    sd2_ms: float
    s_area_ms2: float
    sd1_sd2_ratio: float
    br_hz: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_FEATURES,):
            raise ConfigError(f"expected {N_FEATURES} features, got shape {values.shape}")
        return cls(*[float(v) for v in values])


def bandpass_filter(window: PpgWindow, spec: FilterSpec = FilterSpec()) -> PpgWindow:
    """Apply the Butterworth band-pass forward and backward (zero phase).

    Zero-phase application keeps peak times aligned with the raw signal; the
    effective amplitude gain is the squared single-pass magnitude response.
    """
    spec.validate(window.fs)
    sos = butter(spec.order, [spec.low_cut_hz, spec.high_cut_hz],
                 btype="bandpass", fs=window.fs, output="sos")
    return window.with_samples(sosfiltfilt(sos, window.samples))


def _sliding_mean(x: np.ndarray, length: int) -> np.ndarray:
    """Centered moving average with the kernel shrinking at the edges."""
    n = len(x)
    left = length // 2
    right = length - 1 - left
    idx = np.arange(n)
    starts = np.maximum(idx - left, 0)
    ends = np.minimum(idx + right + 1, n)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    return (csum[ends] - csum[starts]) / (ends - starts)


def moving_average(window: PpgWindow, length_s: float = 0.75) -> PpgWindow:
    """Uniform-kernel smoother of round(length_s * fs) samples, centered."""
    length = int(round(length_s * window.fs))
    if length < 1:
        raise ConfigError(f"moving average length {length_s}s is under one sample")
    return window.with_samples(_sliding_mean(window.samples, length))


def _regions_above(x: np.ndarray, threshold: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous index ranges [start, end) where x exceeds the threshold."""
    above = x > threshold
    if not above.any():
        return []
    edges = np.diff(above.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1) + 1
    if above[0]:
        starts = np.concatenate(([0], starts))
    if above[-1]:
        ends = np.concatenate((ends, [len(x)]))
    return list(zip(starts, ends))


def _refine_peak_times(x: np.ndarray, indices: np.ndarray, fs: float) -> np.ndarray:
    """Sub-sample peak times via a parabola through each peak and its neighbors."""
    times = indices.astype(float)
    for j, i in enumerate(indices):
        if 0 < i < len(x) - 1:
            a, b, c = x[i - 1], x[i], x[i + 1]
            denom = a - 2.0 * b + c
            if denom < 0:
                delta = 0.5 * (a - c) / denom
                times[j] = i + min(max(delta, -0.5), 0.5)
    return times / fs * 1000.0


def detect_peaks(filtered: PpgWindow, baseline: PpgWindow | None = None) -> PeakTrain:
    """Adaptive-threshold beat detector over a band-pass-filtered window.

    The moving average of the signal (0.75 s, the pipeline's smoothing stage)
    serves as the threshold baseline. It is raised by each offset in 5..300
    percent of the signal range; contiguous above-threshold regions each
    contribute their maximum as a candidate peak. Among offsets whose implied
    heart rate is physiological, the one minimizing the NN-interval standard
    deviation wins. Detecting against the smoothed baseline (rather than on a
    doubly smoothed signal) keeps beats near the smoother's spectral nulls
    recoverable at 20 Hz.
    """
    x = filtered.samples
    fs = filtered.fs
    amp_range = float(x.max() - x.min())
    if amp_range <= 0.0:
        raise QualityTooLow("flat signal, no peaks")
    if baseline is None:
        rolmean = _sliding_mean(x, int(round(0.75 * fs)))
    else:
        if len(baseline.samples) != len(x):
            raise ConfigError("baseline must match the window length")
        rolmean = baseline.samples

    # A plausible candidate train must cover the window, not just a sliver;
    # otherwise a 2-peak candidate wins on its trivially zero interval std.
    min_span = 0.5 * len(x)
    best_sd = np.inf
    best_idx = None
    for offset_pct in range(5, 301, 5):
        threshold = rolmean + amp_range * (offset_pct / 100.0)
        regions = _regions_above(x, threshold)
        if len(regions) < 2:
            continue
        idx = np.array([s + int(np.argmax(x[s:e])) for s, e in regions])
        if idx[-1] - idx[0] < min_span:
            continue
        nn_ms = np.diff(idx) / fs * 1000.0
        bpm = 60000.0 / nn_ms.mean()
        if not (BPM_MIN <= bpm <= BPM_MAX):
            continue
        sd = float(nn_ms.std())
        if sd < best_sd:
            best_sd = sd
            best_idx = idx
    if best_idx is None or len(best_idx) < 2:
        raise QualityTooLow("no threshold offset yields a plausible beat train")
    return PeakTrain(best_idx, _refine_peak_times(x, best_idx, fs))


def extract_nn(peaks: PeakTrain, fs: float) -> NnSeries:
    """Inter-beat intervals with artifact rejection.

    Motion artifacts create spurious or missed peaks, so intervals outside
    [286, 1429] ms or deviating more than 30% from the running median of the
    last 5 accepted intervals are dropped.
    """
    if len(peaks) < 2:
        raise QualityTooLow("need at least 2 peaks for intervals")
    raw = np.diff(peaks.peak_times_ms)
    in_bounds = raw[(raw >= NN_MIN_MS) & (raw <= NN_MAX_MS)]
    if len(in_bounds) == 0:
        raise QualityTooLow("no interval within physiological bounds")
    # Cold-start reference so one bad-but-in-bounds first interval cannot
    # poison the running median.
    reference = float(np.median(in_bounds[:MEDIAN_WINDOW]))
    accepted: list[float] = []
    for interval in raw:
        if not (NN_MIN_MS <= interval <= NN_MAX_MS):
            continue
        if abs(interval - reference) / reference > NN_MAX_MEDIAN_DEVIATION:
            continue
        accepted.append(float(interval))
        reference = float(np.median(accepted[-MEDIAN_WINDOW:]))
    if len(accepted) < 2:
        raise QualityTooLow(f"only {len(accepted)} intervals survive rejection")
    return NnSeries(np.array(accepted))


def _breathing_rate(intervals_ms: np.ndarray, strict: bool) -> float:
    """Frequency of the largest periodogram bin of the resampled NN tachogram.

    The tachogram is linearly interpolated to 4 Hz, mean-removed, and the
    maximum bin inside [0.1, 0.4] Hz is reported. Returns the 0.0 sentinel
    when the window is too short to resolve the band (unless strict).
    """
    beat_t = np.cumsum(intervals_ms) / 1000.0
    grid = np.arange(beat_t[0], beat_t[-1] + 1e-9, 1.0 / BR_RESAMPLE_HZ)
    if len(grid) >= 4:
        values = np.interp(grid, beat_t, intervals_ms)
        values = values - values.mean()
        freqs = np.fft.rfftfreq(len(grid), d=1.0 / BR_RESAMPLE_HZ)
        power = np.abs(np.fft.rfft(values)) ** 2
        in_band = (freqs >= BR_BAND_HZ[0]) & (freqs <= BR_BAND_HZ[1])
        if in_band.any():
            band_power = power[in_band]
            return float(freqs[in_band][int(np.argmax(band_power))])
    if strict:
        raise QualityTooLow("window too short to resolve breathing rate")
    return 0.0


def hrv_features(nn: NnSeries, strict_br: bool = False) -> FeatureVector:
    """The 13 HRV features of one window.

    All standard deviations are population (divide by n); pNNx uses a strict
    inequality; MAD is the median absolute deviation about the median. The
    Poincare axes come from the identities SD1 = SDSD/sqrt(2) and
    SD2 = sqrt(2*SDNN^2 - SDSD^2/2); S = pi*SD1*SD2.
    """
    iv = nn.intervals_ms
    if len(iv) < 4:
        raise QualityTooLow(f"need >= 4 NN intervals, got {len(iv)}")
    ibi = float(iv.mean())
    bpm = 60000.0 / ibi
    sdnn = float(iv.std())
    diffs = np.diff(iv)
    sdsd = float(diffs.std())
    rmssd = float(np.sqrt(np.mean(diffs ** 2)))
    pnn20 = float(np.mean(np.abs(diffs) > 20.0))
    pnn50 = float(np.mean(np.abs(diffs) > 50.0))
    mad = float(np.median(np.abs(iv - np.median(iv))))
    sd1 = sdsd / np.sqrt(2.0)
    sd2 = float(np.sqrt(max(2.0 * sdnn ** 2 - sdsd ** 2 / 2.0, 0.0)))
    s_area = np.pi * sd1 * sd2
    # Degenerate series collapse the long axis; 0 keeps the ratio defined.
    ratio = sd1 / sd2 if sd2 > 0.0 else 0.0
    br = _breathing_rate(iv, strict_br)
    return FeatureVector(bpm, ibi, sdnn, sdsd, rmssd, pnn20, pnn50, mad,
                         float(sd1), sd2, float(s_area), float(ratio), br)


def process_window(window: PpgWindow, spec: FilterSpec = FilterSpec(),
                   ma_length_s: float = 0.75,
                   strict_br: bool = False) -> FeatureVector:
    """Full chain: band-pass, smooth, detect peaks, reject artifacts, featurize.

    Raises QualityTooLow when the window yields no usable beat train; such
    windows remain stored upstream but never reach the density model.
    """
    filtered = bandpass_filter(window, spec)
    smoothed = moving_average(filtered, ma_length_s)
    peaks = detect_peaks(filtered, baseline=smoothed)
    nn = extract_nn(peaks, window.fs)
    return hrv_features(nn, strict_br=strict_br)
