"""PPG signal quality indices. Lower values mean a more reliable window.

Five indices: the standard deviation across heart cycles of per-cycle
skewness, kurtosis, and approximate entropy, plus Shannon entropy of the
amplitude histogram and normalized spectral entropy of the whole window.
All five are invariant to positive amplitude scaling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hrv import PeakTrain, PpgWindow

APEN_M = 2
APEN_R_FACTOR = 0.2
HISTOGRAM_BINS = 16
MIN_CYCLES = 3


@dataclass(frozen=True)
class HeartCycleSegmentation:
    """Trough-to-trough slices of the filtered signal, one per beat."""
    cycles: tuple

    @property
    def usable(self) -> bool:
        return len(self.cycles) >= MIN_CYCLES

    def __len__(self) -> int:
        return len(self.cycles)


@dataclass(frozen=True)
class QualityReport:
    skewness_var: float
    kurtosis_var: float
    apen_var: float
    shannon_entropy: float
    spectral_entropy: float
    usable: bool
    n_cycles: int = 0
    degenerate_cycles: int = 0

    def to_array(self) -> np.ndarray:
        return np.array([self.skewness_var, self.kurtosis_var, self.apen_var,
                         self.shannon_entropy, self.spectral_entropy])


INDEX_NAMES = ("skewness_var", "kurtosis_var", "apen_var",
               "shannon_entropy", "spectral_entropy")


def segment_cycles(filtered: PpgWindow, peaks: PeakTrain | None) -> HeartCycleSegmentation:
    """Cut the window into heart cycles at the signal minima between peaks."""
    if peaks is None or len(peaks) < 4:
        return HeartCycleSegmentation(())
    x = filtered.samples
    idx = peaks.peak_indices
    troughs = [int(np.argmin(x[a:b])) + a for a, b in zip(idx[:-1], idx[1:])]
    cycles = tuple(x[a:b] for a, b in zip(troughs[:-1], troughs[1:]) if b - a >= 2)
    return HeartCycleSegmentation(cycles)


def _skewness(x: np.ndarray) -> float:
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean((x - m) ** 3) / m2 ** 1.5)


def _kurtosis(x: np.ndarray) -> float:
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean((x - m) ** 4) / m2 ** 2 - 3.0)


def _apen(x: np.ndarray, m: int = APEN_M, r: float | None = None) -> float:
    """Approximate entropy with Chebyshev distance and self-matches included."""
    n = len(x)
    if n <= m + 1:
        return 0.0
    if r is None:
        r = APEN_R_FACTOR * float(x.std())
    if r <= 0.0:
        return 0.0

    def phi(mm: int) -> float:
        count = n - mm + 1
        emb = np.lib.stride_tricks.sliding_window_view(x, mm)
        dist = np.max(np.abs(emb[:, None, :] - emb[None, :, :]), axis=2)
        c = np.count_nonzero(dist <= r, axis=1) / count
        return float(np.mean(np.log(c)))

    return abs(phi(m) - phi(m + 1))


def _variation(values: list) -> float:
    if not values:
        return 0.0
    arr = np.asarray(values)
    # identical per-cycle statistics are exactly zero variation, not roundoff
    if arr.max() == arr.min():
        return 0.0
    return float(np.std(arr))


def skewness_variation(seg: HeartCycleSegmentation) -> float:
    return _variation([_skewness(c) for c in seg.cycles])


def kurtosis_variation(seg: HeartCycleSegmentation) -> float:
    return _variation([_kurtosis(c) for c in seg.cycles])


def apen_variation(seg: HeartCycleSegmentation) -> float:
    # cycles shorter than m+1 samples carry no embedding and are skipped
    return _variation([_apen(c) for c in seg.cycles if len(c) > APEN_M + 1])


def shannon_entropy(window: PpgWindow, bins: int = HISTOGRAM_BINS) -> float:
    """Entropy (nats) of the amplitude histogram over [min, max]."""
    x = window.samples
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / len(x)
    return float(-np.sum(p * np.log(p)))


def spectral_entropy(window: PpgWindow) -> float:
    """Entropy of the normalized periodogram, scaled into [0, 1]."""
    x = window.samples
    if len(x) < 64:
        raise ValueError(f"spectral entropy needs >= 64 samples, got {len(x)}")
    x = x - x.mean()
    power = np.abs(np.fft.rfft(x)[1:]) ** 2  # DC excluded
    total = power.sum()
    if total <= 0.0:
        return 0.0
    p = power / total
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)) / np.log(len(power)))


def assess(window: PpgWindow, peaks: PeakTrain | None,
           filtered: PpgWindow | None = None) -> QualityReport:
    """All five indices for one window.

    The entropies are computed on the raw window, where wander and artifact
    noise actually live; cycle segmentation runs on the band-pass-filtered
    signal (recomputed here unless provided) so troughs align with the
    detected peaks. Degenerate inputs produce an unusable report, never an
    exception: the entropies are always computable, the cycle-variation
    indices need a usable segmentation and default to 0 without one.
    """
    if filtered is None and peaks is not None:
        from .hrv import bandpass_filter
        filtered = bandpass_filter(window)
    seg = segment_cycles(filtered, peaks) if filtered is not None \
        else HeartCycleSegmentation(())
    degenerate = sum(1 for c in seg.cycles if c.std() == 0.0)
    if seg.usable:
        skew_v = skewness_variation(seg)
        kurt_v = kurtosis_variation(seg)
        apen_v = apen_variation(seg)
    else:
        skew_v = kurt_v = apen_v = 0.0
    return QualityReport(
        skewness_var=skew_v,
        kurtosis_var=kurt_v,
        apen_var=apen_v,
        shannon_entropy=shannon_entropy(window),
        spectral_entropy=spectral_entropy(window),
        usable=seg.usable,
        n_cycles=len(seg),
        degenerate_cycles=degenerate,
    )
