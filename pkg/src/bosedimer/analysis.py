"""Signal analysis for sampled trajectories.

Fourier spectra with peak detection and comb-spacing statistics, shared by
the mean-field, master-equation, and stochastic layers. Spectra are one-sided
with root-mean-square folding so Parseval's identity holds bin by bin.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.signal import find_peaks

__all__ = ["FourierSpectrum", "fourier_spectrum", "detect_peaks",
           "dominant_frequency", "comb_spacing"]

DEFAULT_REL_HEIGHT = 0.02


@dataclasses.dataclass(frozen=True)
class FourierSpectrum:
    """One-sided magnitude spectrum with detected peaks.

    frequencies are angular, uniformly spaced from zero; peaks is a list of
    (frequency, magnitude) pairs refined by parabolic interpolation.
    """

    frequencies: np.ndarray
    magnitudes: np.ndarray
    peaks: list[tuple[float, float]]

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        m = np.asarray(self.magnitudes, dtype=float)
        if f.shape != m.shape or f.ndim != 1:
            raise ValueError("frequencies and magnitudes must be 1d arrays of equal length")
        if f[0] < 0 or (f.size > 1 and not np.allclose(np.diff(f), f[1] - f[0], rtol=1e-9)):
            raise ValueError("frequency axis must be nonnegative and uniform")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "magnitudes", m)


def fourier_spectrum(series, dt: float, window: str | None = None) -> FourierSpectrum:
    """One-sided spectrum of a (complex) time series sampled at interval dt.

    The series mean is removed before transforming so the DC line does not
    mask low-frequency structure. Positive and negative frequency content is
    folded as M_j^2 = (|X_j|^2 + |X_{N-j}|^2)/N, which preserves the total
    power of the mean-subtracted series in the windowless case.
    """
    x = np.asarray(series, dtype=complex).ravel()
    if x.size < 64:
        raise ValueError(f"need at least 64 samples, got {x.size}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = x.size
    x = x - x.mean()
    if window is not None:
        if str(window).lower() != "hann":
            raise ValueError(f"unknown window {window!r}")
        x = x * np.hanning(n)
    xf = np.fft.fft(x)
    power = np.abs(xf) ** 2
    n_half = n // 2
    folded = power[: n_half + 1].copy()
    folded[1:] += power[-1 : -(n_half + 1) : -1][: n_half]
    if n % 2 == 0:
        folded[n_half] = power[n_half]  # Nyquist bin has no partner
    mags = np.sqrt(folded / n)
    freqs = 2.0 * np.pi * np.arange(n_half + 1) / (n * dt)
    out = FourierSpectrum(freqs, mags, [])
    object.__setattr__(out, "peaks", detect_peaks(out))
    return out


def detect_peaks(spec: FourierSpectrum, rel_height: float = DEFAULT_REL_HEIGHT):
    """Local maxima above rel_height of the global maximum.

    Peak frequencies are refined by fitting a parabola through the three
    bins around each maximum.
    """
    if not 0 < rel_height < 1:
        raise ValueError(f"rel_height must lie in (0, 1), got {rel_height}")
    m = spec.magnitudes
    if m.size < 3 or np.max(m) <= 0:
        return []
    idx, _ = find_peaks(m, height=rel_height * np.max(m))
    dw = spec.frequencies[1] - spec.frequencies[0]
    peaks = []
    for k in idx:
        lo, mid, hi = m[k - 1], m[k], m[k + 1]
        denom = lo - 2.0 * mid + hi
        shift = 0.0 if denom == 0 else 0.5 * (lo - hi) / denom
        shift = float(np.clip(shift, -0.5, 0.5))
        height = mid - 0.25 * (lo - hi) * shift
        peaks.append((float(spec.frequencies[k] + shift * dw), float(height)))
    return peaks


def dominant_frequency(spec: FourierSpectrum, min_frequency: float = 0.0) -> float:
    """Frequency of the tallest detected peak at or above min_frequency.

    A decaying non-oscillatory background concentrates weight in a lobe next
    to DC; the floor excludes that lobe when measuring an oscillation riding
    on such a background.
    """
    cands = [(h, f) for f, h in spec.peaks if f >= min_frequency]
    if not cands:
        raise ValueError(f"no spectral peak at or above frequency {min_frequency}")
    return max(cands)[1]


def comb_spacing(peaks) -> tuple[float, float]:
    """Mean and relative standard deviation of consecutive peak spacings."""
    freqs = np.sort(np.asarray([f for f, _ in peaks], dtype=float))
    if freqs.size < 3:
        raise ValueError(f"need at least 3 peaks, got {freqs.size}")
    gaps = np.diff(freqs)
    mean = float(gaps.mean())
    return mean, float(gaps.std() / mean)
