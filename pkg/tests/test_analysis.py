"""Spectrum/peak/comb tests against synthetic signals with known content."""

import numpy as np
import pytest

from bosedimer import analysis as an
from bosedimer import semiclassical as sc
from bosedimer.core import DimerParams, ModeState


def _tone(freqs_amps, n=2048, dt=0.05, phase=0.3):
    t = np.arange(n) * dt
    x = np.zeros(n, dtype=complex)
    for w, a in freqs_amps:
        x += a * np.exp(1j * (w * t + phase))
    return x, dt


def _bin_width(n, dt):
    return 2.0 * np.pi / (n * dt)


def test_single_tone_peaks_at_its_frequency():
    n, dt = 2048, 0.05
    w0 = 37 * _bin_width(n, dt)  # bin-centered: no leakage
    x, dt = _tone([(w0, 1.0)], n, dt)
    spec = an.fourier_spectrum(x, dt)
    assert len(spec.peaks) == 1
    f, m = spec.peaks[0]
    assert abs(f - w0) < _bin_width(n, dt)
    assert m > 0.9 * np.max(spec.magnitudes)


def test_zero_series_has_no_peaks():
    spec = an.fourier_spectrum(np.zeros(256, complex), 0.01)
    assert spec.peaks == []
    assert np.all(spec.magnitudes == 0)


def test_two_tones_resolved_within_half_bin():
    n, dt = 4096, 0.05
    bw = _bin_width(n, dt)
    w1, w2 = 50 * bw, 203 * bw
    x, dt = _tone([(w1, 1.0), (w2, 1.0)], n, dt)
    spec = an.fourier_spectrum(x, dt)
    assert len(spec.peaks) == 2
    got = sorted(f for f, _ in spec.peaks)
    assert abs(got[0] - w1) < 0.5 * bw
    assert abs(got[1] - w2) < 0.5 * bw


def test_synthetic_comb_detected_and_equidistant():
    n, dt = 4096, 0.05
    bw = _bin_width(n, dt)
    w0, delta = 40 * bw, 31 * bw
    x, dt = _tone([(w0 + k * delta, 1.0 / (1 + k)) for k in range(6)], n, dt)
    spec = an.fourier_spectrum(x, dt)
    assert len(spec.peaks) == 6
    mean, rel_std = an.comb_spacing(spec.peaks)
    assert abs(mean - delta) < 1e-6 * delta
    assert rel_std < 1e-3


def test_comb_spacing_flags_non_commensurate_sets():
    peaks = [(1.0, 1.0), (2.13, 1.0), (3.01, 1.0), (4.5, 1.0)]
    _, rel_std = an.comb_spacing(peaks)
    assert rel_std > 0.1


def test_comb_spacing_needs_three_peaks():
    with pytest.raises(ValueError):
        an.comb_spacing([(1.0, 1.0), (2.0, 1.0)])


def test_parseval_identity_windowless():
    rng = np.random.default_rng(123)
    for n in (256, 255):  # even and odd lengths fold differently
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        spec = an.fourier_spectrum(x, 0.02)
        lhs = np.sum(spec.magnitudes**2)
        rhs = np.sum(np.abs(x - x.mean()) ** 2)  # the transform is of the centered series
        assert abs(lhs - rhs) < 1e-8 * rhs


def test_real_series_spectrum_is_one_sided():
    n, dt = 1024, 0.02
    bw = _bin_width(n, dt)
    t = np.arange(n) * dt
    x = np.cos(64 * bw * t)
    spec = an.fourier_spectrum(x, dt)
    assert spec.frequencies[0] == 0.0
    assert np.all(np.diff(spec.frequencies) > 0)
    assert len(spec.peaks) == 1
    assert abs(spec.peaks[0][0] - 64 * bw) < 0.5 * bw


def test_hann_window_shifts_resolved_peaks_under_fifth_of_a_bin():
    n, dt = 4096, 0.05
    bw = _bin_width(n, dt)
    w0 = (150 + 0.3) * bw  # deliberately off bin center
    x, dt = _tone([(w0, 1.0)], n, dt)
    plain = an.fourier_spectrum(x, dt)
    hann = an.fourier_spectrum(x, dt, window="hann")
    f_plain = max(plain.peaks, key=lambda p: p[1])[0]
    f_hann = max(hann.peaks, key=lambda p: p[1])[0]
    assert abs(f_plain - f_hann) < 0.2 * bw


def test_input_validation():
    with pytest.raises(ValueError):
        an.fourier_spectrum(np.ones(32, complex), 0.01)
    with pytest.raises(ValueError):
        an.fourier_spectrum(np.ones(128, complex), -0.1)
    with pytest.raises(ValueError):
        an.fourier_spectrum(np.ones(128, complex), 0.01, window="hamming")
    spec = an.fourier_spectrum(np.ones(128, complex), 0.01)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            an.detect_peaks(spec, rel_height=bad)


def test_rel_height_threshold_prunes_small_peaks():
    n, dt = 4096, 0.05
    bw = _bin_width(n, dt)
    x, dt = _tone([(40 * bw, 1.0), (200 * bw, 0.05)], n, dt)
    spec = an.fourier_spectrum(x, dt)
    assert len(an.detect_peaks(spec, rel_height=0.01)) == 2
    assert len(an.detect_peaks(spec, rel_height=0.10)) == 1


def test_dominant_frequency_floor_skips_decay_lobe():
    # an exponential background concentrates weight next to DC; the floor
    # recovers the oscillation riding on it
    t = np.arange(2048) * 0.02
    series = np.exp(-0.3 * t) * (5.0 + np.cos(3.0 * t))
    spec = an.fourier_spectrum(series, 0.02, window="hann")
    assert an.dominant_frequency(spec) < 1.0
    assert an.dominant_frequency(spec, min_frequency=1.0) == pytest.approx(3.0, rel=0.02)
    with pytest.raises(ValueError, match="no spectral peak"):
        an.dominant_frequency(spec, min_frequency=1e4)


def test_low_drive_limit_cycle_produces_an_equidistant_comb():
    # mean-field attractor sampled with the trajectory protocol: the spectrum
    # is a frequency comb and its spacing matches the cycle period
    p = DimerParams(f_tilde=0.5)
    tr = sc.integrate(ModeState(0.7 - 0.2j, -0.6 + 0.9j), p, 300.0)
    tail = tr.times >= 100.0
    # Hann keeps leakage sidelobes of the strong low harmonics below the
    # detection threshold so only genuine comb teeth are counted
    spec = an.fourier_spectrum(tr.alpha_a[tail], tr.sample_interval, window="hann")
    peaks = an.detect_peaks(spec, rel_height=1e-3)
    assert len(peaks) >= 4
    mean, rel_std = an.comb_spacing(peaks)
    assert rel_std < 0.01
    period = sc.limit_cycle_period(tr, "abs_a")
    assert period is not None
    assert abs(period * mean / (2.0 * np.pi) - 1.0) < 0.01
