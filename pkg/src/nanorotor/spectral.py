"""Array-level spectral helpers shared by the trajectory classifier and the
trace analysis."""
from __future__ import annotations

import numpy as np

PAD_FACTOR = 4


def window_samples(n: int, window: str) -> np.ndarray:
    if window == "rectangular":
        return np.ones(n)
    if window == "hann":
        return np.hanning(n)
    raise ValueError(f"unknown window {window!r}")


def one_sided_power(x, sample_rate: float, window: str = "hann", pad_factor: int = PAD_FACTOR):
    """One-sided power spectrum of a real series.

    The scaling is chosen so that, with a rectangular window, the bin powers
    sum to the mean-square value of ``x`` (Parseval), whatever the padding.

    Returns ``(frequencies, power)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    nfft = pad_factor * n
    spec = np.fft.rfft(x * window_samples(n, window), n=nfft)
    power = np.abs(spec) ** 2
    power[1:] *= 2
    if nfft % 2 == 0:
        power[-1] /= 2  # Nyquist bin has no mirror image
    power /= n * nfft
    freqs = np.fft.rfftfreq(nfft, d=1.0 / sample_rate)
    return freqs, power


def parabolic_peak(power, i: int) -> tuple[float, float]:
    """Sub-bin vertex of the parabola through ``log(power)`` at i-1, i, i+1.

    Returns ``(fractional_index, interpolated_power)``; edge bins are
    returned unchanged.
    """
    if i <= 0 or i >= len(power) - 1:
        return float(i), float(power[i])
    tiny = np.finfo(float).tiny
    a, b, c = np.log(np.maximum(power[i - 1 : i + 2], tiny))
    denom = a - 2 * b + c
    if denom >= 0:
        return float(i), float(power[i])
    delta = 0.5 * (a - c) / denom
    return i + delta, float(np.exp(b - 0.25 * (a - c) * delta))


def dominant_frequency(x, sample_rate: float, min_cycles: float = 1.5) -> float | None:
    """Frequency of the strongest non-DC component of ``x``.

    Returns None when the record is too short to hold ``min_cycles`` periods
    of the detected component, or has no oscillation at all.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 16:
        return None
    x = x - x.mean()
    if not np.any(x):
        return None
    freqs, power = one_sided_power(x, sample_rate, "hann")
    i = int(np.argmax(power[1:])) + 1
    pos, _ = parabolic_peak(power, i)
    f = pos * (freqs[1] - freqs[0])
    duration = x.size / sample_rate
    if f <= 0 or f * duration < min_cycles:
        return None
    return float(f)
