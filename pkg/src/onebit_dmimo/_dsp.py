"""Spectrum-domain helpers shared by the waveform, front-end and harness code.

Real passband records are handled through their one-sided ``rfft`` spectra.
All filters are applied as zero-phase magnitude responses on those spectra,
which is a circular operation; callers keep a guard interval at the end of
every record so wrap-around only touches silent samples.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError


def rate_ratio(fast: float, slow: float) -> Fraction:
    """Exact rational ratio ``fast / slow`` of two sample rates or frequencies."""
    ratio = Fraction(fast).limit_denominator(1 << 20) / Fraction(slow).limit_denominator(1 << 20)
    return ratio.limit_denominator(1 << 24)


def aligned_length(n: int, baseband_rate: float, sample_rate: float,
                   carrier: float | None = None) -> int:
    """Smallest length >= ``n`` whose duration is an integer number of passband
    samples and, if ``carrier`` is given and the grid is small enough, of carrier
    periods as well (which enables exact bin-shift frequency conversion)."""
    step = rate_ratio(sample_rate, baseband_rate).denominator
    if carrier is not None:
        cstep = rate_ratio(carrier, baseband_rate).denominator
        joint = np.lcm(step, cstep)
        if joint <= 8192:
            step = int(joint)
    return int(-(-n // step) * step)


def rfft_freqs(m: int, sample_rate: float) -> np.ndarray:
    return np.arange(m // 2 + 1) * (sample_rate / m)


def spectrum_power(spec: np.ndarray, m: int, impedance: float) -> float:
    """Average power in watts of the real record of length ``m`` whose rfft is ``spec``."""
    mag2 = np.abs(spec) ** 2
    total = mag2[0] + 2.0 * mag2[1:].sum()
    if m % 2 == 0:
        total -= mag2[-1]
    return float(total / m**2 / impedance)


def butterworth_lowpass(freqs: np.ndarray, cutoff: float, order: int) -> np.ndarray:
    return 1.0 / np.sqrt(1.0 + (np.abs(freqs) / cutoff) ** (2 * order))


def butterworth_bandpass(freqs: np.ndarray, center: float, bandwidth: float,
                         order: int) -> np.ndarray:
    """Magnitude of the analog lowpass-to-bandpass transformed Butterworth filter."""
    f = np.abs(np.asarray(freqs, dtype=float))
    out = np.zeros_like(f)
    nz = f > 0
    omega = (f[nz] ** 2 - center**2) / (f[nz] * bandwidth)
    out[nz] = 1.0 / np.sqrt(1.0 + omega ** (2 * order))
    return out


def noise_spectrum(m: int, sample_rate: float, power_w: float, impedance: float,
                   band: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """rfft of a real Gaussian noise record of expected power ``power_w`` whose
    spectrum is flat inside ``band`` (Hz) and zero elsewhere."""
    spec = np.zeros(m // 2 + 1, dtype=np.complex128)
    lo = max(1, int(np.ceil(band[0] * m / sample_rate)))
    hi = min((m - 1) // 2, int(np.floor(band[1] * m / sample_rate)))
    count = hi - lo + 1
    if count <= 0 or power_w <= 0.0:
        return spec
    sigma2 = power_w * impedance * m**2 / (2.0 * count)
    draws = rng.standard_normal((count, 2))
    spec[lo:hi + 1] = (draws[:, 0] + 1j * draws[:, 1]) * np.sqrt(sigma2 / 2.0)
    return spec


def carrier_bin(carrier: float, m: int, sample_rate: float) -> int | None:
    """Index of the carrier in an ``m``-point rfft, or None if it falls between bins."""
    exact = carrier * m / sample_rate
    c = round(exact)
    if abs(exact - c) < 1e-6:
        return int(c)
    return None


def baseband_to_rspectrum(x: np.ndarray, m: int, carrier: float, sample_rate: float,
                          scale: float = 1.0) -> np.ndarray | None:
    """rfft of Re{scale * x_up(t) exp(j 2 pi f_c t)} built by bin placement.

    Returns None when the carrier is not bin-aligned for this record length.
    """
    n = x.size
    c = carrier_bin(carrier, m, sample_rate)
    if c is None:
        return None
    if c - n // 2 < 1 or c + (n - 1) // 2 >= m // 2:
        raise ConfigurationError("baseband band does not fit between DC and Nyquist")
    X = sfft.fft(x) * (scale * m / (2.0 * n))
    k = sfft.fftfreq(n, 1.0 / n).astype(int)
    spec = np.zeros(m // 2 + 1, dtype=np.complex128)
    spec[c + k] = X
    return spec


def rspectrum_to_baseband(spec: np.ndarray, m: int, carrier: float, sample_rate: float,
                          n_out: int, gain: np.ndarray | None = None) -> np.ndarray | None:
    """Inverse of :func:`baseband_to_rspectrum`: complex envelope at ``n_out`` samples."""
    c = carrier_bin(carrier, m, sample_rate)
    if c is None:
        return None
    k = sfft.fftfreq(n_out, 1.0 / n_out).astype(int)
    Z = spec[c + k] * (2.0 * n_out / m)
    if gain is not None:
        Z = Z * gain
    return sfft.ifft(Z)
