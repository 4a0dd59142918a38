"""Geometric line-of-sight propagation between UEs and radio heads.

Path loss follows the 3GPP TR 38.901 urban-micro LOS formula below the
breakpoint distance, antennas have fixed gains, and each link is a pure
delay with the carrier phase that delay implies. No fading or shadowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.constants import c as SPEED_OF_LIGHT

from . import _dsp
from .errors import ConfigurationError, DomainError, InputShapeError
from .waveform import PassbandSignal

MIN_DISTANCE_M = 0.5
RRH_GAIN_DBI = 6.5
UE_GAIN_DBI = 2.15


@dataclass
class Geometry:
    rrh_positions: np.ndarray
    ue_positions: np.ndarray
    carrier: float

    def __post_init__(self):
        self.rrh_positions = np.atleast_2d(np.asarray(self.rrh_positions, dtype=float))
        self.ue_positions = np.atleast_2d(np.asarray(self.ue_positions, dtype=float))
        if self.rrh_positions.shape[1] != self.ue_positions.shape[1]:
            raise InputShapeError("RRH and UE positions must have the same dimension")
        d = self.distances()
        if d.size and d.min() < MIN_DISTANCE_M:
            raise DomainError(
                f"UE-RRH distance {d.min():.3g} m below the {MIN_DISTANCE_M} m model floor")

    @property
    def n_rrh(self) -> int:
        return self.rrh_positions.shape[0]

    @property
    def n_ue(self) -> int:
        return self.ue_positions.shape[0]

    def distances(self) -> np.ndarray:
        """Matrix of distances, shape (n_rrh, n_ue)."""
        diff = self.rrh_positions[:, None, :] - self.ue_positions[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=-1))


@dataclass(frozen=True)
class LinkGain:
    amplitude: float
    phase: float
    delay: float


def path_loss_umi_los_db(d, f_c_ghz):
    """UMi LOS path loss ``32.4 + 21 log10(d) + 20 log10(f_c)`` (d in m, f_c in GHz)."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < MIN_DISTANCE_M):
        raise DomainError(f"distance below the {MIN_DISTANCE_M} m validity floor")
    pl = 32.4 + 21.0 * np.log10(d_arr) + 20.0 * math.log10(f_c_ghz)
    return float(pl) if pl.ndim == 0 else pl


def link_coefficient(geom: Geometry, rrh: int, ue: int, rrh_gain_dbi: float = RRH_GAIN_DBI,
                     ue_gain_dbi: float = UE_GAIN_DBI) -> LinkGain:
    if not (0 <= rrh < geom.n_rrh and 0 <= ue < geom.n_ue):
        raise InputShapeError(f"link ({rrh}, {ue}) outside {geom.n_rrh} RRHs x {geom.n_ue} UEs")
    d = float(geom.distances()[rrh, ue])
    pl = path_loss_umi_los_db(d, geom.carrier / 1e9)
    amplitude = 10 ** ((rrh_gain_dbi + ue_gain_dbi - pl) / 20)
    delay = d / SPEED_OF_LIGHT
    phase = (-2 * math.pi * geom.carrier * delay) % (2 * math.pi)
    return LinkGain(amplitude, phase, delay)


def link_matrices(geom: Geometry, **gains) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and delay matrices, each shaped (n_rrh, n_ue)."""
    amp = np.empty((geom.n_rrh, geom.n_ue))
    delay = np.empty_like(amp)
    for i in range(geom.n_rrh):
        for k in range(geom.n_ue):
            g = link_coefficient(geom, i, k, **gains)
            amp[i, k], delay[i, k] = g.amplitude, g.delay
    return amp, delay


def delay_spectrum(spec: np.ndarray, freqs: np.ndarray, amplitude: float,
                   delay: float) -> np.ndarray:
    return spec * (amplitude * np.exp(-2j * np.pi * freqs * delay))


def apply_channel(tx: list[PassbandSignal], geom: Geometry,
                  amplitudes: np.ndarray | None = None,
                  delays: np.ndarray | None = None) -> list[PassbandSignal]:
    """Superpose the UE signals at every radio head.

    Each link scales and delays its UE signal; the fractional delay is applied
    exactly as a linear phase on the record's spectrum (circular, so records
    need a silent tail longer than the largest delay). ``amplitudes`` and
    ``delays`` override the geometric values, e.g. for a cable connection.
    """
    if len(tx) != geom.n_ue:
        raise InputShapeError(f"{len(tx)} transmit signals for {geom.n_ue} UEs")
    rates = {s.sample_rate for s in tx}
    lengths = {len(s) for s in tx}
    if len(rates) != 1 or len(lengths) != 1:
        raise ConfigurationError("UE signals must share sample rate and length")
    if amplitudes is None or delays is None:
        amp_geo, delay_geo = link_matrices(geom)
        amplitudes = amp_geo if amplitudes is None else amplitudes
        delays = delay_geo if delays is None else delays
    fs = rates.pop()
    m = lengths.pop()
    freqs = _dsp.rfft_freqs(m, fs)
    spectra = [sfft.rfft(s.samples) for s in tx]
    out = []
    for i in range(geom.n_rrh):
        acc = np.zeros(m // 2 + 1, dtype=np.complex128)
        for k, spec in enumerate(spectra):
            acc += delay_spectrum(spec, freqs, amplitudes[i, k], delays[i, k])
        out.append(PassbandSignal(sfft.irfft(acc, n=m), fs, tx[0].impedance))
    return out
