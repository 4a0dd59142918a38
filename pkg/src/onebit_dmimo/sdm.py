"""Two-level fronthaul signalling.

Triangular dither synthesis, error-feedback sigma-delta encoding (lowpass for
the dither, bandpass for downlink RF data) and the analog reconstruction
filters at the radio head.

Loop: ``v = x + h1*e[n-1] + h2*e[n-2]``, ``y = +/-FS`` by the sign of ``v``,
``e = y - v``. The output is ``x + NTF(z) e`` with

* lowpass  ``NTF = (1 - z^-1)^2``
* bandpass ``NTF = 1 - 2 cos(w0) z^-1 + z^-2`` (zero pair at the carrier)
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
import scipy.fft as sfft

from . import _dsp
from .errors import ConfigurationError, InputShapeError
from .waveform import IMPEDANCE, PassbandSignal

log = logging.getLogger(__name__)

DEFAULT_FULL_SCALE = 0.4
_MAGIC = b"1BITSTRM"


@dataclass
class BitStream:
    bits: np.ndarray
    sample_rate: float
    full_scale: float = DEFAULT_FULL_SCALE

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.size and self.bits.max() > 1:
            raise InputShapeError("bit stream values must be 0 or 1")

    def __len__(self):
        return self.bits.size

    def bipolar(self) -> np.ndarray:
        """Bits as +/-1.0."""
        return 2.0 * self.bits.astype(np.float64) - 1.0


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth reconstruction filter.

    ``order`` is the order of the lowpass prototype; for ``lowpass`` the
    cutoff is ``bandwidth_hz``.
    """

    kind: str
    bandwidth_hz: float
    center_hz: float = 0.0
    order: int = 4

    def __post_init__(self):
        if self.kind not in ("lowpass", "bandpass"):
            raise ConfigurationError(f"unknown filter kind {self.kind!r}")
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("filter bandwidth must be positive")
        if self.kind == "bandpass" and self.center_hz - self.bandwidth_hz / 2 <= 0:
            raise ConfigurationError("bandpass filter extends below DC")

    @property
    def upper_edge(self) -> float:
        if self.kind == "lowpass":
            return self.bandwidth_hz
        return self.center_hz + self.bandwidth_hz / 2

    def response(self, freqs) -> np.ndarray:
        """Magnitude response at ``freqs`` (Hz)."""
        if self.kind == "lowpass":
            return _dsp.butterworth_lowpass(freqs, self.bandwidth_hz, self.order)
        return _dsp.butterworth_bandpass(freqs, self.center_hz, self.bandwidth_hz, self.order)

    def scaled(self, factor: float) -> "FilterSpec":
        return FilterSpec(self.kind, self.bandwidth_hz / factor, self.center_hz / factor,
                          self.order)


def triangle_dither(f_d: float, power_dbm: float, sample_rate: float, n: int,
                    impedance: float = IMPEDANCE) -> PassbandSignal:
    """Symmetric, phase-continuous triangle wave of the given average power.

    Peak amplitude is ``sqrt(3 * P * R)``; the wave starts at zero, rising.
    """
    if f_d >= sample_rate / 2:
        raise ConfigurationError(f"dither frequency {f_d:.6g} Hz at or above Nyquist")
    v_pk = math.sqrt(3.0 * 10 ** (power_dbm / 10) * 1e-3 * impedance)
    phase = np.arange(n) * (f_d / sample_rate)
    tri = 1.0 - 4.0 * np.abs(np.mod(phase + 0.25, 1.0) - 0.5)
    return PassbandSignal(v_pk * tri, sample_rate, impedance)


@numba.njit(cache=True)
def _error_feedback_loop(x, full_scale, h1, h2):
    n = x.size
    out = np.empty(n, np.uint8)
    e1 = 0.0
    e2 = 0.0
    for i in range(n):
        v = x[i] + h1 * e1 + h2 * e2
        if v >= 0.0:
            y = full_scale
            out[i] = 1
        else:
            y = -full_scale
            out[i] = 0
        e2 = e1
        e1 = y - v
    return out


def sdm_encode(x: PassbandSignal, mode: str = "lowpass", band: FilterSpec | None = None,
               full_scale: float = DEFAULT_FULL_SCALE) -> BitStream:
    """Second-order error-feedback sigma-delta modulation to a two-level stream.

    Input samples beyond +/-full_scale are clipped first (logged as a warning).
    The loop state starts from zero, so identical inputs give identical bits.
    """
    samples = np.asarray(x.samples, dtype=np.float64)
    peak = float(np.max(np.abs(samples))) if samples.size else 0.0
    if peak > full_scale:
        log.warning("sdm_encode: input peak %.4g V exceeds full scale %.4g V, clipping",
                    peak, full_scale)
        samples = np.clip(samples, -full_scale, full_scale)
    if mode == "lowpass":
        h1, h2 = -2.0, 1.0
    elif mode == "bandpass":
        if band is None or band.kind != "bandpass":
            raise ConfigurationError("bandpass encoding needs a bandpass FilterSpec")
        if x.sample_rate < 4 * band.center_hz:
            log.info("sdm_encode: sample rate below 4x the band centre")
        w0 = 2 * math.pi * band.center_hz / x.sample_rate
        h1, h2 = -2.0 * math.cos(w0), 1.0
    else:
        raise ConfigurationError(f"unknown sigma-delta mode {mode!r}")
    bits = _error_feedback_loop(samples, float(full_scale), h1, h2)
    return BitStream(bits, x.sample_rate, full_scale)


def reconstruct(bits: BitStream, filt: FilterSpec) -> PassbandSignal:
    """Map bits to +/-full_scale volts and apply ``filt`` as a zero-phase filter."""
    if filt.upper_edge >= bits.sample_rate / 2:
        raise ConfigurationError("reconstruction filter band exceeds Nyquist")
    m = len(bits)
    spec = sfft.rfft(bits.bipolar() * bits.full_scale)
    spec *= filt.response(_dsp.rfft_freqs(m, bits.sample_rate))
    return PassbandSignal(sfft.irfft(spec, n=m), bits.sample_rate)


def dump_bitstream(bits: BitStream, path) -> None:
    """Write ``bits`` as a 16-byte header (magic, rate as little-endian u64 Hz)
    followed by packed bits, least significant bit first within each byte."""
    header = _MAGIC + struct.pack("<Q", int(round(bits.sample_rate)))
    payload = np.packbits(bits.bits, bitorder="little").tobytes()
    Path(path).write_bytes(header + payload)


def load_bitstream(path, n_bits: int | None = None,
                   full_scale: float = DEFAULT_FULL_SCALE) -> BitStream:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != _MAGIC:
        raise InputShapeError(f"{path}: not a bit stream dump")
    (rate,) = struct.unpack("<Q", raw[8:16])
    bits = np.unpackbits(np.frombuffer(raw[16:], dtype=np.uint8), bitorder="little")
    if n_bits is not None:
        bits = bits[:n_bits]
    return BitStream(bits, float(rate), full_scale)
