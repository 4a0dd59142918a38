"""Receive-mode radio head model.

Signal path::

    y --LNA--> y1 --VGA(AGC)--> --comparator gain--> --BPF--> y2
    d --LPF--> --DA--> d2
    z = comparator(y2 - d2)

Every amplifier adds Gaussian noise of power ``k * T_e * B`` (flat over its
band, referred to its input) and then applies its gain. The VGA gain follows
the measured average power of ``y1``. In ``inf_bit`` mode ``y2`` itself is
handed to the central unit.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.constants import k as BOLTZMANN

from . import _dsp
from .errors import ConfigurationError, InputShapeError
from .sdm import BitStream, FilterSpec, reconstruct, sdm_encode, triangle_dither
from .waveform import IMPEDANCE, PassbandSignal

T0 = 290.0

AGC_LOW_DBM = -41.0
AGC_HIGH_DBM = 4.0
AGC_MAX_GAIN_DB = 10.0
AGC_MIN_GAIN_DB = -35.0
AGC_OUTPUT_DBM = -31.0


@dataclass(frozen=True)
class AmplifierSpec:
    """Gain stage with an input-referred noise temperature.

    ``center_hz`` of None means the noise band runs from DC to ``bandwidth_hz``;
    otherwise it is ``bandwidth_hz`` wide around ``center_hz``. ``gain_db`` of
    None marks an AGC-controlled stage.
    """

    gain_db: float | None
    noise_temp_k: float
    bandwidth_hz: float
    center_hz: float | None = None

    def __post_init__(self):
        if self.noise_temp_k < 0:
            raise ConfigurationError("noise temperature must be non-negative")
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("amplifier bandwidth must be positive")

    @classmethod
    def from_noise_figure(cls, gain_db, noise_figure_db, bandwidth_hz, center_hz=None):
        t_e = (10 ** (noise_figure_db / 10) - 1.0) * T0
        return cls(gain_db, t_e, bandwidth_hz, center_hz)

    @property
    def noise_power_w(self) -> float:
        return BOLTZMANN * self.noise_temp_k * self.bandwidth_hz

    @property
    def band(self) -> tuple[float, float]:
        if self.center_hz is None:
            return (0.0, self.bandwidth_hz)
        return (self.center_hz - self.bandwidth_hz / 2, self.center_hz + self.bandwidth_hz / 2)

    def scaled(self, factor: float) -> "AmplifierSpec":
        """Frequencies divided by ``factor``, noise temperature multiplied by it."""
        center = None if self.center_hz is None else self.center_hz / factor
        return AmplifierSpec(self.gain_db, self.noise_temp_k * factor,
                             self.bandwidth_hz / factor, center)


@dataclass(frozen=True)
class FrontendConfig:
    """Radio head parameters; defaults are the measured receiver values.

    ``comparator_gain_db`` is the fixed gain between the AGC output and the
    comparator port. It puts the regulated comparator-port level at -11 dBm,
    9 dB below the -2 dBm dither, where OFDM peaks rarely exceed the dither
    swing and the dithered comparator is noise- rather than clipping-limited.
    """

    carrier_hz: float = 2.35e9
    v_th: float = 0.010
    impedance: float = IMPEDANCE
    lna: AmplifierSpec = None
    vga: AmplifierSpec = field(default_factory=lambda: AmplifierSpec(None, 4867.0, 3e9))
    da: AmplifierSpec = field(default_factory=lambda: AmplifierSpec(15.0, 319.0, 180e6))
    lpf: FilterSpec = field(default_factory=lambda: FilterSpec("lowpass", 180e6))
    bpf: FilterSpec = None
    comparator_gain_db: float = 20.0
    dither_hz: float = 76e6
    dither_power_dbm: float = -2.0
    dither_sdm_peak: float = 0.5
    mode: str = "one_bit"

    def __post_init__(self):
        if self.lna is None:
            object.__setattr__(self, "lna", AmplifierSpec(24.0, 119.0, 400e6, self.carrier_hz))
        if self.bpf is None:
            object.__setattr__(self, "bpf", FilterSpec("bandpass", 100e6, self.carrier_hz))
        if self.v_th <= 0:
            raise ConfigurationError("comparator threshold must be positive")
        if self.mode not in ("one_bit", "inf_bit"):
            raise ConfigurationError(f"unknown quantizer mode {self.mode!r}")

    def scaled(self, factor: float) -> "FrontendConfig":
        """Frequency-scaled copy keeping every k*T_e*B noise power unchanged."""
        if factor == 1:
            return self
        return replace(self, carrier_hz=self.carrier_hz / factor,
                       lna=self.lna.scaled(factor), vga=self.vga.scaled(factor),
                       da=self.da.scaled(factor), lpf=self.lpf.scaled(factor),
                       bpf=self.bpf.scaled(factor), dither_hz=self.dither_hz / factor)

    def noiseless(self) -> "FrontendConfig":
        return replace(self, lna=replace(self.lna, noise_temp_k=0.0),
                       vga=replace(self.vga, noise_temp_k=0.0),
                       da=replace(self.da, noise_temp_k=0.0))


def _db_to_amp(db: float) -> float:
    return 10 ** (db / 20)


@functools.lru_cache(maxsize=16)
def filter_response(filt: FilterSpec, m: int, sample_rate: float) -> np.ndarray:
    """Read-only magnitude response of ``filt`` on the ``m``-point rfft grid."""
    resp = filt.response(_dsp.rfft_freqs(m, sample_rate))
    resp.flags.writeable = False
    return resp


def _noise_spec(spec: AmplifierSpec, m, fs, impedance, rng):
    return _dsp.noise_spectrum(m, fs, spec.noise_power_w, impedance, spec.band, rng)


def amplifier_apply(x: PassbandSignal, spec: AmplifierSpec, rng: np.random.Generator,
                    gain_db: float | None = None) -> PassbandSignal:
    """``G * (x + n)`` with ``n`` band-limited Gaussian noise of power k*T_e*B."""
    gain_db = spec.gain_db if gain_db is None else gain_db
    if gain_db is None:
        raise ConfigurationError("AGC-controlled amplifier needs an explicit gain")
    m = len(x)
    noise = sfft.irfft(_noise_spec(spec, m, x.sample_rate, x.impedance, rng), n=m)
    return PassbandSignal(_db_to_amp(gain_db) * (x.samples + noise), x.sample_rate,
                          x.impedance)


def vga_gain_db(p_y1_dbm: float) -> float:
    """Variable-gain amplifier law: gain that regulates the output to -31 dBm,
    limited to the +10 ... -35 dB range of the device."""
    if p_y1_dbm < AGC_LOW_DBM:
        return AGC_MAX_GAIN_DB
    if p_y1_dbm > AGC_HIGH_DBM:
        return AGC_MIN_GAIN_DB
    return -p_y1_dbm + AGC_OUTPUT_DBM


def _power_dbm(p_w: float) -> float:
    return -math.inf if p_w <= 0 else 10 * math.log10(p_w / 1e-3)


def agc_apply(y1: PassbandSignal, cfg: FrontendConfig,
              rng: np.random.Generator) -> PassbandSignal:
    """Settled AGC: one gain per record, chosen from the record's average power."""
    p_y1 = _power_dbm(float(np.mean(y1.samples**2)) / y1.impedance)
    return amplifier_apply(y1, cfg.vga, rng, gain_db=vga_gain_db(p_y1))


def comparator_quantize(y2, d2, v_th: float, rng: np.random.Generator,
                        sample_rate: float | None = None) -> BitStream:
    """Threshold comparator with a dead zone.

    1 where ``y2 - d2 > v_th``, 0 where ``y2 - d2 < -v_th``, and a fair coin
    inside the dead zone. One uniform draw is consumed per sample whatever the
    input, so for fixed draws the output is monotone in ``y2 - d2``.
    """
    if isinstance(y2, PassbandSignal):
        sample_rate = y2.sample_rate if sample_rate is None else sample_rate
        y2 = y2.samples
    if isinstance(d2, PassbandSignal):
        d2 = d2.samples
    y2 = np.asarray(y2, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if y2.shape != d2.shape:
        raise InputShapeError(f"comparator inputs differ in length: {y2.size} vs {d2.size}")
    return _compare(y2 - d2, v_th, rng, sample_rate or 1.0)


def _compare(diff, v_th, rng, sample_rate) -> BitStream:
    coin = rng.random(diff.size) < 0.5
    bits = (diff > v_th) | ((np.abs(diff) <= v_th) & coin)
    return BitStream(bits.astype(np.uint8), sample_rate)


# dither path


@functools.lru_cache(maxsize=8)
def _dither_cache(cfg: FrontendConfig, sample_rate: float, n: int):
    tri = triangle_dither(cfg.dither_hz, 0.0, sample_rate, n, cfg.impedance)
    tri.samples *= cfg.dither_sdm_peak / np.max(np.abs(tri.samples))
    bits = sdm_encode(tri, "lowpass", full_scale=1.0)
    unit = reconstruct(bits, cfg.lpf)
    p_unit = float(np.mean(unit.samples**2)) / cfg.impedance
    p_target = 10 ** (cfg.dither_power_dbm / 10) * 1e-3
    full_scale = math.sqrt(p_target / p_unit) / _db_to_amp(cfg.da.gain_db)
    stream = BitStream(bits.bits, sample_rate, full_scale)
    spec = sfft.rfft(unit.samples) * full_scale
    spec.flags.writeable = False
    return stream, spec


def dither_bits(cfg: FrontendConfig, sample_rate: float, n: int) -> BitStream:
    """Sigma-delta encoded triangle dither whose ``full_scale`` is calibrated so
    that the noiseless reconstructed, amplified dither measures
    ``cfg.dither_power_dbm`` at the comparator."""
    stream, _ = _dither_cache(cfg, float(sample_rate), int(n))
    return BitStream(stream.bits.copy(), stream.sample_rate, stream.full_scale)


def dither_at_comparator(bits: BitStream, cfg: FrontendConfig,
                         rng: np.random.Generator) -> PassbandSignal:
    """Dither path: reconstruct with the LPF, then the DA stage."""
    return amplifier_apply(reconstruct(bits, cfg.lpf), cfg.da, rng)


# full chain


@dataclass
class ChainOutput:
    """Result of :func:`rrh_uplink_chain` plus the powers seen along the way."""

    output: BitStream | PassbandSignal
    antenna_power_dbm: float
    p_y1_dbm: float
    vga_gain_db: float


def uplink_spectrum_chain(y_spec: np.ndarray, m: int, sample_rate: float,
                          cfg: FrontendConfig, rng: np.random.Generator,
                          dither: BitStream | None = None) -> tuple[np.ndarray | BitStream, dict]:
    """Spectral-domain core of :func:`rrh_uplink_chain`.

    ``y_spec`` is the rfft of the antenna signal. Returns either the rfft of
    ``y2`` (``inf_bit``) or the comparator bit stream, plus diagnostics.
    Random draws are taken in a fixed order (LNA, VGA, DA, comparator).
    """
    r = cfg.impedance
    if cfg.lna.band[1] >= sample_rate / 2 or cfg.bpf.upper_edge >= sample_rate / 2:
        raise ConfigurationError("front-end bands exceed the simulation Nyquist rate")
    p_ant = _dsp.spectrum_power(y_spec, m, r)
    y1 = (y_spec + _noise_spec(cfg.lna, m, sample_rate, r, rng)) * _db_to_amp(cfg.lna.gain_db)
    p_y1 = _power_dbm(_dsp.spectrum_power(y1, m, r))
    g_vga = vga_gain_db(p_y1)
    y2 = (y1 + _noise_spec(cfg.vga, m, sample_rate, r, rng)) * _db_to_amp(
        g_vga + cfg.comparator_gain_db)
    y2 *= filter_response(cfg.bpf, m, float(sample_rate))
    info = {"antenna_power_dbm": _power_dbm(p_ant), "p_y1_dbm": p_y1, "vga_gain_db": g_vga}
    if cfg.mode == "inf_bit":
        return y2, info
    if dither is None:
        dither = dither_bits(cfg, sample_rate, m)
    if len(dither) != m or dither.sample_rate != sample_rate:
        raise ConfigurationError("dither stream does not match the received record")
    cached = _dither_cache(cfg, float(sample_rate), int(m))
    if np.array_equal(dither.bits, cached[0].bits) and dither.full_scale == cached[0].full_scale:
        d_lpf = cached[1]
    else:
        d_lpf = sfft.rfft(dither.bipolar() * dither.full_scale) * filter_response(
            cfg.lpf, m, float(sample_rate))
    d2 = (d_lpf + _noise_spec(cfg.da, m, sample_rate, r, rng)) * _db_to_amp(cfg.da.gain_db)
    diff = sfft.irfft(y2 - d2, n=m)
    return _compare(diff, cfg.v_th, rng, sample_rate), info


def rrh_uplink_chain(y: PassbandSignal, dither: BitStream | None, cfg: FrontendConfig,
                     rng: np.random.Generator) -> ChainOutput:
    """Run one radio head: bits in ``one_bit`` mode, the analog ``y2`` in ``inf_bit``."""
    if dither is not None and dither.sample_rate != y.sample_rate:
        raise ConfigurationError(
            f"dither rate {dither.sample_rate:.6g} differs from signal rate {y.sample_rate:.6g}")
    m = len(y)
    out, info = uplink_spectrum_chain(sfft.rfft(y.samples), m, y.sample_rate, cfg, rng, dither)
    if isinstance(out, np.ndarray):
        out = PassbandSignal(sfft.irfft(out, n=m), y.sample_rate, y.impedance)
    return ChainOutput(out, **info)
