"""OFDM / 16QAM waveform synthesis and analysis.

Baseband signals are complex numpy arrays sampled at ``n_fft * subcarrier_hz``.
Passband signals are real voltage records wrapped in :class:`PassbandSignal`.

16QAM Gray labelling (two bits per axis, first pair on I, second on Q)::

    bits   00  01  11  10
    level  -3  -1  +1  +3      (divided by sqrt(10))

so ``0000`` maps to ``(-3 - 3j) / sqrt(10)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy import signal

from . import _dsp
from .errors import ConfigurationError, InputShapeError

IMPEDANCE = 50.0

# level indexed by the 2-bit label b0*2 + b1
_GRAY_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])
# label of level -3, -1, +1, +3
_LEVEL_LABELS = np.array([0, 1, 3, 2])
_QAM16_NORM = math.sqrt(10.0)

QAM16_ALPHABET = (
    _GRAY_LEVELS[np.arange(16) >> 2] + 1j * _GRAY_LEVELS[np.arange(16) & 3]
) / _QAM16_NORM
QPSK_ALPHABET = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2.0)


def map_qam16(bits) -> np.ndarray:
    """Map a bit sequence onto unit-energy Gray-coded 16QAM symbols."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 4:
        raise InputShapeError(f"16QAM needs a multiple of 4 bits, got {bits.size}")
    quads = bits.reshape(-1, 4)
    labels = quads[:, 0] * 8 + quads[:, 1] * 4 + quads[:, 2] * 2 + quads[:, 3]
    return QAM16_ALPHABET[labels]


def demap_qam16(symbols) -> np.ndarray:
    """Hard-decision inverse of :func:`map_qam16`."""
    symbols = np.asarray(symbols).ravel() * _QAM16_NORM

    def axis_bits(v):
        level = np.clip(2 * np.floor(v / 2) + 1, -3, 3).astype(int)
        labels = _LEVEL_LABELS[(level + 3) // 2]
        return np.stack([labels >> 1, labels & 1], axis=-1)

    out = np.concatenate([axis_bits(symbols.real), axis_bits(symbols.imag)], axis=-1)
    return out.reshape(-1).astype(np.uint8)


def qam16_decide(symbols) -> np.ndarray:
    """Nearest 16QAM constellation point for each symbol."""
    return map_qam16(demap_qam16(symbols))


def random_qpsk(n: int, rng: np.random.Generator) -> np.ndarray:
    return QPSK_ALPHABET[rng.integers(0, 4, size=n)]


@dataclass(frozen=True)
class OfdmConfig:
    """Grid geometry: active subcarriers symmetric around an unused DC bin."""

    subcarrier_hz: float = 240e3
    bandwidth_hz: float = 75e6
    n_fft: int = 512
    cp_fraction: float = 1.0 / 16.0

    def __post_init__(self):
        if self.n_fft < 4 or self.n_fft & (self.n_fft - 1):
            raise ConfigurationError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0.0 <= self.cp_fraction < 1.0:
            raise ConfigurationError(f"cp_fraction must lie in [0, 1), got {self.cp_fraction}")
        if self.n_active < 2 or self.n_active // 2 >= self.n_fft // 2:
            raise ConfigurationError("bandwidth does not fit the FFT size")

    @property
    def n_active(self) -> int:
        n = int(math.floor(self.bandwidth_hz / self.subcarrier_hz + 1e-9))
        return n - n % 2

    @property
    def active(self) -> np.ndarray:
        half = self.n_active // 2
        return np.r_[1:half + 1, self.n_fft - half:self.n_fft]

    @property
    def sample_rate(self) -> float:
        return self.n_fft * self.subcarrier_hz

    @property
    def cp_len(self) -> int:
        return int(math.floor(self.cp_fraction * self.n_fft))

    @property
    def symbol_len(self) -> int:
        return self.n_fft + self.cp_len

    def scaled(self, factor: float) -> "OfdmConfig":
        return replace(self, subcarrier_hz=self.subcarrier_hz / factor,
                       bandwidth_hz=self.bandwidth_hz / factor)


@dataclass
class ResourceGrid:
    """Frequency-domain OFDM symbols, ``data[subcarrier, symbol]`` in FFT bin order."""

    data: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        self.active = np.asarray(self.active, dtype=np.int64)
        n_fft = self.data.shape[0]
        if self.active.size and (self.active.min() < 0 or self.active.max() >= n_fft):
            raise ConfigurationError("active subcarrier index outside [0, n_fft)")
        guard = np.ones(n_fft, dtype=bool)
        guard[self.active] = False
        if np.any(self.data[guard] != 0):
            raise ConfigurationError("guard subcarriers must be zero")

    @classmethod
    def from_active(cls, values, config: OfdmConfig) -> "ResourceGrid":
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != config.n_active:
            raise InputShapeError(
                f"expected {config.n_active} active subcarriers, got {values.shape[0]}")
        data = np.zeros((config.n_fft, values.shape[1]), dtype=np.complex128)
        data[config.active] = values
        return cls(data, config.active)

    @property
    def n_fft(self) -> int:
        return self.data.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.data.shape[1]

    @property
    def active_data(self) -> np.ndarray:
        return self.data[self.active]

    def power(self) -> float:
        """Mean |X|^2 per time-domain sample of the useful (CP-free) symbol part."""
        return float(np.sum(np.abs(self.data) ** 2) / self.data.size)


@dataclass
class PassbandSignal:
    """Real RF voltage record."""

    samples: np.ndarray
    sample_rate: float
    impedance: float = IMPEDANCE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise InputShapeError("passband samples must be finite")

    def __len__(self):
        return self.samples.size


@dataclass
class EvmReport:
    per_ue_evm: np.ndarray
    per_rrh_rx_power: np.ndarray
    mode: str
    extras: dict = field(default_factory=dict)


def _check_grid_geometry(n_fft, active, cp_fraction):
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise ConfigurationError(f"n_fft must be a power of two, got {n_fft}")
    if not 0.0 <= cp_fraction < 1.0:
        raise ConfigurationError(f"cp_fraction must lie in [0, 1), got {cp_fraction}")
    active = np.asarray(active)
    if active.size and (active.min() < 0 or active.max() >= n_fft):
        raise ConfigurationError("active subcarrier index outside [0, n_fft)")


def ofdm_modulate(grid: ResourceGrid, cp_fraction: float) -> np.ndarray:
    """Unitary inverse DFT per symbol with a cyclic prefix of floor(cp_fraction * n_fft)."""
    n_fft = grid.n_fft
    _check_grid_geometry(n_fft, grid.active, cp_fraction)
    cp = int(math.floor(cp_fraction * n_fft))
    body = sfft.ifft(grid.data, axis=0, norm="ortho")
    with_cp = np.concatenate([body[n_fft - cp:], body], axis=0) if cp else body
    return with_cp.T.reshape(-1)


def ofdm_demodulate(samples, n_fft: int, active, n_symbols: int, cp_fraction: float,
                    fft_offset: int = 0) -> ResourceGrid:
    """Inverse of :func:`ofdm_modulate`.

    ``fft_offset`` moves the FFT window that many samples earlier into the
    cyclic prefix; the resulting linear phase ramp is removed, so noiseless
    input still round-trips exactly while up to ``fft_offset`` samples of
    pre-echo and ``cp - fft_offset`` samples of delay are tolerated.
    """
    _check_grid_geometry(n_fft, active, cp_fraction)
    samples = np.asarray(samples, dtype=np.complex128)
    cp = int(math.floor(cp_fraction * n_fft))
    sym_len = n_fft + cp
    if samples.size != n_symbols * sym_len:
        raise InputShapeError(
            f"expected {n_symbols * sym_len} samples for {n_symbols} symbols, got {samples.size}")
    if not 0 <= fft_offset <= cp:
        raise ConfigurationError("fft_offset must lie within the cyclic prefix")
    blocks = samples.reshape(n_symbols, sym_len)
    start = cp - fft_offset
    spec = sfft.fft(blocks[:, start:start + n_fft], axis=1, norm="ortho").T
    if fft_offset:
        k = np.arange(n_fft)
        spec *= np.exp(2j * np.pi * k * fft_offset / n_fft)[:, None]
    active = np.asarray(active, dtype=np.int64)
    data = np.zeros((n_fft, n_symbols), dtype=np.complex128)
    data[active] = spec[active]
    return ResourceGrid(data, active)


def _check_conversion(baseband_rate, f_c, sample_rate):
    if f_c - baseband_rate / 2 <= 0 or f_c + baseband_rate / 2 >= sample_rate / 2:
        raise ConfigurationError(
            f"band {f_c:.6g} +/- {baseband_rate / 2:.6g} Hz aliases at {sample_rate:.6g} S/s")


def passband_length(n: int, baseband_rate: float, sample_rate: float) -> int:
    ratio = _dsp.rate_ratio(sample_rate, baseband_rate)
    m = n * ratio
    if m.denominator != 1:
        raise ConfigurationError(
            f"{n} baseband samples do not span an integer number of passband samples; "
            f"pad to a multiple of {ratio.denominator}")
    return int(m)


def upconvert(baseband, baseband_rate: float, f_c: float, sample_rate: float,
              scale: float = 1.0) -> PassbandSignal:
    """Band-limited interpolation to ``sample_rate`` and mixing to ``f_c``:
    ``Re{scale * x(t) exp(j 2 pi f_c t)}`` with no power normalisation."""
    x = np.asarray(baseband, dtype=np.complex128)
    _check_conversion(baseband_rate, f_c, sample_rate)
    m = passband_length(x.size, baseband_rate, sample_rate)
    spec = _dsp.baseband_to_rspectrum(x, m, f_c, sample_rate, scale)
    if spec is not None:
        return PassbandSignal(sfft.irfft(spec, n=m), sample_rate)
    n = x.size
    X = sfft.fft(x)
    k = sfft.fftfreq(n, 1.0 / n).astype(int)
    big = np.zeros(m, dtype=np.complex128)
    big[k % m] = X
    up = sfft.ifft(big) * (scale * m / n)
    t = np.arange(m) / sample_rate
    return PassbandSignal(np.real(up * np.exp(2j * np.pi * f_c * t)), sample_rate)


def to_passband(baseband, baseband_rate: float, f_c: float, target_power_dbm: float,
                sample_rate: float) -> PassbandSignal:
    """Upconvert and scale so the record's average power is ``target_power_dbm``."""
    rf = upconvert(baseband, baseband_rate, f_c, sample_rate)
    if target_power_dbm == -np.inf:
        return PassbandSignal(np.zeros_like(rf.samples), sample_rate)
    p = np.mean(rf.samples**2) / rf.impedance
    if p == 0:
        raise ConfigurationError("cannot scale an all-zero signal to a finite power")
    gain = math.sqrt(10 ** (target_power_dbm / 10) * 1e-3 / p)
    return PassbandSignal(rf.samples * gain, sample_rate)


def lowpass_design(bandwidth_hz: float, out_rate: float, atten_db: float = 70.0):
    """Kaiser-window FIR used by :func:`from_passband`.

    Transition band 0.1 * out_rate wide starting 0.02 * out_rate above B/2
    (so the outermost subcarriers see no droop), 70 dB stopband attenuation.
    Returned as taps at ``out_rate``.
    """
    width = 0.1 * out_rate
    numtaps, beta = signal.kaiserord(atten_db, width / (out_rate / 2))
    numtaps |= 1
    cutoff = min(bandwidth_hz / 2 + 0.02 * out_rate + width / 2, 0.499 * out_rate)
    return signal.firwin(numtaps, cutoff, window=("kaiser", beta), fs=out_rate)


def lowpass_gain(bandwidth_hz: float, out_rate: float, n_out: int) -> np.ndarray:
    """Zero-phase magnitude of :func:`lowpass_design` on the ``n_out``-point FFT grid."""
    taps = lowpass_design(bandwidth_hz, out_rate)
    freqs = sfft.fftfreq(n_out, 1.0 / out_rate)
    _, h = signal.freqz(taps, worN=freqs, fs=out_rate)
    return np.abs(h)


def from_passband(rf: PassbandSignal, f_c: float, out_rate: float,
                  bandwidth_hz: float) -> np.ndarray:
    """Mix by exp(-j 2 pi f_c t), lowpass to B/2 and decimate to ``out_rate``.

    Decimation is by spectral truncation (an ideal anti-alias stage); the
    in-band shaping is the zero-phase Kaiser FIR of :func:`lowpass_design`.
    """
    if out_rate < 1.25 * bandwidth_hz:
        raise ConfigurationError(
            f"out_rate {out_rate:.6g} below 1.25 x bandwidth {bandwidth_hz:.6g}")
    m = len(rf)
    n_out = _dsp.rate_ratio(out_rate, rf.sample_rate) * m
    if n_out.denominator != 1:
        raise ConfigurationError("record does not span an integer number of output samples")
    n_out = int(n_out)
    gain = lowpass_gain(bandwidth_hz, out_rate, n_out)
    if _dsp.carrier_bin(f_c, m, rf.sample_rate) is not None:
        spec = sfft.rfft(rf.samples)
        return _dsp.rspectrum_to_baseband(spec, m, f_c, rf.sample_rate, n_out, gain)
    t = np.arange(m) / rf.sample_rate
    Z = sfft.fft(rf.samples * np.exp(-2j * np.pi * f_c * t))
    k = sfft.fftfreq(n_out, 1.0 / n_out).astype(int)
    return sfft.ifft(Z[k % m] * (2.0 * n_out / m) * gain)


def measure_power_dbm(rf: PassbandSignal) -> float:
    """Average power into the signal's impedance, in dBm (-inf for silence)."""
    v = np.asarray(rf.samples)
    if v.size == 0:
        raise InputShapeError("cannot measure the power of an empty signal")
    p = float(np.mean(v**2)) / rf.impedance
    if p == 0.0:
        return -math.inf
    return 10.0 * math.log10(p / 1e-3)


def evm_percent(rx, ref) -> float:
    """RMS error vector magnitude normalised by the reference RMS, in percent."""
    rx = np.asarray(rx).ravel()
    ref = np.asarray(ref).ravel()
    if rx.size != ref.size:
        raise InputShapeError(f"length mismatch: {rx.size} vs {ref.size}")
    den = np.sum(np.abs(ref) ** 2)
    if den == 0:
        raise InputShapeError("reference symbols are all zero")
    return float(100.0 * np.sqrt(np.sum(np.abs(rx - ref) ** 2) / den))
