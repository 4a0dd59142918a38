"""Frame simulation and sweeps.

All passband processing works on one-sided spectra of the full frame record:
UE signals are placed around the carrier bin, links become linear-phase
weights, the RRH front end runs on the spectrum until the comparator needs
time samples, and the CU reads the baseband bins back out of the rfft of the
returned bit stream. Each RRH chain draws from its own RNG stream derived from
(master seed, sweep index, frame, purpose, index), so results do not depend on
the execution schedule or the number of worker threads.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .. import _dsp
from ..cu import ChannelEstimate, combine, estimate_channel_ls, pilot_schedule, precode
from ..errors import SimulationError
from ..frontend import AmplifierSpec, filter_response, uplink_spectrum_chain
from ..sdm import DEFAULT_FULL_SCALE, sdm_encode
from ..waveform import (IMPEDANCE, EvmReport, OfdmConfig, PassbandSignal, ResourceGrid,
                        lowpass_gain, map_qam16, ofdm_demodulate, ofdm_modulate,
                        random_qpsk)
from .scenario import Scenario

LEAD_GUARD = 32
MIN_TAIL_GUARD = 32

_PAYLOAD, _RRH, _UE_RX, _PILOT = 0, 1, 2, 3


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass
class FrameLayout:
    """Baseband frame of ``n_symbols`` OFDM symbols inside a record of ``length``
    samples: ``LEAD_GUARD`` silent samples, the symbols, then a silent tail."""

    ofdm: OfdmConfig
    n_symbols: int
    length: int
    m: int

    @classmethod
    def build(cls, ofdm: OfdmConfig, n_symbols: int, s: Scenario) -> "FrameLayout":
        body = n_symbols * ofdm.symbol_len
        n = _dsp.aligned_length(body + LEAD_GUARD + MIN_TAIL_GUARD, ofdm.sample_rate,
                                s.sample_rate, s.sim_carrier)
        m = int(_dsp.rate_ratio(s.sample_rate, ofdm.sample_rate) * n)
        return cls(ofdm, n_symbols, n, m)

    @property
    def body(self) -> slice:
        return slice(LEAD_GUARD, LEAD_GUARD + self.n_symbols * self.ofdm.symbol_len)

    def embed(self, samples: np.ndarray) -> np.ndarray:
        out = np.zeros(self.length, dtype=np.complex128)
        out[self.body] = samples
        return out

    def demodulate(self, baseband: np.ndarray) -> ResourceGrid:
        o = self.ofdm
        return ofdm_demodulate(baseband[self.body], o.n_fft, o.active, self.n_symbols,
                               o.cp_fraction, fft_offset=o.cp_len // 2)


@functools.lru_cache(maxsize=32)
def _cu_gain(bandwidth_hz: float, out_rate: float, n_out: int) -> np.ndarray:
    g = lowpass_gain(bandwidth_hz, out_rate, n_out)
    g.flags.writeable = False
    return g


@functools.lru_cache(maxsize=512)
def _link_phase(m: int, sample_rate: float, lo: int, hi: int, delay: float) -> np.ndarray:
    freqs = np.arange(lo, hi) * (sample_rate / m)
    ph = np.exp(-2j * np.pi * freqs * delay)
    ph.flags.writeable = False
    return ph


class _Spectrum:
    """rfft of a real record that is nonzero only on bins [lo, hi)."""

    def __init__(self, m: int, lo: int, values: np.ndarray):
        self.m, self.lo, self.values = m, lo, values

    @property
    def hi(self) -> int:
        return self.lo + self.values.size

    def full(self) -> np.ndarray:
        out = np.zeros(self.m // 2 + 1, dtype=np.complex128)
        out[self.lo:self.hi] = self.values
        return out


def _passband_spectrum(x: np.ndarray, layout: FrameLayout, s: Scenario,
                       amplitude: float) -> _Spectrum:
    """Spectrum of ``Re{amplitude * x(t) exp(j 2 pi f_c t)}`` at the fronthaul rate."""
    m = layout.m
    spec = _dsp.baseband_to_rspectrum(x, m, s.sim_carrier, s.sample_rate, amplitude)
    if spec is None:
        from ..waveform import upconvert
        spec = sfft.rfft(upconvert(x, layout.ofdm.sample_rate, s.sim_carrier, s.sample_rate,
                                   amplitude).samples)
        return _Spectrum(m, 0, spec)
    c = _dsp.carrier_bin(s.sim_carrier, m, s.sample_rate)
    n = x.size
    lo = c - n // 2
    return _Spectrum(m, lo, spec[lo:lo + n].copy())


def _to_baseband(spec: np.ndarray, layout: FrameLayout, s: Scenario) -> np.ndarray:
    o = layout.ofdm
    gain = _cu_gain(o.bandwidth_hz, o.sample_rate, layout.length)
    out = _dsp.rspectrum_to_baseband(spec, layout.m, s.sim_carrier, s.sample_rate,
                                     layout.length, gain)
    if out is None:
        t = np.arange(layout.m) / s.sample_rate
        Z = sfft.fft(sfft.irfft(spec, n=layout.m) * np.exp(-2j * np.pi * s.sim_carrier * t))
        k = sfft.fftfreq(layout.length, 1.0 / layout.length).astype(int)
        out = sfft.ifft(Z[k % layout.m] * (2.0 * layout.length / layout.m) * gain)
    return out


def _amplitude_for(power_dbm: float, ofdm: OfdmConfig) -> float:
    """Passband scale giving ``power_dbm`` while unit-energy symbols are on air."""
    if power_dbm == -math.inf:
        return 0.0
    p_w = 10 ** (power_dbm / 10) * 1e-3
    return math.sqrt(2.0 * IMPEDANCE * p_w * ofdm.n_fft / ofdm.n_active)


def _mix(sources: list[_Spectrum], weights, delays, layout: FrameLayout,
         s: Scenario) -> _Spectrum:
    """Sum of delayed, scaled source spectra (one radio head's antenna signal)."""
    lo = min(src.lo for src in sources)
    hi = max(src.hi for src in sources)
    acc = np.zeros(hi - lo, dtype=np.complex128)
    for src, a, tau in zip(sources, weights, delays):
        ph = _link_phase(layout.m, s.sample_rate, src.lo, src.hi, float(tau))
        acc[src.lo - lo:src.hi - lo] += (a * src.values) * ph
    return _Spectrum(layout.m, lo, acc)


@dataclass
class FrameResult:
    """Per-UE error and reference energy of one frame (for pooled EVM)."""

    err: np.ndarray
    ref: np.ndarray
    rx_power_dbm: np.ndarray
    extras: dict

    def evm(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return 100.0 * np.sqrt(self.err / self.ref)


def _pilots(s: Scenario, ofdm: OfdmConfig, owner: int, n: int) -> np.ndarray:
    """Seeded full-band QPSK pilots, fixed per owner (UE or RRH index)."""
    return random_qpsk(ofdm.n_active * n, _rng(s.seed, _PILOT, owner)).reshape(
        ofdm.n_active, n)


def _map_parallel(fn, items, workers):
    if workers is not None and workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _uplink_frame(s: Scenario, sweep_idx: int, frame: int, workers) -> FrameResult:
    ofdm = s.ofdm()
    n_ue, n_rrh = s.n_ue, s.n_rrh
    n_pilot_sym = s.n_pilots * n_ue
    layout = FrameLayout.build(ofdm, n_pilot_sym + s.n_data, s)
    schedule = pilot_schedule(n_ue, s.n_pilots)
    data_slots = np.arange(n_pilot_sym, n_pilot_sym + s.n_data)

    refs, data_syms, spectra = [], [], []
    for k in range(n_ue):
        grid = np.zeros((ofdm.n_active, layout.n_symbols), dtype=np.complex128)
        grid[:, schedule[k]] = _pilots(s, ofdm, k, s.n_pilots)
        bits = _rng(s.seed, sweep_idx, frame, _PAYLOAD, k).integers(
            0, 2, size=4 * ofdm.n_active * s.n_data)
        data = map_qam16(bits).reshape(ofdm.n_active, s.n_data)
        grid[:, data_slots] = data
        rg = ResourceGrid.from_active(grid, ofdm)
        refs.append(rg)
        data_syms.append(data)
        x = layout.embed(ofdm_modulate(rg, ofdm.cp_fraction))
        spectra.append(_passband_spectrum(x, layout, s, _amplitude_for(s.ue_power_dbm[k], ofdm)))

    amp, delay = s.links()
    cfg = s.frontend_config()

    def run_rrh(i):
        rng = _rng(s.seed, sweep_idx, frame, _RRH, i)
        y = _mix(spectra, amp[i], delay[i], layout, s)
        try:
            out, info = uplink_spectrum_chain(y.full(), layout.m, s.sample_rate, cfg, rng)
        except SimulationError as exc:
            raise type(exc)(f"RRH {i}: {exc}") from exc
        spec = out if isinstance(out, np.ndarray) else sfft.rfft(out.bipolar())
        return layout.demodulate(_to_baseband(spec, layout, s)), info

    results = _map_parallel(run_rrh, range(n_rrh), workers)
    rx_grids = [r[0] for r in results]
    infos = [r[1] for r in results]

    pilot_ref = []
    for k in range(n_ue):
        g = np.zeros((ofdm.n_active, layout.n_symbols), dtype=np.complex128)
        g[:, schedule[k]] = refs[k].active_data[:, schedule[k]]
        pilot_ref.append(ResourceGrid.from_active(g, ofdm))
    est = estimate_channel_ls(rx_grids, pilot_ref, schedule)
    try:
        est_out = combine(est, rx_grids, s.combiner, symbols=data_slots)
    except SimulationError as exc:
        raise type(exc)(f"{s.name}: combining failed: {exc}") from exc
    err = np.empty(n_ue)
    ref = np.empty(n_ue)
    for k in range(n_ue):
        rx = est_out[k].active_data
        err[k] = np.sum(np.abs(rx - data_syms[k]) ** 2)
        ref[k] = np.sum(np.abs(data_syms[k]) ** 2)
    rx_power = np.array([inf["antenna_power_dbm"] for inf in infos])
    extras = {"vga_gain_db": [inf["vga_gain_db"] for inf in infos],
              "p_y1_dbm": [inf["p_y1_dbm"] for inf in infos]}
    return FrameResult(err, ref, rx_power, extras)


def _dl_transmit(grids: list[ResourceGrid], layout: FrameLayout, s: Scenario,
                 amplitude: float, sdm_norm: float) -> list[_Spectrum]:
    """CU baseband -> bandpass sigma-delta bits -> RRH BPF -> fixed PA gain.

    ``sdm_norm`` maps passband volts onto the modulator input; the PA gain
    undoes it, so the radiated signal is the intended one plus the in-band
    residue of the shaped quantization noise. In ``inf_bit`` mode the modulator
    is bypassed and the RRH filters the exact waveform.
    """
    cfg = s.frontend_config()
    ofdm = layout.ofdm
    m = layout.m
    bpf = filter_response(cfg.bpf, m, float(s.sample_rate))
    out = []
    for g in grids:
        x = layout.embed(ofdm_modulate(g, ofdm.cp_fraction))
        spec = _passband_spectrum(x, layout, s, amplitude).full()
        if s.mode == "inf_bit":
            out.append(_Spectrum(m, 0, spec * bpf))
            continue
        v = PassbandSignal(sfft.irfft(spec, n=m) * sdm_norm, s.sample_rate)
        bits = sdm_encode(v, "bandpass", cfg.bpf)
        tx = sfft.rfft(bits.bipolar() * bits.full_scale) * bpf / sdm_norm
        out.append(_Spectrum(m, 0, tx))
    return out


def _dl_receive(tx: list[_Spectrum], amp_col, delay_col, layout: FrameLayout, s: Scenario,
                rng: np.random.Generator) -> ResourceGrid:
    y = _mix(tx, amp_col, delay_col, layout, s).full()
    ue = AmplifierSpec(0.0, s.ue_noise_temp_k, s.ue_noise_bandwidth_hz, s.carrier_hz).scaled(
        s.scale)
    y += _dsp.noise_spectrum(layout.m, s.sample_rate, ue.noise_power_w, IMPEDANCE, ue.band, rng)
    return layout.demodulate(_to_baseband(y, layout, s))


def _downlink_frame(s: Scenario, sweep_idx: int, frame: int, workers) -> FrameResult:
    ofdm = s.ofdm()
    n_ue, n_rrh = s.n_ue, s.n_rrh
    amp, delay = s.links()
    unit = _amplitude_for(0.0, ofdm) * math.sqrt(ofdm.n_active / ofdm.n_fft)
    # modulator input RMS for an RRH at the nominal power
    nominal = math.sqrt(10 ** (s.rrh_power_dbm / 10) * 1e-3 * IMPEDANCE)
    sdm_norm = s.dl_sdm_rms * DEFAULT_FULL_SCALE / nominal

    # sounding: RRHs take turns sending full-power pilots
    n_p = s.dl_pilots_per_rrh
    sound = FrameLayout.build(ofdm, n_p * n_rrh, s)
    schedule = pilot_schedule(n_rrh, n_p)
    sound_grids, pilot_ref = [], []
    p_amp = _amplitude_for(s.rrh_power_dbm, ofdm)
    for i in range(n_rrh):
        g = np.zeros((ofdm.n_active, sound.n_symbols), dtype=np.complex128)
        g[:, schedule[i]] = _pilots(s, ofdm, 1000 + i, n_p)
        rg = ResourceGrid.from_active(g, ofdm)
        sound_grids.append(rg)
        pilot_ref.append(rg)
    tx_sound = _dl_transmit(sound_grids, sound, s, p_amp, sdm_norm)
    H = np.empty((ofdm.n_active, n_rrh, n_ue), dtype=np.complex128)
    for k in range(n_ue):
        rng = _rng(s.seed, sweep_idx, frame, _UE_RX, 2 * k)
        rx = _dl_receive(tx_sound, amp[:, k], delay[:, k], sound, s, rng)
        # UE k sees every RRH as a "user" of its own pilot slots
        est_k = estimate_channel_ls([rx], pilot_ref, schedule)
        H[:, :, k] = est_k.H[:, 0, :]
    # CSI fed back without error, normalised to the unit-power transmit scale
    est = ChannelEstimate(H * (unit / p_amp), ofdm.active, ofdm.n_fft)

    data_layout = FrameLayout.build(ofdm, 1 + s.n_data, s)
    dmrs, data_syms, s_grids = [], [], []
    for k in range(n_ue):
        d = _pilots(s, ofdm, 2000 + k, 1)
        bits = _rng(s.seed, sweep_idx, frame, _PAYLOAD, k).integers(
            0, 2, size=4 * ofdm.n_active * s.n_data)
        data = map_qam16(bits).reshape(ofdm.n_active, s.n_data)
        dmrs.append(d)
        data_syms.append(data)
        s_grids.append(ResourceGrid.from_active(np.hstack([d, data]), ofdm))
    try:
        x_grids, _ = precode(est, s_grids, s.precoder, s.rrh_power_dbm)
    except SimulationError as exc:
        raise type(exc)(f"{s.name}: precoding failed: {exc}") from exc
    tx_data = _dl_transmit(x_grids, data_layout, s, unit, sdm_norm)
    err = np.empty(n_ue)
    ref = np.empty(n_ue)
    rx_power = np.empty(n_ue)
    for k in range(n_ue):
        rng = _rng(s.seed, sweep_idx, frame, _UE_RX, 2 * k + 1)
        rx = _dl_receive(tx_data, amp[:, k], delay[:, k], data_layout, s, rng)
        Y = rx.active_data
        h_eff = Y[:, :1] / dmrs[k]
        eq = Y[:, 1:] / h_eff
        err[k] = np.sum(np.abs(eq - data_syms[k]) ** 2)
        ref[k] = np.sum(np.abs(data_syms[k]) ** 2)
        y_sig = _mix(tx_data, amp[:, k], delay[:, k], data_layout, s)
        rx_power[k] = 10 * math.log10(max(_dsp.spectrum_power(
            y_sig.full(), data_layout.m, IMPEDANCE), 1e-300) / 1e-3)
    return FrameResult(err, ref, rx_power, {"ue_rx_power_dbm": rx_power.tolist()})


def run_frame(s: Scenario, frame: int = 0, sweep_idx: int = 0,
              workers: int | None = None) -> EvmReport:
    """Simulate one frame and report per-UE EVM on its data symbols."""
    fr = _frame(s, sweep_idx, frame, workers)
    return EvmReport(fr.evm(), fr.rx_power_dbm, s.mode, fr.extras)


def _frame(s, sweep_idx, frame, workers) -> FrameResult:
    if s.direction == "uplink":
        return _uplink_frame(s, sweep_idx, frame, workers)
    return _downlink_frame(s, sweep_idx, frame, workers)


def run_point(s: Scenario, sweep_idx: int = 0, workers: int | None = None) -> EvmReport:
    """EVM pooled over ``s.n_frames`` frames (RMS over all data resource elements)."""
    err = np.zeros(s.n_ue)
    ref = np.zeros(s.n_ue)
    powers = []
    extras: dict = {"frames": []}
    for f in range(s.n_frames):
        fr = _frame(s, sweep_idx, f, workers)
        err += fr.err
        ref += fr.ref
        powers.append(fr.rx_power_dbm)
        extras["frames"].append(fr.extras)
    with np.errstate(divide="ignore", invalid="ignore"):
        evm = 100.0 * np.sqrt(err / ref)
    mean_w = np.mean(10 ** (np.array(powers) / 10), axis=0)
    with np.errstate(divide="ignore"):
        rx = 10 * np.log10(mean_w)
    return EvmReport(evm, rx, s.mode, extras)
