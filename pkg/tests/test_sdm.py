import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebit_dmimo.errors import ConfigurationError, InputShapeError
from onebit_dmimo.sdm import (BitStream, FilterSpec, dump_bitstream, load_bitstream,
                              reconstruct, sdm_encode, triangle_dither)
from onebit_dmimo.waveform import PassbandSignal, measure_power_dbm

FS = 25e9


def inband_sndr_db(bits, f0, band, fs):
    """Windowed-periodogram SNDR of a tone at f0 inside [lo, hi]; the tone
    occupies +/-4 bins around its peak (Blackman-Harris main lobe)."""
    from scipy.signal.windows import blackmanharris
    v = bits.bipolar()
    w = blackmanharris(v.size)
    p = np.abs(np.fft.rfft(v * w)) ** 2
    f = np.fft.rfftfreq(v.size, 1 / fs)
    k0 = int(round(f0 / fs * v.size))
    sig = p[k0 - 4:k0 + 5].sum()
    inband = (f >= band[0]) & (f <= band[1])
    inband[k0 - 4:k0 + 5] = False
    inband[:5] = False
    return 10 * np.log10(sig / p[inband].sum())


class TestTriangle:
    def test_peak_amplitude(self):
        tri = triangle_dither(76e6, -2.0, FS, 100_000)
        # P = V_pk^2 / 3 / R
        assert np.max(np.abs(tri.samples)) == pytest.approx(0.3076, abs=2e-4)

    def test_power(self):
        tri = triangle_dither(76e6, -2.0, FS, 200_000)
        assert measure_power_dbm(tri) == pytest.approx(-2.0, abs=0.05)

    def test_period(self):
        assert FS / 76e6 == pytest.approx(328.95, abs=0.01)
        tri = triangle_dither(76e6, -2.0, FS, 4000)
        rising = np.flatnonzero((tri.samples[:-1] < 0) & (tri.samples[1:] >= 0))
        assert np.mean(np.diff(rising)) == pytest.approx(328.95, abs=0.5)

    def test_starts_at_zero_rising(self):
        tri = triangle_dither(76e6, -2.0, FS, 10)
        assert tri.samples[0] == 0.0
        assert tri.samples[1] > 0

    def test_nyquist(self):
        with pytest.raises(ConfigurationError):
            triangle_dither(13e9, -2.0, FS, 10)


class TestFilterSpec:
    def test_bandpass_below_dc(self):
        with pytest.raises(ConfigurationError):
            FilterSpec("bandpass", 100e6, 40e6)

    def test_nonpositive_bandwidth(self):
        with pytest.raises(ConfigurationError):
            FilterSpec("lowpass", 0.0)

    def test_cutoff_is_3db(self):
        lp = FilterSpec("lowpass", 180e6)
        bp = FilterSpec("bandpass", 100e6, 2.35e9)
        assert lp.response(np.array([180e6]))[0] == pytest.approx(2 ** -0.5)
        # lowpass-to-bandpass transform: -3 dB where (f^2 - f0^2) / (f B) = +/-1
        b, f0 = 100e6, 2.35e9
        root = math.sqrt(b**2 + 4 * f0**2)
        edges = bp.response(np.array([(root - b) / 2, (root + b) / 2]))
        np.testing.assert_allclose(edges, 2 ** -0.5, rtol=1e-12)
        assert (root + b) / 2 - (root - b) / 2 == pytest.approx(b)
        assert bp.response(np.array([2.35e9]))[0] == pytest.approx(1.0)

    def test_default_order_rejection(self):
        # 4th-order Butterworth: 10 log10(1 + 2^8) = 24.1 dB at twice the cutoff
        lp = FilterSpec("lowpass", 180e6)
        att = -20 * np.log10(lp.response(np.array([360e6]))[0])
        assert att == pytest.approx(10 * math.log10(1 + 2**8), abs=1e-9)


class TestEncode:
    def test_alphabet_and_determinism(self, rng):
        x = PassbandSignal(0.1 * rng.standard_normal(5000), FS)
        a = sdm_encode(x)
        b = sdm_encode(x)
        assert set(np.unique(a.bits)) <= {0, 1}
        np.testing.assert_array_equal(a.bits, b.bits)

    def test_zero_input_balance(self):
        bits = sdm_encode(PassbandSignal(np.zeros(1_000_000), FS))
        assert abs(bits.bipolar().mean()) < 0.01

    def test_clipping_is_logged(self, caplog):
        with caplog.at_level("WARNING"):
            sdm_encode(PassbandSignal(np.full(100, 1.0), FS))
        assert "clipping" in caplog.text

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            sdm_encode(PassbandSignal(np.zeros(4), FS), "highpass")

    def test_bandpass_needs_band(self):
        with pytest.raises(ConfigurationError):
            sdm_encode(PassbandSignal(np.zeros(4), FS), "bandpass")

    @pytest.mark.parametrize("osr", [64, 128])
    def test_lowpass_sndr(self, osr):
        n = 1 << 17
        fs = 1.0
        band = fs / (2 * osr)
        f0 = round(band / 3 * n) / n
        x = PassbandSignal(0.5 * 0.4 * np.sin(2 * np.pi * f0 * np.arange(n)), fs)
        bits = sdm_encode(x, "lowpass")
        assert inband_sndr_db(bits, f0, (0.0, band), fs) >= 35

    def test_bandpass_sndr(self):
        n = 1 << 17
        fs = 1.0
        f_c = 0.094  # same ratio as 2.35 GHz at 25 GS/s
        osr = 128
        half = fs / (4 * osr)
        f0 = round((f_c + half / 3) * n) / n
        band = FilterSpec("bandpass", 2 * half, f_c)
        x = PassbandSignal(0.5 * 0.4 * np.sin(2 * np.pi * f0 * np.arange(n)), fs)
        bits = sdm_encode(x, "bandpass", band)
        assert inband_sndr_db(bits, f0, (f_c - half, f_c + half), fs) >= 35

    def test_noise_shaping_monotone_in_osr(self):
        n = 1 << 17
        fs = 1.0
        f0 = 64 / n
        x = PassbandSignal(0.2 * np.sin(2 * np.pi * f0 * np.arange(n)), fs)
        v = sdm_encode(x).bipolar() * 0.4 - x.samples
        p = np.abs(np.fft.rfft(v)) ** 2
        f = np.fft.rfftfreq(n, 1 / fs)
        noise = [p[(f > 0) & (f <= fs / (2 * osr))].sum() for osr in (16, 32, 64, 128)]
        assert all(a > b for a, b in zip(noise[:-1], noise[1:]))


class TestReconstruct:
    def test_constant_ones(self):
        bits = BitStream(np.ones(4096, np.uint8), FS, 0.4)
        out = reconstruct(bits, FilterSpec("lowpass", 180e6))
        assert out.samples.mean() == pytest.approx(0.4, rel=1e-9)

    def test_triangle_in_band_nmse(self):
        n = 1 << 18
        lpf = FilterSpec("lowpass", 180e6)
        tri = triangle_dither(76e6, 0.0, FS, n)
        tri.samples *= 0.5 * 0.4 / np.max(np.abs(tri.samples))
        rec = reconstruct(sdm_encode(tri), lpf)
        spec = np.fft.rfft(tri.samples) * lpf.response(np.fft.rfftfreq(n, 1 / FS))
        ideal = np.fft.irfft(spec, n=n)
        nmse = np.sum((rec.samples - ideal) ** 2) / np.sum(ideal**2)
        assert 10 * np.log10(nmse) < -30

    def test_out_of_band_tone_rejection(self):
        # an 8th-order design gives 48 dB at twice the cutoff; see the
        # default-order figure in TestFilterSpec
        n = 1 << 16
        cutoff = 180e6
        lpf = FilterSpec("lowpass", cutoff, order=8)
        f_bin = round(2 * cutoff / FS * n)
        tone = np.sin(2 * np.pi * f_bin * np.arange(n) / n)
        bits = BitStream((tone > 0).astype(np.uint8), FS, 0.4)
        raw = np.abs(np.fft.rfft(bits.bipolar() * 0.4))[f_bin]
        out = np.abs(np.fft.rfft(reconstruct(bits, lpf).samples))[f_bin]
        assert 20 * np.log10(raw / out) >= 40

    def test_band_beyond_nyquist(self):
        bits = BitStream(np.ones(16, np.uint8), 1e9)
        with pytest.raises(ConfigurationError):
            reconstruct(bits, FilterSpec("lowpass", 600e6))


class TestDump:
    def test_round_trip_and_header(self, tmp_path, rng):
        bits = BitStream(rng.integers(0, 2, size=1001), FS)
        path = tmp_path / "b.bin"
        dump_bitstream(bits, path)
        raw = path.read_bytes()
        assert raw[:8] == b"1BITSTRM"
        assert int.from_bytes(raw[8:16], "little") == int(FS)
        assert len(raw) == 16 + math.ceil(1001 / 8)
        back = load_bitstream(path, n_bits=1001)
        np.testing.assert_array_equal(back.bits, bits.bits)
        assert back.sample_rate == FS

    def test_lsb_first(self, tmp_path):
        path = tmp_path / "b.bin"
        dump_bitstream(BitStream([1, 0, 0, 0, 0, 0, 0, 0, 0, 1], 1e9), path)
        assert path.read_bytes()[16:] == bytes([0x01, 0x02])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"0" * 20)
        with pytest.raises(InputShapeError):
            load_bitstream(path)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=300))
    def test_round_trip_property(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("d") / "b.bin"
        dump_bitstream(BitStream(values, 1e9), path)
        np.testing.assert_array_equal(load_bitstream(path, len(values)).bits, values)

    def test_two_level_values_only(self):
        with pytest.raises(InputShapeError):
            BitStream([0, 2], 1e9)
