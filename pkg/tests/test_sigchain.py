import numpy as np
import pytest

from txid.errors import IndexOutOfRange, ZeroSignal
from txid.sigchain import (
    CONSTELLATIONS,
    ComplexSignal,
    DataMode,
    Modulation,
    PacketSpec,
    demodulate,
    dump_iq,
    load_iq,
    make_packet,
    modulate,
    normalize_peak,
    pulse_shape,
    rrc_taps,
)


class TestModulate:
    def test_bpsk_map(self):
        assert np.array_equal(modulate([0, 1], Modulation.BPSK),
                              np.array([1.0 + 0j, -1.0 + 0j]))

    @pytest.mark.parametrize("mod", list(Modulation))
    def test_unit_average_power(self, mod):
        const = CONSTELLATIONS[mod]
        assert np.mean(np.abs(const) ** 2) == pytest.approx(1.0, rel=1e-12)

    def test_qam16_magnitude_ratio(self):
        mags = np.abs(CONSTELLATIONS[Modulation.QAM16])
        assert mags.max() / mags.min() == pytest.approx(3.0, rel=1e-12)

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            modulate([4], Modulation.QPSK)

    @pytest.mark.parametrize("mod", list(Modulation))
    def test_demodulate_round_trip(self, mod):
        m = len(CONSTELLATIONS[mod])
        idx = np.arange(m)
        assert np.array_equal(demodulate(modulate(idx, mod), mod), idx)


class TestRrcTaps:
    def test_length_and_symmetry(self):
        taps = rrc_taps(0.2, 2, 10)
        assert len(taps) == 21
        assert np.allclose(taps, taps[::-1], atol=0)

    def test_unit_energy(self):
        taps = rrc_taps(0.2, 2, 10)
        assert abs(np.sum(taps**2) - 1.0) < 1e-12

    def test_zero_isi_self_convolution(self):
        # RRC convolved with itself is the raised cosine: (near) zero at
        # nonzero symbol multiples
        sps = 2
        rc = np.convolve(rrc_taps(0.2, sps, 10), rrc_taps(0.2, sps, 10))
        center = (len(rc) - 1) // 2
        # interior symbol lags; the lag at the truncation edge (k=5) carries
        # the unavoidable ~3e-3 truncation residual of any finite RRC
        k = np.arange(1, 5)
        isi = rc[center + k * sps]
        assert np.all(np.abs(isi) < 1e-3)
        assert rc[center] == pytest.approx(1.0, abs=1e-12)

    def test_isi_shrinks_with_span(self):
        sps = 2
        worst = []
        for span in (10, 40):
            rc = np.convolve(rrc_taps(0.2, sps, span), rrc_taps(0.2, sps, span))
            center = (len(rc) - 1) // 2
            k = np.arange(1, span // 2)
            worst.append(np.max(np.abs(rc[center + k * sps])))
        assert worst[1] < worst[0]
        assert rc[center] == pytest.approx(1.0, abs=1e-3)

    def test_singularity_handling(self):
        # with beta=0.25, |t| = 1/(4 beta) = 1 symbol lands on a tap
        taps = rrc_taps(0.25, 4, 8)
        assert np.all(np.isfinite(taps))


class TestPulseShape:
    def test_output_length(self):
        taps = rrc_taps(0.2, 2, 10)
        out = pulse_shape(np.ones(8192), taps, 2)
        assert len(out.samples) == 16384

    def test_impulse_response(self):
        taps = rrc_taps(0.2, 2, 4)
        sym = np.zeros(9, dtype=complex)
        sym[4] = 1.0
        out = pulse_shape(sym, taps, 2).samples
        # the full tap sequence appears centered on the impulse
        gd = (len(taps) - 1) // 2
        assert np.allclose(out[8 - gd : 8 - gd + len(taps)], taps, atol=1e-15)

    def test_all_zero(self):
        taps = rrc_taps(0.2, 2, 10)
        out = pulse_shape(np.zeros(64), taps, 2)
        assert np.all(out.samples == 0)


class TestMakePacket:
    def test_same_mode_bit_identical(self):
        spec = PacketSpec(length_symbols=256, data_mode=DataMode.SAME,
                          same_seed=9)
        rng = np.random.default_rng(0)
        a = make_packet(spec, rng)
        b = make_packet(spec, rng)
        assert np.array_equal(a.samples, b.samples)

    def test_random_mode_differs(self):
        spec = PacketSpec(length_symbols=256, data_mode=DataMode.RANDOM)
        rng = np.random.default_rng(0)
        a = make_packet(spec, rng)
        b = make_packet(spec, rng)
        assert not np.array_equal(a.samples, b.samples)

    def test_peak_normalized(self):
        spec = PacketSpec(length_symbols=256)
        sig = make_packet(spec, np.random.default_rng(1))
        assert abs(np.abs(sig.samples).max() - 1.0) < 1e-12

    def test_spectral_containment(self):
        # >= 99% of power within (1+beta)/2 of the symbol rate
        spec = PacketSpec(length_symbols=4096, sps=2, rrc_beta=0.2)
        sig = make_packet(spec, np.random.default_rng(3))
        spectrum = np.abs(np.fft.fft(sig.samples)) ** 2
        freqs = np.fft.fftfreq(len(spectrum))  # cycles/sample
        edge = (1 + spec.rrc_beta) / 2 / spec.sps
        in_band = spectrum[np.abs(freqs) <= edge].sum()
        assert in_band / spectrum.sum() >= 0.99

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            PacketSpec(length_symbols=4, rrc_span=10)
        with pytest.raises(ValueError):
            PacketSpec(rrc_beta=0.0)


class TestNormalizePeak:
    def test_basic(self):
        out = normalize_peak(ComplexSignal(np.array([0.5, 0.25j])))
        assert np.allclose(out.samples, [1.0, 0.5j])

    def test_idempotent(self):
        sig = normalize_peak(ComplexSignal(np.array([0.3, 0.1 + 0.2j])))
        again = normalize_peak(sig)
        assert np.allclose(sig.samples, again.samples, atol=1e-15)

    def test_zero_signal(self):
        with pytest.raises(ZeroSignal):
            normalize_peak(ComplexSignal(np.zeros(4)))


def test_iq_dump_round_trip(tmp_path):
    sig = make_packet(PacketSpec(length_symbols=64), np.random.default_rng(0))
    path = tmp_path / "pkt.iq"
    dump_iq(path, sig)
    back = load_iq(path)
    assert np.allclose(back.samples, sig.samples, atol=1e-7)
