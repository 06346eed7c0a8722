"""Baseband signal synthesis: digital modulation, root-raised-cosine pulse
shaping, and packet assembly."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, ZeroSignal

DEFAULT_SAMPLE_RATE = 1e6  # Hz


class Modulation(str, enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"
    PSK8 = "8psk"
    QAM16 = "16qam"
    QAM64 = "64qam"


class DataMode(str, enum.Enum):
    RANDOM = "random"  # fresh symbols every packet ("df")
    SAME = "same"      # one fixed packet reused forever ("sm")


@dataclass(frozen=True)
class ComplexSignal:
    """A buffer of complex baseband samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.complex128)
        )


@dataclass(frozen=True)
class PacketSpec:
    length_symbols: int = 8192
    modulation: Modulation = Modulation.QPSK
    sps: int = 2
    rrc_beta: float = 0.2
    rrc_span: int = 10
    data_mode: DataMode = DataMode.RANDOM
    same_seed: int = 0
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if self.length_symbols < self.rrc_span:
            raise ValueError("length_symbols must be >= rrc_span")
        if self.sps < 1:
            raise ValueError("sps must be >= 1")
        if not 0.0 < self.rrc_beta <= 1.0:
            raise ValueError("rrc_beta must be in (0, 1]")


def _gray(n):
    return n ^ (n >> 1)


def _psk_constellation(m, rotate=0.0):
    pts = np.empty(m, dtype=complex)
    for pos in range(m):
        pts[_gray(pos)] = np.exp(1j * (2 * np.pi * pos / m + rotate))
    return pts


def _square_qam_constellation(levels):
    # Per-axis Gray coding; index packs (i_bits << b) | q_bits.
    b = levels.bit_length() - 1
    amp = np.empty(levels, dtype=float)
    for pos in range(levels):
        amp[_gray(pos)] = 2 * pos - (levels - 1)
    pts = np.empty(levels * levels, dtype=complex)
    for i in range(levels):
        for q in range(levels):
            pts[(i << b) | q] = amp[i] + 1j * amp[q]
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


CONSTELLATIONS = {
    Modulation.BPSK: np.array([1.0 + 0j, -1.0 + 0j]),
    Modulation.QPSK: _psk_constellation(4, rotate=np.pi / 4),
    Modulation.PSK8: _psk_constellation(8),
    Modulation.QAM16: _square_qam_constellation(4),
    Modulation.QAM64: _square_qam_constellation(8),
}


def modulate(symbol_indices, modulation: Modulation) -> np.ndarray:
    """Map symbol indices onto the Gray-coded, unit-average-power constellation."""
    const = CONSTELLATIONS[Modulation(modulation)]
    idx = np.asarray(symbol_indices)
    if idx.size and (idx.min() < 0 or idx.max() >= len(const)):
        raise IndexOutOfRange(
            f"symbol index outside [0, {len(const)}) for {modulation}"
        )
    return const[idx]


def demodulate(symbols, modulation: Modulation) -> np.ndarray:
    """Nearest-constellation-point hard decision, inverse of modulate."""
    const = CONSTELLATIONS[Modulation(modulation)]
    d = np.abs(np.asarray(symbols)[:, None] - const[None, :])
    return np.argmin(d, axis=1)


def rrc_taps(beta: float, sps: int, span: int) -> np.ndarray:
    """Root-raised-cosine taps: span*sps + 1 of them, symmetric, unit energy.

    Singular points of the closed form (t = 0 and |t| = 1/(4*beta)) use
    their analytic limits.
    """
    n = span * sps
    t = (np.arange(n + 1) - n / 2) / sps  # in symbol periods
    h = np.empty(len(t))
    for i, ti in enumerate(t):
        if ti == 0.0:
            h[i] = 1.0 + beta * (4.0 / np.pi - 1.0)
        elif abs(abs(ti) - 1.0 / (4.0 * beta)) < 1e-12:
            h[i] = (beta / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
            )
        else:
            num = np.sin(np.pi * ti * (1 - beta)) + 4 * beta * ti * np.cos(
                np.pi * ti * (1 + beta)
            )
            den = np.pi * ti * (1 - (4 * beta * ti) ** 2)
            h[i] = num / den
    return h / np.sqrt(np.sum(h * h))


def pulse_shape(symbols, taps, sps, sample_rate=DEFAULT_SAMPLE_RATE) -> ComplexSignal:
    """Upsample by zero insertion, filter, and trim the group-delay transient
    so the output is exactly len(symbols)*sps samples."""
    symbols = np.asarray(symbols, dtype=complex)
    up = np.zeros(len(symbols) * sps, dtype=complex)
    up[::sps] = symbols
    full = np.convolve(up, taps)
    gd = (len(taps) - 1) // 2
    return ComplexSignal(full[gd : gd + len(up)], sample_rate)


def normalize_peak(signal: ComplexSignal) -> ComplexSignal:
    """Scale so the largest sample magnitude is exactly 1."""
    peak = np.max(np.abs(signal.samples)) if signal.samples.size else 0.0
    if peak == 0.0:
        raise ZeroSignal("cannot peak-normalize an all-zero signal")
    return ComplexSignal(signal.samples / peak, signal.sample_rate)


def make_packet(spec: PacketSpec, rng: np.random.Generator) -> ComplexSignal:
    """Synthesize one peak-normalized packet per the spec.

    RANDOM mode draws fresh symbols from rng; SAME mode always produces the
    fixed packet determined by spec.same_seed (rng untouched).
    """
    m = len(CONSTELLATIONS[spec.modulation])
    if spec.data_mode is DataMode.SAME:
        source = np.random.default_rng(spec.same_seed)
    else:
        source = rng
    indices = source.integers(0, m, size=spec.length_symbols)
    taps = rrc_taps(spec.rrc_beta, spec.sps, spec.rrc_span)
    shaped = pulse_shape(modulate(indices, spec.modulation), taps, spec.sps,
                         spec.sample_rate)
    return normalize_peak(shaped)


def dump_iq(path, signal: ComplexSignal):
    """Raw interleaved float32 I/Q file, little-endian, I then Q."""
    inter = np.empty(2 * len(signal.samples), dtype="<f4")
    inter[0::2] = signal.samples.real
    inter[1::2] = signal.samples.imag
    inter.tofile(path)


def load_iq(path, sample_rate=DEFAULT_SAMPLE_RATE) -> ComplexSignal:
    inter = np.fromfile(path, dtype="<f4")
    return ComplexSignal(inter[0::2] + 1j * inter[1::2], sample_rate)
