"""Channel impairments: AWGN and the dynamic channel (timing error,
frequency error, block fading, then noise, in that order)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroSignal
from .sigchain import ComplexSignal


class ChannelKind(str, enum.Enum):
    AWGN = "awgn"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class ChannelConfig:
    kind: ChannelKind = ChannelKind.AWGN
    snr_db: float = 20.0  # math.inf disables noise
    interp_factor: int = 32
    cfo_std_hz: float = 1000.0
    n_taps: int = 3
    rayleigh_scale: float = 0.5

    def __post_init__(self):
        if self.interp_factor < 1:
            raise ValueError("interp_factor must be >= 1")
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        if self.rayleigh_scale <= 0:
            raise ValueError("rayleigh_scale must be > 0")


def awgn(signal: ComplexSignal, snr_db: float,
         rng: np.random.Generator) -> ComplexSignal:
    """Add circular complex Gaussian noise at the requested SNR, referenced
    to the empirical mean power of the input."""
    x = signal.samples
    if snr_db == math.inf:
        return ComplexSignal(x.copy(), signal.sample_rate)
    p_sig = np.mean(np.abs(x) ** 2)
    if p_sig == 0.0:
        raise ZeroSignal("cannot reference SNR to an all-zero signal")
    sigma2 = p_sig / 10.0 ** (snr_db / 10.0)
    noise = rng.normal(scale=np.sqrt(sigma2 / 2.0), size=(len(x), 2))
    return ComplexSignal(x + noise[:, 0] + 1j * noise[:, 1], signal.sample_rate)


# -- timing error ------------------------------------------------------------

_DELAY_HALF_WIDTH = 8  # taps per side of the windowed-sinc fractional delay


def fractional_delay(signal: ComplexSignal, offset: int,
                     interp_factor: int) -> ComplexSignal:
    """Delay by offset/interp_factor of a sample using a Blackman-windowed
    sinc (the single polyphase branch actually selected by the offset).

    offset = 0 is an exact identity. Output length equals input length;
    edges are implicitly zero-padded.
    """
    if not 0 <= offset < interp_factor:
        raise ValueError("offset must be in [0, interp_factor)")
    tau = offset / interp_factor
    c = _DELAY_HALF_WIDTH
    k = np.arange(2 * c + 1)
    # Blackman window evaluated at the (shifted) sinc peak, not the array
    # midpoint, so the branch keeps flat gain for every offset
    x = (k - c - tau) / (c + 1)
    window = 0.42 + 0.5 * np.cos(np.pi * x) + 0.08 * np.cos(2 * np.pi * x)
    window[np.abs(x) > 1.0] = 0.0
    taps = np.sinc(k - c - tau) * window
    out = np.convolve(signal.samples, taps)[c : c + len(signal.samples)]
    return ComplexSignal(out, signal.sample_rate)


def timing_offset(signal: ComplexSignal, interp_factor: int,
                  rng: np.random.Generator) -> ComplexSignal:
    """Random sub-sample timing error: conceptually interpolate by
    interp_factor, pick a uniform offset, and downsample."""
    d = int(rng.integers(0, interp_factor))
    return fractional_delay(signal, d, interp_factor)


# -- frequency error ---------------------------------------------------------

def apply_freq_shift(signal: ComplexSignal, f_hz: float) -> ComplexSignal:
    """Multiply by exp(j*2*pi*f*n/fs); preserves each sample's magnitude."""
    n = np.arange(len(signal.samples))
    rot = np.exp(2j * np.pi * f_hz * n / signal.sample_rate)
    return ComplexSignal(signal.samples * rot, signal.sample_rate)


def freq_offset(signal: ComplexSignal, cfo_std_hz: float,
                rng: np.random.Generator) -> ComplexSignal:
    """Carrier frequency offset drawn once per packet from N(0, cfo_std_hz^2)."""
    f = rng.normal(scale=cfo_std_hz) if cfo_std_hz > 0 else 0.0
    return apply_freq_shift(signal, f)


# -- fading ------------------------------------------------------------------

def make_fading_taps(n_taps: int, scale: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Static per-packet taps: Rayleigh magnitudes, uniform phases."""
    mag = rng.rayleigh(scale, size=n_taps)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n_taps)
    return mag * np.exp(1j * phase)


def convolve_taps(signal: ComplexSignal, taps) -> ComplexSignal:
    out = np.convolve(signal.samples, np.asarray(taps))[: len(signal.samples)]
    return ComplexSignal(out, signal.sample_rate)


def fading(signal: ComplexSignal, n_taps: int, rayleigh_scale: float,
           rng: np.random.Generator) -> ComplexSignal:
    return convolve_taps(signal, make_fading_taps(n_taps, rayleigh_scale, rng))


# -- composition -------------------------------------------------------------

def apply_channel(signal: ComplexSignal, config: ChannelConfig,
                  rng: np.random.Generator) -> ComplexSignal:
    """AWGN kind: noise only. DYNAMIC kind: timing, frequency, fading, then
    noise, with the SNR referenced to the post-fading signal power."""
    if config.kind is ChannelKind.AWGN:
        return awgn(signal, config.snr_db, rng)
    out = timing_offset(signal, config.interp_factor, rng)
    out = freq_offset(out, config.cfo_std_hz, rng)
    out = fading(out, config.n_taps, config.rayleigh_scale, rng)
    return awgn(out, config.snr_db, rng)
