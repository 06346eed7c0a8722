"""Frequency-domain features: windowed DFT averaging and the three input
representations fed to the classifiers."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import TooShort
from .sigchain import ComplexSignal

WINDOW = 256


class Representation(str, enum.Enum):
    MAGNITUDE = "magnitude"
    CARTESIAN = "cartesian"
    POLAR = "polar"


@dataclass(frozen=True)
class FeatureVector:
    representation: Representation
    values: np.ndarray  # (window, 1) for MAGNITUDE, (window, 2) otherwise


def averaged_fft(signal: ComplexSignal, window: int = WINDOW) -> np.ndarray:
    """Averaged spectrum of consecutive non-overlapping windows.

    Each window gets an unnormalized DFT. The returned complex coefficients
    combine the mean per-window magnitude (a Welch-style estimate whose
    variance shrinks with window count, so longer captures genuinely sharpen
    the spectral fingerprint) with the phase of the complex window mean. A
    single-window signal reduces exactly to its plain DFT.

    The remainder after the last full window is discarded. Bins are in
    DC-first order (no center shift) everywhere in the system.
    """
    x = signal.samples
    n_win = len(x) // window
    if n_win < 1:
        raise TooShort(f"signal length {len(x)} < window {window}")
    blocks = np.fft.fft(x[: n_win * window].reshape(n_win, window), axis=1)
    magnitude = np.abs(blocks).mean(axis=0)
    phase = np.angle(blocks.mean(axis=0))
    return magnitude * np.exp(1j * phase)


def represent(coeffs, mode: Representation, normalize: bool = True) -> FeatureVector:
    """Convert averaged DFT coefficients into a real-valued feature matrix,
    scaled to unit L2 norm (all-zero input passes through unchanged)."""
    mode = Representation(mode)
    c = np.asarray(coeffs, dtype=complex)
    if mode is Representation.MAGNITUDE:
        values = np.abs(c)[:, None]
    elif mode is Representation.CARTESIAN:
        values = np.stack([c.real, c.imag], axis=1)
    else:
        ang = np.angle(c)
        ang[ang == -np.pi] = np.pi
        values = np.stack([np.abs(c), ang], axis=1)
    if normalize:
        norm = np.linalg.norm(values)
        if norm > 0:
            values = values / norm
    return FeatureVector(mode, values)


def feature_shape(mode: Representation, window: int = WINDOW) -> tuple[int, int]:
    return (window, 1 if Representation(mode) is Representation.MAGNITUDE else 2)


def write_features(path, features, labels):
    """Debug dump: one row per feature vector, flattened column-major,
    header ``label,f0..fN``."""
    features = list(features)
    width = features[0].values.size if features else 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["label"] + [f"f{i}" for i in range(width)])
        for label, fv in zip(labels, features):
            w.writerow([label] + [repr(float(v)) for v in fv.values.flatten(order="F")])


class SpectrumFeaturizer(BaseEstimator, TransformerMixin):
    """Transformer from buffers of received samples to classifier inputs.

    X is a 2-D complex array, one received packet per row; the output is
    (n_packets, window, 1 or 2) real features.
    """

    def __init__(self, window=WINDOW, representation=Representation.MAGNITUDE,
                 normalize=True):
        self.window = window
        self.representation = representation
        self.normalize = normalize

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        X = np.asarray(X)
        out = np.empty((len(X),) + feature_shape(self.representation, self.window))
        for i, row in enumerate(X):
            coeffs = averaged_fft(ComplexSignal(row), self.window)
            out[i] = represent(coeffs, self.representation, self.normalize).values
        return out
