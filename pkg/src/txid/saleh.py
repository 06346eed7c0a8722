"""Saleh AM-AM amplifier model: evaluation, per-sample distortion, and
least-squares fitting from two-tone measurement sweeps.

The model maps input amplitude r to output amplitude A(r) = alpha*r / (1 + beta*r^2).
Only the amplitude path is distorted; phase passes through untouched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, DuplicatePoint, ParseError
from .sigchain import ComplexSignal

# Classic traveling-wave-tube parameters, used as the reference model in
# examples and tests.
CLASSIC_ALPHA = 2.1587
CLASSIC_BETA = 1.1517

# Fitted beta more negative than this (relative to alpha) is treated as a bad
# measurement rather than rounding noise.
_BETA_NOISE_FLOOR = 1e-9


@dataclass(frozen=True)
class SalehModel:
    """One transmitter's amplitude nonlinearity fingerprint."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class AmAmMeasurement:
    """Measured (input amplitude, output amplitude) sweep for one device."""

    device_id: str
    points: tuple  # of (r_in, a_out) pairs, r_in strictly increasing


def eval_am_am(model: SalehModel, r):
    """Output amplitude for input amplitude r (scalar or array, r >= 0)."""
    r = np.asarray(r, dtype=float)
    out = model.alpha * r / (1.0 + model.beta * r * r)
    return out if out.ndim else float(out)


def apply_pa(model: SalehModel, signal: ComplexSignal) -> ComplexSignal:
    """Distort a baseband signal: magnitudes pass through the AM-AM curve,
    phases are preserved exactly."""
    x = signal.samples
    r = np.abs(x)
    gain = np.where(r > 0, model.alpha / (1.0 + model.beta * r * r), 0.0)
    return ComplexSignal(x * gain, signal.sample_rate)


def fit_saleh(meas: AmAmMeasurement) -> SalehModel:
    """Closed-form least-squares fit of (alpha, beta) to measured points.

    The model linearizes as r/A(r) = 1/alpha + (beta/alpha) * r^2, so an
    ordinary least-squares line of z = r/a against r^2 recovers both
    parameters. Points at r_in = 0 carry no information (z undefined) and
    are dropped.
    """
    pts = [(r, a) for r, a in meas.points if r > 0]
    if len({r for r, _ in pts}) < 2:
        raise DegenerateFit(
            f"{meas.device_id}: need at least 2 distinct nonzero input amplitudes"
        )
    if any(a <= 0 for _, a in pts):
        raise DegenerateFit(f"{meas.device_id}: nonpositive output at nonzero input")

    r = np.array([p[0] for p in pts])
    a = np.array([p[1] for p in pts])
    x = r * r
    z = r / a
    xm, zm = x.mean(), z.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (z - zm)) / sxx
    intercept = zm - slope * xm

    if intercept <= 0:
        raise DegenerateFit(f"{meas.device_id}: fit intercept <= 0 (non-physical gain)")
    alpha = 1.0 / intercept
    beta = slope / intercept
    if beta < 0:
        # Rounding noise from exactly-linear data is fine; anything larger
        # means the measurements disagree with the model.
        if beta < -_BETA_NOISE_FLOOR * max(1.0, alpha):
            raise DegenerateFit(f"{meas.device_id}: fitted beta = {beta} < 0")
        beta = 0.0
    return SalehModel(alpha, beta)


def fit_residual_rms(model: SalehModel, meas: AmAmMeasurement) -> float:
    """RMS of a_out - A(r_in) over all measured points."""
    r = np.array([p[0] for p in meas.points])
    a = np.array([p[1] for p in meas.points])
    return float(np.sqrt(np.mean((a - eval_am_am(model, r)) ** 2)))


def load_measurements(path) -> list[AmAmMeasurement]:
    """Read a measurement CSV (header ``device_id,r_in,a_out``).

    Rows for one device need not be contiguous; points are sorted by r_in.
    """
    by_device: dict[str, dict[float, float]] = {}
    order: list[str] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if [c.strip() for c in row] != ["device_id", "r_in", "a_out"]:
                    raise ParseError("expected header 'device_id,r_in,a_out'", lineno)
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 columns, got {len(row)}", lineno)
            dev = row[0].strip()
            if not dev:
                raise ParseError("empty device_id", lineno)
            try:
                r_in = float(row[1])
                a_out = float(row[2])
            except ValueError:
                raise ParseError(f"non-numeric amplitude in {row[1:]!r}", lineno)
            if not 0.0 <= r_in <= 1.0:
                raise ParseError(f"r_in = {r_in} outside [0, 1]", lineno)
            if a_out < 0:
                raise ParseError(f"a_out = {a_out} < 0", lineno)
            pts = by_device.setdefault(dev, {})
            if dev not in order:
                order.append(dev)
            if r_in in pts:
                raise DuplicatePoint(f"duplicate point ({dev}, {r_in}) at line {lineno}")
            pts[r_in] = a_out
    return [
        AmAmMeasurement(dev, tuple(sorted(by_device[dev].items()))) for dev in order
    ]


def save_models(path, models, device_ids=None):
    """Write fitted models as CSV with header ``device_id,alpha,beta``."""
    if device_ids is None:
        device_ids = [f"tx{i}" for i in range(len(models))]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["device_id", "alpha", "beta"])
        for dev, m in zip(device_ids, models):
            w.writerow([dev, repr(float(m.alpha)), repr(float(m.beta))])


def load_models(path) -> list[tuple[str, SalehModel]]:
    """Read a fitted-model CSV back into (device_id, model) pairs."""
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if [c.strip() for c in row] != ["device_id", "alpha", "beta"]:
                    raise ParseError("expected header 'device_id,alpha,beta'", lineno)
                continue
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 columns, got {len(row)}", lineno)
            try:
                out.append((row[0], SalehModel(float(row[1]), float(row[2]))))
            except ValueError as e:
                raise ParseError(str(e), lineno)
    return out
