"""Statistical population model over measured amplifier parameters, and
generation of synthetic transmitter populations with tunable variability.

alpha follows a truncated gamma distribution; beta is tied to alpha by a
regression line. The variability coefficient s scales the population
standard deviation (s=0 collapses to identical transmitters).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, ParseError, RejectionOverflow
from .saleh import SalehModel

# Defaults are a calibration choice: the regression line passes (nearly)
# through the classic reference model (2.1587, 1.1517) with zero intercept.
DEFAULT_MU = 2.0
DEFAULT_SIGMA = 0.3
DEFAULT_SLOPE = 0.53355
DEFAULT_INTERCEPT = 0.0

_MAX_REJECTION_ROUNDS = 10_000


@dataclass(frozen=True)
class GeneratorSpec:
    mu: float = DEFAULT_MU
    sigma: float = DEFAULT_SIGMA
    slope: float = DEFAULT_SLOPE
    intercept: float = DEFAULT_INTERCEPT
    alpha_min: float = 1.0
    alpha_max: float = 3.0
    s: float = 1.0

    def __post_init__(self):
        if not self.alpha_min < self.alpha_max:
            raise ValueError("alpha_min must be < alpha_max")
        if not self.alpha_min < self.mu < self.alpha_max:
            raise ValueError("mu must lie inside (alpha_min, alpha_max)")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.s < 0:
            raise ValueError("s must be >= 0")


@dataclass(frozen=True)
class PopulationStats:
    mu: float
    sigma: float
    slope: float
    intercept: float
    n_samples: int
    r_squared: float


def fit_population(models) -> PopulationStats:
    """Sample moments of alpha (n-1 denominator) and the OLS line of beta
    on alpha over a measured population."""
    models = list(models)
    if len(models) < 2:
        raise DegenerateFit("need at least 2 models")
    a = np.array([m.alpha for m in models])
    b = np.array([m.beta for m in models])
    am = a.mean()
    saa = np.sum((a - am) ** 2)
    if saa == 0.0:
        raise DegenerateFit("all alpha values identical; regression undefined")
    slope = np.sum((a - am) * (b - b.mean())) / saa
    intercept = b.mean() - slope * am
    resid = b - (slope * a + intercept)
    sst = np.sum((b - b.mean()) ** 2)
    r_squared = 1.0 - float(np.sum(resid**2) / sst) if sst > 0 else 1.0
    return PopulationStats(
        mu=float(am),
        sigma=float(a.std(ddof=1)),
        slope=float(slope),
        intercept=float(intercept),
        n_samples=len(models),
        r_squared=r_squared,
    )


def sample_alpha(spec: GeneratorSpec, rng: np.random.Generator, size=None):
    """Gamma draw with mean mu and std s*sigma, truncated to
    [alpha_min, alpha_max] by rejection. s=0 returns mu deterministically."""
    n = 1 if size is None else int(size)
    if spec.s == 0.0:
        out = np.full(n, spec.mu)
        return float(out[0]) if size is None else out
    sigma_s = spec.s * spec.sigma
    shape = (spec.mu / sigma_s) ** 2
    scale = sigma_s**2 / spec.mu
    out = np.empty(n)
    filled = 0
    for _ in range(_MAX_REJECTION_ROUNDS):
        draws = rng.gamma(shape, scale, size=n - filled)
        ok = draws[(draws >= spec.alpha_min) & (draws <= spec.alpha_max)]
        out[filled : filled + len(ok)] = ok
        filled += len(ok)
        if filled == n:
            return float(out[0]) if size is None else out
    raise RejectionOverflow(
        f"no in-window draw after {_MAX_REJECTION_ROUNDS} rounds; "
        f"check mu/sigma/s against [{spec.alpha_min}, {spec.alpha_max}]"
    )


def generate_models(spec: GeneratorSpec, n: int,
                    rng: np.random.Generator) -> list[SalehModel]:
    """n synthetic transmitters: alpha sampled, beta exactly on the
    regression line (clamped at 0 if the line dips negative)."""
    if n == 0:
        return []
    alphas = sample_alpha(spec, rng, size=n)
    return [
        SalehModel(float(a), max(float(spec.slope * a + spec.intercept), 0.0))
        for a in alphas
    ]


_SPEC_FIELDS = ("mu", "sigma", "slope", "intercept", "alpha_min", "alpha_max", "s")


def save_spec(path, spec: GeneratorSpec, extras=None):
    """Flat key=value file, one pair per line. extras (e.g. n_samples from a
    population fit) are written too and ignored by load_spec."""
    with open(path, "w", encoding="utf-8") as f:
        for name in _SPEC_FIELDS:
            f.write(f"{name}={getattr(spec, name)!r}\n")
        for key, val in (extras or {}).items():
            f.write(f"{key}={val!r}\n")


def load_spec(path) -> GeneratorSpec:
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", lineno)
            key, _, val = line.partition("=")
            key = key.strip()
            if key in _SPEC_FIELDS:
                try:
                    values[key] = float(val)
                except ValueError:
                    raise ParseError(f"non-numeric value for {key}", lineno)
    return GeneratorSpec(**values)


def spec_from_stats(stats: PopulationStats, s=1.0, alpha_min=1.0,
                    alpha_max=3.0) -> GeneratorSpec:
    return GeneratorSpec(mu=stats.mu, sigma=stats.sigma, slope=stats.slope,
                         intercept=stats.intercept, alpha_min=alpha_min,
                         alpha_max=alpha_max, s=s)
