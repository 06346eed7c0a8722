"""Transmitter identification from power-amplifier nonlinearity fingerprints."""

from .channel import ChannelConfig, ChannelKind, apply_channel, awgn
from .classifier import NetworkClassifier
from .errors import (
    DegenerateFit,
    DuplicatePoint,
    IndexOutOfRange,
    NonFiniteLoss,
    ParseError,
    RejectionOverflow,
    ShapeError,
    TooShort,
    TxidError,
    ZeroSignal,
)
from .features import (
    FeatureVector,
    Representation,
    SpectrumFeaturizer,
    averaged_fft,
    represent,
)
from .modelgen import GeneratorSpec, PopulationStats, fit_population, generate_models
from .saleh import AmAmMeasurement, SalehModel, apply_pa, eval_am_am, fit_saleh
from .sigchain import (
    ComplexSignal,
    DataMode,
    Modulation,
    PacketSpec,
    make_packet,
    modulate,
    normalize_peak,
    pulse_shape,
    rrc_taps,
)
from .trainer import SampleFactory, TrainConfig, evaluate, train, train_best_of

__all__ = [name for name in dir() if not name.startswith("_")]
