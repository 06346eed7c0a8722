"""Online training protocol: every labeled sample is synthesized on demand
(packet -> PA -> channel -> feature) and never reused."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, apply_channel
from .errors import NonFiniteLoss
from .features import Representation, averaged_fft, feature_shape, represent
from .nn import Adam, Network, NetworkSpec
from .saleh import SalehModel, apply_pa
from .sigchain import DataMode, PacketSpec, make_packet

MIN_LOSS_DELTA = 1e-4
CALIBRATION_PER_CLASS = 16


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol knobs. Early stopping counts an epoch as improving
    only if the mean loss drops by more than MIN_LOSS_DELTA, so a converged
    loss jittering at float precision still terminates."""

    batch_size: int = 32
    epoch_samples_per_class: int = 1000
    max_epochs: int = 25
    patience: int = 5
    restarts: int = 3
    validation_samples_per_class: int = 100

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")


class SampleFactory:
    """Synthesizes labeled feature vectors for a fixed transmitter population.

    Class label i corresponds to transmitters[i]. Optional pools randomize
    the SNR or the modulation per sample (for mixed-condition training).
    """

    def __init__(self, transmitters, packet_spec: PacketSpec,
                 channel: ChannelConfig, representation=Representation.MAGNITUDE,
                 normalize=True, snr_pool=None, modulation_pool=None):
        if len(transmitters) < 2:
            raise ValueError("need at least 2 transmitters")
        self.transmitters = list(transmitters)
        self.packet_spec = packet_spec
        self.channel = channel
        self.representation = Representation(representation)
        self.normalize = normalize
        self.snr_pool = None if snr_pool is None else list(snr_pool)
        self.modulation_pool = (
            None if modulation_pool is None else list(modulation_pool)
        )
        self._same_cache = {}

    @property
    def n_classes(self):
        return len(self.transmitters)

    @property
    def feature_shape(self):
        return feature_shape(self.representation)

    def _clean_packet(self, spec: PacketSpec, rng):
        # SAME-mode packets are a pure function of the spec, so cache them.
        if spec.data_mode is DataMode.SAME:
            key = (spec.modulation, spec.length_symbols, spec.sps,
                   spec.rrc_beta, spec.rrc_span, spec.same_seed)
            if key not in self._same_cache:
                self._same_cache[key] = make_packet(spec, rng)
            return self._same_cache[key]
        return make_packet(spec, rng)

    def make_sample(self, label: int, rng: np.random.Generator) -> np.ndarray:
        spec = self.packet_spec
        if self.modulation_pool is not None:
            mod = self.modulation_pool[rng.integers(len(self.modulation_pool))]
            spec = dataclasses.replace(spec, modulation=mod)
        chan = self.channel
        if self.snr_pool is not None:
            snr = self.snr_pool[rng.integers(len(self.snr_pool))]
            chan = dataclasses.replace(chan, snr_db=float(snr))
        clean = self._clean_packet(spec, rng)
        distorted = apply_pa(self.transmitters[label], clean)
        received = apply_channel(distorted, chan, rng)
        coeffs = averaged_fft(received)
        return represent(coeffs, self.representation, self.normalize).values


def next_batch(factory: SampleFactory, size, rng, labels=None):
    """One batch of online samples. With labels=None classes are drawn
    uniformly; the trainer passes stratified labels for exact epoch balance."""
    if labels is None:
        labels = rng.integers(0, factory.n_classes, size=size)
    labels = np.asarray(labels)
    X = np.empty((len(labels),) + factory.feature_shape)
    for i, lab in enumerate(labels):
        X[i] = factory.make_sample(int(lab), rng)
    return X, labels


def _flatten_if_needed(X, net: Network):
    if len(net.spec.input_shape) == 1:
        return X.reshape(len(X), -1)
    return X


def evaluate(network: Network, factory: SampleFactory, n_per_class=1000,
             rng=None, batch=256):
    """Accuracy and confusion matrix on a fresh balanced sample stream.
    Row i of the confusion matrix counts predictions for true class i."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = factory.n_classes
    labels = np.repeat(np.arange(n), n_per_class)
    confusion = np.zeros((n, n), dtype=int)
    for start in range(0, len(labels), batch):
        lab = labels[start : start + batch]
        X, _ = next_batch(factory, len(lab), rng, labels=lab)
        pred = np.argmax(network.forward(_flatten_if_needed(X, network)), axis=1)
        np.add.at(confusion, (lab, pred), 1)
    accuracy = float(np.trace(confusion) / confusion.sum())
    return accuracy, confusion


def train(net_spec: NetworkSpec, factory: SampleFactory, config: TrainConfig,
          rng: np.random.Generator, dtype="float32"):
    """Train one network with online data; returns (network, history).

    History entries are dicts with epoch, train_loss, val_accuracy. Early
    stopping watches the mean epoch training loss (online generation has no
    train/validation gap); validation accuracy is recorded for model
    selection across restarts.
    """
    net = Network(net_spec, rng=rng, dtype=dtype)
    n = factory.n_classes
    # the spectral fingerprint is a tiny differential on top of a large
    # common-mode spectrum; standardizing inputs from a calibration stream
    # puts it at unit scale for the optimizer
    cal_labels = np.tile(np.arange(n), CALIBRATION_PER_CLASS)
    X_cal, _ = next_batch(factory, len(cal_labels), rng, labels=cal_labels)
    net.fit_input_scaler(_flatten_if_needed(X_cal, net))
    adam = Adam(net.params)
    best, since_best = np.inf, 0
    history = []
    for epoch in range(1, config.max_epochs + 1):
        labels = rng.permutation(np.repeat(np.arange(n),
                                           config.epoch_samples_per_class))
        losses = []
        for start in range(0, len(labels), config.batch_size):
            lab = labels[start : start + config.batch_size]
            X, _ = next_batch(factory, len(lab), rng, labels=lab)
            loss, grads = net.loss_and_grads(_flatten_if_needed(X, net), lab)
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch offset {start}"
                )
            adam.step(grads)
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
        val_acc, _ = evaluate(net, factory, config.validation_samples_per_class, rng)
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss, "val_accuracy": val_acc}
        )
        if epoch_loss < best - MIN_LOSS_DELTA:
            best, since_best = epoch_loss, 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return net, history


def train_best_of(net_spec: NetworkSpec, factory: SampleFactory,
                  config: TrainConfig, rng: np.random.Generator,
                  dtype="float32"):
    """Train config.restarts independent networks and keep the best one by
    validation accuracy (ties: lower final loss, then lower restart index).
    Returns (network, history) of the winner."""
    winner = None
    for idx, child in enumerate(rng.spawn(config.restarts)):
        net, history = train(net_spec, factory, config, child, dtype=dtype)
        key = (history[-1]["val_accuracy"], -history[-1]["train_loss"], -idx)
        if winner is None or key > winner[0]:
            winner = (key, net, history)
    return winner[1], winner[2]


def write_history(path, history):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "train_loss", "val_accuracy"])
        for row in history:
            w.writerow([row["epoch"], repr(row["train_loss"]),
                        repr(row["val_accuracy"])])
