"""Tests for the online training protocol: sample factory, batching,
evaluation, early stopping, and restart selection."""

import math

import numpy as np
import pytest

from txid.channel import ChannelConfig, ChannelKind
from txid.features import Representation
from txid.modelgen import GeneratorSpec, generate_models
from txid.nn import build_fc_net
from txid.saleh import SalehModel
from txid.sigchain import DataMode, Modulation, PacketSpec
from txid.trainer import (
    MIN_LOSS_DELTA,
    SampleFactory,
    TrainConfig,
    evaluate,
    next_batch,
    train,
    train_best_of,
    write_history,
)

SPEC = PacketSpec(length_symbols=256, modulation=Modulation.QPSK,
                  data_mode=DataMode.SAME, same_seed=7)
NOISELESS = ChannelConfig(ChannelKind.AWGN, snr_db=math.inf)
NOISY = ChannelConfig(ChannelKind.AWGN, snr_db=10.0)


def population(n=3, s=0.05, seed=0):
    gen = GeneratorSpec(s=s)
    return generate_models(gen, n, np.random.default_rng(seed))


def make_factory(s=0.05, channel=NOISELESS, **kw):
    return SampleFactory(population(s=s), SPEC, channel, **kw)


class TestSampleFactory:
    def test_needs_two_transmitters(self):
        with pytest.raises(ValueError):
            SampleFactory(population(n=1), SPEC, NOISELESS)

    def test_sample_shape(self):
        f = make_factory(representation=Representation.CARTESIAN)
        x = f.make_sample(0, np.random.default_rng(0))
        assert x.shape == (256, 2)
        assert f.feature_shape == (256, 2)

    def test_unit_norm(self):
        f = make_factory()
        x = f.make_sample(1, np.random.default_rng(0))
        assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-9)

    def test_labels_map_to_distinct_transmitters(self):
        # noiseless SAME-mode features are deterministic per class and
        # differ across classes
        f = make_factory(s=0.2)
        rng = np.random.default_rng(0)
        a0 = f.make_sample(0, rng)
        a1 = f.make_sample(1, rng)
        b0 = f.make_sample(0, rng)
        assert np.array_equal(a0, b0)
        assert not np.array_equal(a0, a1)

    def test_zero_variability_identical_features(self):
        f = make_factory(s=0.0)
        rng = np.random.default_rng(3)
        assert np.array_equal(f.make_sample(0, rng), f.make_sample(2, rng))

    def test_random_mode_never_repeats(self):
        f = SampleFactory(population(), PacketSpec(length_symbols=256),
                          NOISELESS)
        rng = np.random.default_rng(0)
        xs = [f.make_sample(0, rng) for _ in range(4)]
        for i in range(4):
            for j in range(i + 1, 4):
                assert not np.array_equal(xs[i], xs[j])

    def test_snr_pool_draws(self):
        f = make_factory(channel=NOISY, snr_pool=[0.0, 30.0])
        rng = np.random.default_rng(0)
        # pooled SNR changes the feature relative to the fixed-SNR factory
        fixed = make_factory(channel=NOISY)
        a = f.make_sample(0, np.random.default_rng(5))
        b = fixed.make_sample(0, np.random.default_rng(5))
        assert not np.array_equal(a, b)

    def test_modulation_pool_draws(self):
        f = make_factory(modulation_pool=[Modulation.BPSK, Modulation.QAM64])
        rng = np.random.default_rng(0)
        xs = np.stack([f.make_sample(0, rng) for _ in range(8)])
        assert len(np.unique(xs.round(12), axis=0)) == 2  # two cached packets


class TestNextBatch:
    def test_stratified_labels_respected(self):
        f = make_factory()
        labels = np.array([2, 0, 1, 1])
        X, lab = next_batch(f, 4, np.random.default_rng(0), labels=labels)
        assert np.array_equal(lab, labels)
        assert X.shape == (4, 256, 1)

    def test_uniform_draw_covers_classes(self):
        f = make_factory()
        _, lab = next_batch(f, 300, np.random.default_rng(0))
        assert set(lab.tolist()) == {0, 1, 2}


class TestEvaluate:
    def test_confusion_rows_and_accuracy(self):
        f = make_factory(s=0.3)
        net_spec = build_fc_net(256, f.n_classes, hidden=(16,))
        from txid.nn import Network

        net = Network(net_spec, rng=np.random.default_rng(0))
        acc, confusion = evaluate(net, f, n_per_class=10,
                                  rng=np.random.default_rng(1))
        assert confusion.shape == (3, 3)
        assert np.all(confusion.sum(axis=1) == 10)
        assert acc == pytest.approx(np.trace(confusion) / confusion.sum())


class TestTrainConfig:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(patience=-1)


FAST = TrainConfig(batch_size=16, epoch_samples_per_class=20, max_epochs=4,
                   patience=2, restarts=2, validation_samples_per_class=5)


class TestTrain:
    def test_learns_separable_population(self):
        f = make_factory(s=0.3)
        cfg = TrainConfig(batch_size=16, epoch_samples_per_class=60,
                          max_epochs=8, patience=3, restarts=1,
                          validation_samples_per_class=20)
        spec = build_fc_net(256, f.n_classes, hidden=(32,))
        net, history = train(spec, f, cfg, np.random.default_rng(0))
        acc, _ = evaluate(net, f, 20, np.random.default_rng(9))
        assert acc > 0.9
        assert history[0]["epoch"] == 1
        assert all({"epoch", "train_loss", "val_accuracy"} <= set(h) for h in history)

    def test_early_stop_respects_patience(self):
        # zero variability: classes are indistinguishable, loss plateaus at
        # ln(n) and training must stop after 1 + patience epochs
        f = make_factory(s=0.0)
        cfg = TrainConfig(batch_size=16, epoch_samples_per_class=20,
                          max_epochs=30, patience=2, restarts=1,
                          validation_samples_per_class=5)
        spec = build_fc_net(256, f.n_classes, hidden=(8,))
        _, history = train(spec, f, cfg, np.random.default_rng(0))
        assert len(history) <= 10  # far fewer than max_epochs

    def test_deterministic_given_rng(self):
        f = make_factory()
        spec = build_fc_net(256, f.n_classes, hidden=(8,))
        net1, h1 = train(spec, f, FAST, np.random.default_rng(42))
        net2, h2 = train(spec, f, FAST, np.random.default_rng(42))
        assert h1 == h2
        for a, b in zip(net1.params, net2.params):
            assert np.array_equal(a, b)


class TestTrainBestOf:
    def test_picks_a_winner_deterministically(self):
        f = make_factory(s=0.2)
        spec = build_fc_net(256, f.n_classes, hidden=(8,))
        net1, h1 = train_best_of(spec, f, FAST, np.random.default_rng(1))
        net2, h2 = train_best_of(spec, f, FAST, np.random.default_rng(1))
        assert h1 == h2
        for a, b in zip(net1.params, net2.params):
            assert np.array_equal(a, b)


def test_write_history(tmp_path):
    history = [{"epoch": 1, "train_loss": 0.5, "val_accuracy": 0.75}]
    path = tmp_path / "h.csv"
    write_history(path, history)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_accuracy"
    assert lines[1] == "1,0.5,0.75"


def test_min_loss_delta_value():
    assert MIN_LOSS_DELTA == 1e-4
