"""Study sweeps over the full pipeline: architecture comparison, transmitter
variability, population size, SNR, packet length, and modulation mixtures.

Every sweep point is an independent, deterministically seeded job, so
results are reproducible regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, ChannelKind
from .features import Representation
from .modelgen import GeneratorSpec, generate_models
from .nn import build_conv_net, build_fc_net
from .sigchain import DataMode, Modulation, PacketSpec
from .trainer import SampleFactory, TrainConfig, evaluate, train_best_of

STUDIES = ("arch", "variability", "ntx", "snr", "pktlen", "modulation")

ALL_MODULATIONS = (Modulation.BPSK, Modulation.QPSK, Modulation.PSK8,
                   Modulation.QAM16, Modulation.QAM64)


@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    n_tx: int = 20
    snr_db: float = 20.0
    modulation: Modulation = Modulation.QPSK
    length_symbols: int = 8192
    sps: int = 2
    data_modes: tuple = (DataMode.SAME, DataMode.RANDOM)
    channel_kinds: tuple = (ChannelKind.AWGN, ChannelKind.DYNAMIC)
    sweep: tuple = ()
    snr_eval_points: tuple = (0, 5, 10, 15, 20, 25, 30)
    modulation_set: tuple = ALL_MODULATIONS
    generator_spec: GeneratorSpec = GeneratorSpec()
    seed: int = 0
    train: TrainConfig = TrainConfig()
    eval_per_class: int = 1000
    representation: Representation = Representation.MAGNITUDE
    architecture: str = "conv"
    jobs: int = 1

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}")
        if not self.sweep and self.study != "modulation":
            raise ValueError("sweep values must be non-empty")


@dataclass(frozen=True)
class ResultRecord:
    study: str
    param: str
    value: str
    data_mode: str
    channel: str
    n_tx: int
    accuracy: float
    chance: float
    epochs: int
    seconds: float


def derive_rng(master_seed, *tags) -> np.random.Generator:
    """Independent stream keyed by (master seed, string tags); stable across
    runs and processes."""
    keys = [zlib.crc32(str(t).encode()) for t in tags]
    return np.random.default_rng(np.random.SeedSequence([int(master_seed)] + keys))


@dataclass(frozen=True)
class _Job:
    """One network training plus its evaluation points."""

    study: str
    param: str
    data_mode: DataMode
    channel: ChannelConfig
    transmitters: tuple
    packet_spec: PacketSpec
    representation: Representation
    architecture: str
    train_cfg: TrainConfig
    eval_per_class: int
    seed: int
    tags: tuple
    snr_pool: tuple = None
    modulation_pool: tuple = None
    # (value, {"snr_db": ...} / {"modulation": ...} / {}) per record
    evals: tuple = (("", {}),)


def _build_net_spec(job: _Job, factory: SampleFactory):
    shape = factory.feature_shape
    if job.architecture == "conv":
        return build_conv_net(shape, factory.n_classes)
    if job.architecture == "fc":
        return build_fc_net(int(np.prod(shape)), factory.n_classes)
    raise ValueError(f"unknown architecture {job.architecture!r}")


def _execute_job(job: _Job) -> list[ResultRecord]:
    factory = SampleFactory(
        list(job.transmitters), job.packet_spec, job.channel,
        representation=job.representation,
        snr_pool=job.snr_pool, modulation_pool=job.modulation_pool,
    )
    rng = derive_rng(job.seed, *job.tags, "train")
    t0 = time.perf_counter()
    net, history = train_best_of(_build_net_spec(job, factory), factory,
                                 job.train_cfg, rng)
    train_seconds = time.perf_counter() - t0
    records = []
    for value, overrides in job.evals:
        chan = job.channel
        spec = job.packet_spec
        if "snr_db" in overrides:
            chan = dataclasses.replace(chan, snr_db=float(overrides["snr_db"]))
        if "modulation" in overrides:
            spec = dataclasses.replace(spec, modulation=overrides["modulation"])
        eval_factory = SampleFactory(list(job.transmitters), spec, chan,
                                     representation=job.representation)
        t1 = time.perf_counter()
        acc, _ = evaluate(net, eval_factory, job.eval_per_class,
                          derive_rng(job.seed, *job.tags, "eval", value))
        seconds = (time.perf_counter() - t1) + train_seconds / len(job.evals)
        records.append(ResultRecord(
            study=job.study, param=job.param, value=str(value),
            data_mode=job.data_mode.value, channel=job.channel.kind.value,
            n_tx=len(job.transmitters), accuracy=acc,
            chance=1.0 / len(job.transmitters),
            epochs=len(history), seconds=seconds,
        ))
    return records


def _run_jobs(jobs, n_workers) -> list[ResultRecord]:
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_execute_job, jobs))
    else:
        results = [_execute_job(j) for j in jobs]
    return [rec for group in results for rec in group]


def _population(cfg: ExperimentConfig, n, *tags):
    return tuple(generate_models(cfg.generator_spec, n,
                                 derive_rng(cfg.seed, "pop", *tags)))


def _packet_spec(cfg: ExperimentConfig, data_mode, **overrides):
    kw = dict(length_symbols=cfg.length_symbols, modulation=cfg.modulation,
              sps=cfg.sps, data_mode=data_mode)
    kw.update(overrides)
    return PacketSpec(**kw)


def _channel(cfg: ExperimentConfig, kind, **overrides):
    kw = dict(kind=kind, snr_db=cfg.snr_db)
    kw.update(overrides)
    return ChannelConfig(**kw)


ARCH_COMBOS = tuple(
    (rep, arch)
    for rep in (Representation.MAGNITUDE, Representation.CARTESIAN,
                Representation.POLAR)
    for arch in ("fc", "conv")
)


def run_arch_comparison(cfg: ExperimentConfig) -> list[ResultRecord]:
    """All six representation/architecture combinations at each variability
    in cfg.sweep, AWGN channel."""
    jobs = []
    for s in cfg.sweep:
        gen = dataclasses.replace(cfg.generator_spec, s=float(s))
        txs = tuple(generate_models(gen, cfg.n_tx, derive_rng(cfg.seed, "pop", s)))
        for rep, arch in ARCH_COMBOS:
            jobs.append(_Job(
                study="arch", param=f"s={s}",
                data_mode=cfg.data_modes[0],
                channel=_channel(cfg, ChannelKind.AWGN),
                transmitters=txs,
                packet_spec=_packet_spec(cfg, cfg.data_modes[0]),
                representation=rep, architecture=arch,
                train_cfg=cfg.train, eval_per_class=cfg.eval_per_class,
                seed=cfg.seed, tags=("arch", s, rep.value, arch),
                evals=((f"{rep.value}+{arch}", {}),),
            ))
    return _run_jobs(jobs, cfg.jobs)


def run_variability_sweep(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Accuracy vs the variability coefficient s, per data mode and channel.
    Populations are regenerated per s and shared across curves."""
    jobs = []
    for s in cfg.sweep:
        gen = dataclasses.replace(cfg.generator_spec, s=float(s))
        txs = tuple(generate_models(gen, cfg.n_tx, derive_rng(cfg.seed, "pop", s)))
        for mode in cfg.data_modes:
            for kind in cfg.channel_kinds:
                jobs.append(_Job(
                    study="variability", param="s", data_mode=mode,
                    channel=_channel(cfg, kind), transmitters=txs,
                    packet_spec=_packet_spec(cfg, mode),
                    representation=cfg.representation,
                    architecture=cfg.architecture,
                    train_cfg=cfg.train, eval_per_class=cfg.eval_per_class,
                    seed=cfg.seed, tags=("var", s, mode.value, kind.value),
                    evals=((s, {}),),
                ))
    return _run_jobs(jobs, cfg.jobs)


def run_ntx_sweep(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Accuracy vs population size; chance level 1/N is recorded alongside."""
    jobs = []
    for n in cfg.sweep:
        txs = _population(cfg, int(n), "ntx", n)
        for mode in cfg.data_modes:
            for kind in cfg.channel_kinds:
                jobs.append(_Job(
                    study="ntx", param="n_tx", data_mode=mode,
                    channel=_channel(cfg, kind), transmitters=txs,
                    packet_spec=_packet_spec(cfg, mode),
                    representation=cfg.representation,
                    architecture=cfg.architecture,
                    train_cfg=cfg.train, eval_per_class=cfg.eval_per_class,
                    seed=cfg.seed, tags=("ntx", n, mode.value, kind.value),
                    evals=((n, {}),),
                ))
    return _run_jobs(jobs, cfg.jobs)


def run_snr_sweep(cfg: ExperimentConfig) -> list[ResultRecord]:
    """One network per (data mode, channel) trained at per-sample random SNR
    from cfg.sweep, evaluated at each SNR in cfg.snr_eval_points."""
    txs = _population(cfg, cfg.n_tx, "snr")
    jobs = []
    for mode in cfg.data_modes:
        for kind in cfg.channel_kinds:
            jobs.append(_Job(
                study="snr", param="snr_db", data_mode=mode,
                channel=_channel(cfg, kind), transmitters=txs,
                packet_spec=_packet_spec(cfg, mode),
                representation=cfg.representation,
                architecture=cfg.architecture,
                train_cfg=cfg.train, eval_per_class=cfg.eval_per_class,
                seed=cfg.seed, tags=("snr", mode.value, kind.value),
                snr_pool=tuple(cfg.sweep),
                evals=tuple((p, {"snr_db": p}) for p in cfg.snr_eval_points),
            ))
    return _run_jobs(jobs, cfg.jobs)


def run_packet_length_sweep(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Train and test at matched packet length, one network per length."""
    txs = _population(cfg, cfg.n_tx, "pktlen")
    jobs = []
    for length in cfg.sweep:
        for mode in cfg.data_modes:
            for kind in cfg.channel_kinds:
                jobs.append(_Job(
                    study="pktlen", param="length_symbols", data_mode=mode,
                    channel=_channel(cfg, kind), transmitters=txs,
                    packet_spec=_packet_spec(cfg, mode,
                                             length_symbols=int(length)),
                    representation=cfg.representation,
                    architecture=cfg.architecture,
                    train_cfg=cfg.train, eval_per_class=cfg.eval_per_class,
                    seed=cfg.seed,
                    tags=("pktlen", length, mode.value, kind.value),
                    evals=((length, {}),),
                ))
    return _run_jobs(jobs, cfg.jobs)


def run_modulation_sweep(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Train on a uniform mixture of modulations, evaluate one modulation at
    a time."""
    txs = _population(cfg, cfg.n_tx, "modmix")
    jobs = []
    for mode in cfg.data_modes:
        for kind in cfg.channel_kinds:
            jobs.append(_Job(
                study="modulation", param="modulation", data_mode=mode,
                channel=_channel(cfg, kind), transmitters=txs,
                packet_spec=_packet_spec(cfg, mode),
                representation=cfg.representation,
                architecture=cfg.architecture,
                train_cfg=cfg.train, eval_per_class=cfg.eval_per_class,
                seed=cfg.seed, tags=("modmix", mode.value, kind.value),
                modulation_pool=tuple(cfg.modulation_set),
                evals=tuple(
                    (m.value, {"modulation": m}) for m in cfg.modulation_set
                ),
            ))
    return _run_jobs(jobs, cfg.jobs)


RUNNERS = {
    "arch": run_arch_comparison,
    "variability": run_variability_sweep,
    "ntx": run_ntx_sweep,
    "snr": run_snr_sweep,
    "pktlen": run_packet_length_sweep,
    "modulation": run_modulation_sweep,
}


def run_study(cfg: ExperimentConfig) -> list[ResultRecord]:
    return RUNNERS[cfg.study](cfg)


RESULTS_HEADER = "study,param,value,data_mode,channel,n_tx,accuracy,chance,epochs,seconds"


def write_results(records, path, seconds_override=None):
    """Deterministic results CSV (sweep order). seconds_override replaces
    the measured wall times, used when reproducing a run from its manifest."""
    if not records:
        raise ValueError("no records to write")
    lines = [RESULTS_HEADER]
    for i, r in enumerate(records):
        sec = seconds_override[i] if seconds_override is not None else r.seconds
        lines.append(
            f"{r.study},{r.param},{r.value},{r.data_mode},{r.channel},"
            f"{r.n_tx},{r.accuracy:.4f},{r.chance:.6f},{r.epochs},{sec:.2f}"
        )
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")


def read_results(path) -> list[ResultRecord]:
    with open(path, encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln]
    if lines[0] != RESULTS_HEADER:
        raise ValueError(f"unexpected header {lines[0]!r}")
    out = []
    for ln in lines[1:]:
        st, param, value, dm, ch, ntx, acc, chance, epochs, sec = ln.split(",")
        out.append(ResultRecord(st, param, value, dm, ch, int(ntx), float(acc),
                                float(chance), int(epochs), float(sec)))
    return out


def write_plot_data(records, path):
    """Gnuplot-style data file: one block per (param, data_mode, channel)
    curve, blank-line separated."""
    curves = {}
    for r in records:
        curves.setdefault((r.param, r.data_mode, r.channel), []).append(r)
    blocks = []
    for (param, dm, ch), recs in curves.items():
        lines = [f"# {param} data_mode={dm} channel={ch}"]
        lines += [f"{r.value} {r.accuracy:.4f} {r.chance:.6f}" for r in recs]
        blocks.append("\n".join(lines))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n\n".join(blocks) + "\n")


# -- presets -------------------------------------------------------------------

_DESK_SWEEPS = {
    "arch": (0.005, 1.0),
    "variability": (0.01, 1.0),
    "ntx": (5, 10, 20),
    "snr": tuple(range(0, 31)),
    "pktlen": (512, 2048, 8192),
    "modulation": (),
}

_PAPER_SWEEPS = {
    "arch": (0.005, 1.0),
    "variability": (0.005, 0.01, 0.05, 0.1, 0.5, 1.0),
    "ntx": (5, 10, 20, 50, 100, 200, 500),
    "snr": tuple(range(0, 31)),
    "pktlen": (256, 512, 1024, 2048, 4096, 8192),
    "modulation": (),
}


def desk_preset(study, seed=0, jobs=1) -> ExperimentConfig:
    """Shrunk grids and training budgets; the whole suite fits in desk-scale
    CPU time while preserving the trends."""
    return ExperimentConfig(
        study=study,
        n_tx=5,
        length_symbols=2048,
        sweep=_DESK_SWEEPS[study],
        snr_eval_points=(0, 15, 30),
        data_modes=(DataMode.SAME, DataMode.RANDOM),
        channel_kinds=((ChannelKind.AWGN,) if study in ("pktlen", "snr")
                       else (ChannelKind.AWGN, ChannelKind.DYNAMIC)),
        # mixed-SNR training converges slower than fixed-SNR, so the snr
        # study gets a larger budget; it stays cheap because one network
        # serves every evaluation point
        train=(TrainConfig(epoch_samples_per_class=1000, max_epochs=25,
                           patience=5, restarts=1,
                           validation_samples_per_class=40)
               if study == "snr" else
               TrainConfig(epoch_samples_per_class=250, max_epochs=10,
                           patience=3, restarts=1,
                           validation_samples_per_class=40)),
        eval_per_class=200,
        seed=seed,
        jobs=jobs,
    )


def paper_preset(study, seed=0, jobs=1) -> ExperimentConfig:
    """Full-scale grids and training budgets."""
    return ExperimentConfig(
        study=study,
        sweep=_PAPER_SWEEPS[study],
        seed=seed,
        jobs=jobs,
    )


PRESETS = {"desk": desk_preset, "paper": paper_preset}
