"""Command-line entry point.

Subcommands: fit, population, gen-models, train, sweep. Every command
writes a RunManifest JSON next to its outputs; a sweep rerun from its
manifest reproduces the results CSV byte-identically.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import secrets
import sys
import time
from importlib.metadata import PackageNotFoundError, version as pkg_version
from pathlib import Path

import numpy as np

from . import experiments, modelgen, saleh, trainer
from .channel import ChannelConfig, ChannelKind
from .errors import TxidError
from .features import Representation
from .nn import build_conv_net, build_fc_net, save_checkpoint
from .sigchain import DataMode, Modulation, PacketSpec


def _tool_version():
    try:
        return pkg_version("txid")
    except PackageNotFoundError:
        return "unknown"


def _resolve_seed(args):
    if args.seed is not None:
        return int(args.seed)
    seed = secrets.randbits(32)
    print(f"seed not given; using auto-generated seed {seed}")
    return seed


def write_manifest(path, command, config, seed, artifacts, timings=None):
    manifest = {
        "tool": "txid",
        "version": _tool_version(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "command": command,
        "seed": seed,
        "config": config,
        "artifacts": [str(a) for a in artifacts],
    }
    if timings is not None:
        manifest["timings"] = timings
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _require_keys(manifest, keys, path):
    for key in keys:
        if key not in manifest:
            raise TxidError(f"manifest {path} is missing key '{key}'")


# -- config files (flat key=value) ----------------------------------------------

def _num_tuple(text):
    return tuple(float(x) if "." in x else int(x) for x in text.split(","))


def _str_tuple(text):
    return tuple(x.strip() for x in text.split(","))


_SWEEP_CONFIG_KEYS = {
    "sweep": _num_tuple,
    "snr_eval_points": _num_tuple,
    "data_modes": _str_tuple,
    "channel_kinds": _str_tuple,
    "n_tx": int,
    "snr_db": float,
    "modulation": str,
    "length_symbols": int,
    "sps": int,
    "eval_per_class": int,
    "s": float,
    "seed": int,
    "batch_size": int,
    "epoch_samples_per_class": int,
    "max_epochs": int,
    "patience": int,
    "restarts": int,
    "validation_samples_per_class": int,
}


def load_config(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(),
                                  start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise TxidError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _SWEEP_CONFIG_KEYS:
            raise TxidError(f"{path}:{lineno}: unknown config key '{key}'")
        try:
            values[key] = _SWEEP_CONFIG_KEYS[key](val.strip())
        except ValueError:
            raise TxidError(f"{path}:{lineno}: bad value for key '{key}'")
    return values


def _apply_config(cfg: experiments.ExperimentConfig, values):
    train_fields = {f.name for f in dataclasses.fields(trainer.TrainConfig)}
    train_over = {k: v for k, v in values.items() if k in train_fields}
    if train_over:
        cfg = dataclasses.replace(
            cfg, train=dataclasses.replace(cfg.train, **train_over))
    if "s" in values:
        cfg = dataclasses.replace(
            cfg, generator_spec=dataclasses.replace(cfg.generator_spec,
                                                    s=values["s"]))
    if "modulation" in values:
        cfg = dataclasses.replace(cfg, modulation=Modulation(values["modulation"]))
    if "data_modes" in values:
        cfg = dataclasses.replace(
            cfg, data_modes=tuple(DataMode(m) for m in values["data_modes"]))
    if "channel_kinds" in values:
        cfg = dataclasses.replace(
            cfg, channel_kinds=tuple(ChannelKind(k) for k in values["channel_kinds"]))
    direct = {k: v for k, v in values.items()
              if k in ("n_tx", "snr_db", "length_symbols", "sps",
                       "eval_per_class", "seed", "sweep", "snr_eval_points")}
    return dataclasses.replace(cfg, **direct)


# -- subcommands -----------------------------------------------------------------

def cmd_fit(args):
    measurements = saleh.load_measurements(args.input)
    models, devices = [], []
    for meas in measurements:
        model = saleh.fit_saleh(meas)
        rms = saleh.fit_residual_rms(model, meas)
        print(f"{meas.device_id}: alpha={model.alpha:.6g} beta={model.beta:.6g} "
              f"residual_rms={rms:.3e}")
        models.append(model)
        devices.append(meas.device_id)
    saleh.save_models(args.output, models, devices)
    write_manifest(Path(args.output).with_suffix(".manifest.json"), "fit",
                   {"input": str(args.input), "output": str(args.output)},
                   seed=None, artifacts=[args.output])
    return 0


def cmd_population(args):
    models = [m for _, m in saleh.load_models(args.input)]
    stats = modelgen.fit_population(models)
    spec = modelgen.spec_from_stats(stats, s=args.s)
    modelgen.save_spec(args.output, spec,
                       extras={"n_samples": stats.n_samples,
                               "r_squared": stats.r_squared})
    print(f"fitted population of {stats.n_samples}: mu={stats.mu:.6g} "
          f"sigma={stats.sigma:.6g} slope={stats.slope:.6g} "
          f"intercept={stats.intercept:.6g} r^2={stats.r_squared:.4f}")
    write_manifest(Path(args.output).with_suffix(".manifest.json"), "population",
                   {"input": str(args.input), "output": str(args.output),
                    "s": args.s},
                   seed=None, artifacts=[args.output])
    return 0


def cmd_gen_models(args):
    seed = _resolve_seed(args)
    if args.spec:
        gen = modelgen.load_spec(args.spec)
        gen = dataclasses.replace(gen, s=args.s)
    else:
        gen = modelgen.GeneratorSpec(s=args.s)
    models = modelgen.generate_models(gen, args.n, np.random.default_rng(seed))
    saleh.save_models(args.output, models)
    write_manifest(Path(args.output).with_suffix(".manifest.json"), "gen-models",
                   {"n": args.n, "generator_spec": dataclasses.asdict(gen)},
                   seed=seed, artifacts=[args.output])
    print(f"wrote {len(models)} models to {args.output}")
    return 0


def cmd_train(args):
    seed = _resolve_seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = experiments.PRESETS[args.preset](study="variability", seed=seed,
                                           jobs=args.jobs)
    if args.config:
        cfg = _apply_config(cfg, load_config(args.config))
    cfg = dataclasses.replace(cfg, n_tx=args.n_tx or cfg.n_tx)
    gen = dataclasses.replace(cfg.generator_spec, s=args.s)
    rng = experiments.derive_rng(seed, "train-cmd")
    transmitters = modelgen.generate_models(gen, cfg.n_tx, rng)
    packet_spec = PacketSpec(length_symbols=cfg.length_symbols,
                             modulation=cfg.modulation, sps=cfg.sps,
                             data_mode=DataMode(args.data_mode))
    channel = ChannelConfig(kind=ChannelKind(args.channel), snr_db=cfg.snr_db)
    factory = trainer.SampleFactory(transmitters, packet_spec, channel,
                                    representation=Representation(args.representation))
    if args.architecture == "conv":
        net_spec = build_conv_net(factory.feature_shape, factory.n_classes)
    else:
        net_spec = build_fc_net(int(np.prod(factory.feature_shape)),
                                factory.n_classes)
    net, history = trainer.train_best_of(net_spec, factory, cfg.train, rng)
    acc, _ = trainer.evaluate(
        net, factory, cfg.eval_per_class,
        experiments.derive_rng(seed, "train-cmd", "eval"))
    ckpt = out / "model.npz"
    hist = out / "history.csv"
    save_checkpoint(ckpt, net, seed=seed)
    trainer.write_history(hist, history)
    print(f"final accuracy {acc:.4f} over {cfg.eval_per_class} samples/class "
          f"({factory.n_classes} classes)")
    write_manifest(out / "manifest.json", "train",
                   {"preset": args.preset, "n_tx": cfg.n_tx, "s": args.s,
                    "architecture": args.architecture,
                    "representation": args.representation,
                    "channel": args.channel, "data_mode": args.data_mode,
                    "accuracy": acc},
                   seed=seed, artifacts=[ckpt, hist])
    return 0


def _sweep_config_dict(cfg: experiments.ExperimentConfig):
    d = dataclasses.asdict(cfg)
    d["modulation"] = cfg.modulation.value
    d["data_modes"] = [m.value for m in cfg.data_modes]
    d["channel_kinds"] = [k.value for k in cfg.channel_kinds]
    d["modulation_set"] = [m.value for m in cfg.modulation_set]
    d["representation"] = cfg.representation.value
    return d


def _sweep_config_from_dict(d) -> experiments.ExperimentConfig:
    return experiments.ExperimentConfig(
        study=d["study"], n_tx=d["n_tx"], snr_db=d["snr_db"],
        modulation=Modulation(d["modulation"]),
        length_symbols=d["length_symbols"], sps=d["sps"],
        data_modes=tuple(DataMode(m) for m in d["data_modes"]),
        channel_kinds=tuple(ChannelKind(k) for k in d["channel_kinds"]),
        sweep=tuple(d["sweep"]),
        snr_eval_points=tuple(d["snr_eval_points"]),
        modulation_set=tuple(Modulation(m) for m in d["modulation_set"]),
        generator_spec=modelgen.GeneratorSpec(**d["generator_spec"]),
        seed=d["seed"],
        train=trainer.TrainConfig(**d["train"]),
        eval_per_class=d["eval_per_class"],
        representation=Representation(d["representation"]),
        architecture=d["architecture"],
        jobs=d.get("jobs", 1),
    )


def run_sweep(cfg: experiments.ExperimentConfig, out_dir,
              seconds_override=None):
    """Run a study and write results CSV, plot data, and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / f"results_{cfg.study}.csv"
    try:
        records = experiments.run_study(cfg)
    except Exception:
        # leave a marker so partial output is never mistaken for results
        (out / f"results_{cfg.study}.csv.partial").touch()
        raise
    experiments.write_results(records, results_path,
                              seconds_override=seconds_override)
    plot_path = out / f"fig_{cfg.study}.dat"
    experiments.write_plot_data(records, plot_path)
    write_manifest(out / f"manifest_{cfg.study}.json", "sweep",
                   _sweep_config_dict(cfg), seed=cfg.seed,
                   artifacts=[results_path, plot_path],
                   timings=[round(r.seconds, 2) for r in records])
    return records, results_path


def cmd_sweep(args):
    if args.from_manifest:
        manifest = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
        _require_keys(manifest, ("command", "seed", "config", "timings"),
                      args.from_manifest)
        cfg = _sweep_config_from_dict(manifest["config"])
        cfg = dataclasses.replace(cfg, jobs=args.jobs)
        # pin the recorded wall times so the rerun CSV is byte-identical
        run_sweep(cfg, args.out, seconds_override=manifest["timings"])
        return 0
    if not args.study:
        raise TxidError("study name required (or --from-manifest)")
    seed = _resolve_seed(args)
    cfg = experiments.PRESETS[args.preset](args.study, seed=seed, jobs=args.jobs)
    if args.config:
        cfg = _apply_config(cfg, load_config(args.config))
    records, path = run_sweep(cfg, args.out)
    print(f"wrote {len(records)} records to {path}")
    return 0


# -- argument parsing --------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="txid",
        description="Transmitter identification from amplifier nonlinearity "
                    "fingerprints: fitting, population generation, training, "
                    "and study sweeps.",
    )
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (auto-generated and printed if absent)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker cap")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--out", default=".", help="output directory")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit amplifier models from a measurement CSV")
    f.add_argument("input")
    f.add_argument("output")
    f.set_defaults(func=cmd_fit)

    pop = sub.add_parser("population",
                         help="fit population statistics from a fitted-model CSV")
    pop.add_argument("input")
    pop.add_argument("output")
    pop.add_argument("--s", type=float, default=1.0)
    pop.set_defaults(func=cmd_population)

    g = sub.add_parser("gen-models", help="generate a transmitter population")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--s", type=float, default=1.0)
    g.add_argument("--spec", default=None, help="generator spec file")
    g.add_argument("--output", default="models.csv")
    g.set_defaults(func=cmd_gen_models)

    t = sub.add_parser("train", help="train one classifier")
    t.add_argument("--n-tx", type=int, default=None)
    t.add_argument("--s", type=float, default=1.0)
    t.add_argument("--architecture", choices=("conv", "fc"), default="conv")
    t.add_argument("--representation",
                   choices=[r.value for r in Representation],
                   default="magnitude")
    t.add_argument("--channel", choices=[k.value for k in ChannelKind],
                   default="awgn")
    t.add_argument("--data-mode", choices=[m.value for m in DataMode],
                   default="random")
    t.add_argument("--config", default=None)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="run a study sweep")
    s.add_argument("study", nargs="?", choices=experiments.STUDIES)
    s.add_argument("--config", default=None)
    s.add_argument("--from-manifest", default=None,
                   help="reproduce a previous sweep from its manifest")
    s.set_defaults(func=cmd_sweep)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TxidError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
