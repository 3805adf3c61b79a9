"""Command-line entry point: ``streetrow <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import secrets
import shutil
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np
import scipy

from . import __version__
from .analysis import AnalysisError, analyze_run, write_rows
from .netmodel import NetworkError, QuantizationConfig, load_network, validate_network
from .rl.train import (EDGE_COLUMNS, METRIC_COLUMNS, SLOT_COLUMNS, CheckpointError, TrainConfig,
                       Trainer, load_checkpoint, read_checkpoint_meta, save_checkpoint)
from .scenario import (ScenarioError, ScenarioSpec, build_scenario, load_scenario, sample_day,
                       save_scenario)
from .sim import SimParams

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
MANIFEST_FORMAT = "streetrow-run"
log = logging.getLogger("streetrow")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    network: str = "grid4"
    scenario: str = "1"
    seed: int | None = None
    episodes: int | None = None
    out: str | None = None
    parking_propensity: float = 0.4
    train: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    quantization: dict = field(default_factory=dict)
    keep_checkpoints: int = 3

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise DataError(f"config {path} must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise DataError(f"config {path}: unknown keys {', '.join(unknown)}")
        if "scenario" in doc:
            doc["scenario"] = str(doc["scenario"])
        return cls(**doc)

    def apply_flags(self, args: argparse.Namespace) -> None:
        for name in ("network", "scenario", "seed", "episodes", "out"):
            v = getattr(args, name, None)
            if v is not None:
                setattr(self, name, str(v) if name == "scenario" else v)

    def resolve_seed(self) -> int:
        if self.seed is None:
            self.seed = secrets.randbits(64)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DataError("seed must be a 64-bit unsigned integer")
        self.seed = int(self.seed)
        return self.seed


def _sim_params(cfg: RunConfig) -> SimParams:
    try:
        return SimParams(**cfg.sim)
    except TypeError as exc:
        raise DataError(f"bad simulator option: {exc}") from exc


def _quant(cfg: RunConfig) -> QuantizationConfig:
    try:
        return QuantizationConfig(**cfg.quantization)
    except TypeError as exc:
        raise DataError(f"bad quantization option: {exc}") from exc


def _network(ref: str):
    net = load_network(ref)
    problems = validate_network(net)
    if problems:
        raise DataError("invalid network:\n  " + "\n  ".join(problems))
    return net


def _scenario(ref: str, net, params: SimParams, propensity: float) -> ScenarioSpec:
    if ref in ("1", "2", "3"):
        return build_scenario(int(ref), net, params, propensity)
    path = Path(ref)
    if not path.is_file():
        raise DataError(f"scenario {ref!r} is neither 1, 2, 3 nor a scenario file")
    return load_scenario(path)[0]


def _train_config(cfg: RunConfig) -> TrainConfig:
    overrides = dict(cfg.train)
    overrides["seed"] = cfg.seed
    if cfg.episodes is not None:
        overrides["episodes"] = cfg.episodes
    return TrainConfig.from_dict(overrides)


def _versions() -> dict:
    return {
        "streetrow": __version__, "python": platform.python_version(),
        "numpy": np.__version__, "scipy": scipy.__version__, "matplotlib": matplotlib.__version__,
    }


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# train


def _write_metrics(out: Path, trainer: Trainer) -> None:
    write_rows(out / "metrics.csv", METRIC_COLUMNS, trainer.metrics)
    write_rows(out / "edge_metrics.csv", EDGE_COLUMNS, trainer.edge_metrics)


def _manifest(out: Path, cfg: RunConfig, trainer: Trainer, status: str) -> None:
    _write_json(out / "manifest.json", {
        "format": MANIFEST_FORMAT, "version": 1, "metrics_schema": 1, "status": status,
        "network": trainer.net.name, "network_ref": cfg.network, "scenario": trainer.spec.id,
        "seed": trainer.config.seed, "episodes_target": trainer.config.episodes,
        "episodes_done": trainer.episodes_done, "versions": _versions(),
        "artifacts": ["config.json", "metrics.csv", "edge_metrics.csv", "checkpoints/"],
    })


def _checkpoint(out: Path, trainer: Trainer, keep: int) -> Path:
    root = out / "checkpoints"
    path = save_checkpoint(trainer, root / f"ep{trainer.episodes_done:04d}")
    if keep > 0:
        for old in sorted(p for p in root.iterdir() if p.is_dir())[:-keep]:
            shutil.rmtree(old)
    return path


def cmd_train(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.resume:
        meta = read_checkpoint_meta(args.resume)
        run_dir = Path(args.resume).resolve().parent.parent
        saved = run_dir / "config.json"
        if saved.exists() and not args.config:
            cfg = RunConfig.from_file(saved)
        cfg.seed = meta["config"]["seed"]
    cfg.apply_flags(args)
    if args.keep_checkpoints is not None:
        cfg.keep_checkpoints = args.keep_checkpoints
    cfg.resolve_seed()
    if cfg.out is None:
        if args.resume:
            cfg.out = str(Path(args.resume).resolve().parent.parent)
        else:
            cfg.out = str(Path("runs") / f"{Path(cfg.network).stem}-s{Path(cfg.scenario).stem}-seed{cfg.seed}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    params = _sim_params(cfg)
    quant = _quant(cfg)
    net = _network(cfg.network)
    spec = _scenario(cfg.scenario, net, params, cfg.parking_propensity)
    tcfg = _train_config(cfg)
    trainer = Trainer(net, spec, tcfg, params, quant)
    if args.resume:
        load_checkpoint(trainer, args.resume)
        log.info("resumed from %s at episode %d", args.resume, trainer.episodes_done)
    _write_json(out / "config.json", {**asdict(cfg), "train": tcfg.to_dict(),
                                      "sim": asdict(params), "quantization": asdict(quant)})
    _manifest(out, cfg, trainer, "incomplete")
    if not args.resume:
        _checkpoint(out, trainer, cfg.keep_checkpoints)

    stop = tcfg.episodes if args.stop_after is None else min(args.stop_after, tcfg.episodes)

    def on_episode(tr: Trainer, row: dict) -> None:
        log.info("episode %d  total %.2f  sidewalk %.3f  veh %.3f  park %.3f",
                 row["episode"], row["total_reward"], row["mean_beta_sidewalk"],
                 row["mean_beta_veh"], row["mean_beta_park"])
        if tr.episodes_done % tcfg.checkpoint_every == 0 and tr.episodes_done < stop:
            _checkpoint(out, tr, cfg.keep_checkpoints)
            _write_metrics(out, tr)
            _manifest(out, cfg, tr, "incomplete")

    trainer.train(stop, on_episode)
    _write_metrics(out, trainer)
    if trainer.episodes_done > 0 or not (out / "checkpoints").exists():
        _checkpoint(out, trainer, cfg.keep_checkpoints)
    status = "complete" if trainer.episodes_done >= tcfg.episodes else "incomplete"
    _manifest(out, cfg, trainer, status)
    print(f"{trainer.episodes_done} episodes written to {out / 'metrics.csv'} ({status})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate / analyze / utilities


def cmd_evaluate(args: argparse.Namespace) -> int:
    meta = read_checkpoint_meta(args.checkpoint)
    run_dir = Path(args.checkpoint).resolve().parent.parent
    saved = run_dir / "config.json"
    if args.config or saved.exists():
        cfg = RunConfig.from_file(args.config or saved)
    else:
        cfg = RunConfig(network=meta["network"])
    cfg.apply_flags(args)
    cfg.seed = meta["config"]["seed"] if args.seed is None else args.seed
    cfg.resolve_seed()
    params = SimParams(**meta["sim_params"]) if not cfg.sim else _sim_params(cfg)
    quant = QuantizationConfig(**meta["quantization"]) if not cfg.quantization else _quant(cfg)
    net = _network(cfg.network)
    spec = (ScenarioSpec.from_dict(meta["scenario"]) if args.scenario is None
            else _scenario(str(args.scenario), net, params, cfg.parking_propensity))
    tcfg = TrainConfig.from_dict({**meta["config"], "seed": cfg.seed})
    trainer = Trainer(net, spec, tcfg, params, quant)
    load_checkpoint(trainer, args.checkpoint, restore_progress=False)
    days, slots = trainer.evaluate(args.days, cfg.seed)
    out = Path(args.out) if args.out else run_dir / "evaluation"
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "eval_days.csv", METRIC_COLUMNS, days)
    write_rows(out / "eval_slots.csv", SLOT_COLUMNS, slots)
    for d in days:
        print(f"day {d['episode']}: total {d['total_reward']:.2f}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    manifest = run_dir / "manifest.json"
    if not manifest.exists():
        raise DataError(f"{run_dir} has no manifest.json")
    doc = json.loads(manifest.read_text())
    if doc.get("status") != "complete":
        raise DataError(f"run in {run_dir} is incomplete ({doc.get('episodes_done')} of "
                        f"{doc.get('episodes_target')} episodes)")
    res = analyze_run(run_dir, args.out, figures=not args.no_figures)
    print((res["out_dir"] / "summary.txt").read_text(), end="")
    return EXIT_OK


def cmd_validate_network(args: argparse.Namespace) -> int:
    net = load_network(args.network or "grid4")
    problems = validate_network(net)
    if problems:
        for p in problems:
            print(p)
        return EXIT_DATA
    print(f"{net.name}: {len(net.nodes)} nodes, {len(net.edges)} edges, valid")
    return EXIT_OK


def cmd_gen_scenario(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg.apply_flags(args)
    cfg.resolve_seed()
    if cfg.out is None:
        raise UsageError("--out is required")
    params = _sim_params(cfg)
    net = _network(cfg.network)
    spec = _scenario(cfg.scenario, net, params, cfg.parking_propensity)
    days = sample_day(spec, net, cfg.seed) if args.with_demand else None
    save_scenario(cfg.out, spec, days, network=cfg.network, seed=cfg.seed)
    n = sum(len(s) for s in days) if days else 0
    print(f"scenario {spec.id} written to {cfg.out}" + (f" with {n} trips" if days else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--network", help="bundled network name or network JSON path")
    common.add_argument("--scenario", help="scenario id (1, 2, 3) or scenario JSON path")
    common.add_argument("--episodes", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (or file for gen-scenario)")
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("-q", "--quiet", action="store_true")

    p = _Parser(prog="streetrow", description="Right-of-way allocation workbench")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train the per-edge agents")
    t.add_argument("--resume", help="checkpoint directory to continue from")
    t.add_argument("--stop-after", type=int, help="stop once this many episodes are done")
    t.add_argument("--keep-checkpoints", type=int, help="checkpoints to keep (0 keeps all)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="greedy evaluation of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--days", type=int, default=1)
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("analyze", parents=[common], help="phase analysis of a finished run")
    a.add_argument("run_dir")
    a.add_argument("--no-figures", action="store_true")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("validate-network", parents=[common], help="check a network file")
    v.set_defaults(func=cmd_validate_network)

    g = sub.add_parser("gen-scenario", parents=[common], help="write a scenario file")
    g.add_argument("--with-demand", action="store_true", help="include one sampled day of trips")
    g.set_defaults(func=cmd_gen_scenario)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"streetrow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"streetrow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, NetworkError, ScenarioError, CheckpointError, AnalysisError,
            FileNotFoundError) as exc:
        print(f"streetrow: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"streetrow: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"streetrow: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
