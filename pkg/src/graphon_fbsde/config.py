"""Run configuration: a YAML file with nested blocks.

Grammar (all blocks optional except where a mode needs them)::

    mode: train | evaluate | exploitability | oracle-compare | sweep-M
    seed: 0                      # mandatory
    out: runs/example
    plots: true
    checkpoint: path/to/ckpt     # evaluate, and optional for exploitability/oracle-compare
    model:    {kind, sigma, theta, rho, eta: {kind, value|beta}, xi: {kind, value, std}}
    graphon:  {kind, value | a, b | c, alpha | gamma}
    grid:     {T, n_star}
    train:    {K, M, lr, beta1, beta2, eps, lr_decay_every, lr_decay_factor, eval_every,
               M_val, val_seed, hidden, z_mode, label_scheme}
    evaluate: {M, seed, trajectory_particles}
    exploitability: {M, seed, n_paths, K, lr, lr_decay_every, eval_every}
    sweep:    {M_values, seeds, K}
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import yaml

from .errors import ConfigError, GraphonFbsdeError
from .graphon import GraphonKernel
from .market import EtaSpec, MarketModel, TimeGrid, XiSpec
from .trainer import TrainConfig

MODES = ("train", "evaluate", "exploitability", "oracle-compare", "sweep-M")


@dataclass(frozen=True)
class TrainBlock:
    K: int = 10_000
    M: int = 512
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay_every: int = 0
    lr_decay_factor: float = 0.5
    eval_every: int = 100
    M_val: int = 4096
    val_seed: int = 0
    hidden: tuple = (64, 64, 64)
    z_mode: str = "shared"
    label_scheme: str = "iid"


@dataclass(frozen=True)
class EvaluateBlock:
    M: int = 4096
    seed: int = 1
    trajectory_particles: int = 64


@dataclass(frozen=True)
class ExploitabilityBlock:
    M: int = 512
    seed: int = 2
    n_paths: int = 16
    K: int = 5000
    lr: float = 1e-3
    lr_decay_every: int = 0
    eval_every: int = 100


@dataclass(frozen=True)
class SweepBlock:
    M_values: tuple = (128, 256, 512, 1024, 2048, 4096)
    seeds: tuple = (0, 1, 2, 3)
    K: int = 10_000


@dataclass(frozen=True)
class RunConfig:
    mode: str
    seed: int
    model: MarketModel = MarketModel()
    graphon: GraphonKernel = GraphonKernel("constant")
    grid: TimeGrid = TimeGrid()
    train: TrainBlock = TrainBlock()
    evaluate: EvaluateBlock = EvaluateBlock()
    exploitability: ExploitabilityBlock = ExploitabilityBlock()
    sweep: SweepBlock = SweepBlock()
    out: str = "runs/out"
    plots: bool = True
    checkpoint: str | None = None

    def train_config(self, **overrides):
        t = dataclasses.asdict(self.train)
        t.update(overrides)
        t.setdefault("seed", self.seed)
        return TrainConfig(self.graphon, self.model, self.grid, **t)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def _typed(value, kind, path):
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", path) from None
    raise AssertionError(kind)


def _block(cls, data, path):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError("unknown key", f"{path}.{key}")
        default = fields[key].default
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError("expected a list", f"{path}.{key}")
            kw[key] = tuple(_typed(v, int, f"{path}.{key}") for v in value)
        else:
            kw[key] = _typed(value, type(default), f"{path}.{key}")
    return cls(**kw)


def _sub(data, allowed, path):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path)
    for key in data:
        if key not in allowed:
            raise ConfigError("unknown key", f"{path}.{key}")
    return data


def _model(data):
    d = _sub(data, ("kind", "sigma", "theta", "rho", "eta", "xi"), "model")
    e = _sub(d.get("eta"), ("kind", "value", "beta"), "model.eta")
    x = _sub(d.get("xi"), ("kind", "value", "std"), "model.xi")
    eta = EtaSpec(**{k: (_typed(v, str, f"model.eta.{k}") if k == "kind" else _typed(v, float, f"model.eta.{k}"))
                     for k, v in e.items()})
    xi = XiSpec(**{k: (_typed(v, str, f"model.xi.{k}") if k == "kind" else _typed(v, float, f"model.xi.{k}"))
                   for k, v in x.items()})
    kw = {k: (_typed(v, str, f"model.{k}") if k == "kind" else _typed(v, float, f"model.{k}"))
          for k, v in d.items() if k not in ("eta", "xi")}
    return MarketModel(eta=eta, xi=xi, **kw)


def _graphon(data):
    if data is None:
        return GraphonKernel("constant")
    d = _sub(data, ("kind", "value", "a", "b", "c", "alpha", "gamma"), "graphon")
    for k, v in d.items():
        _typed(v, str if k == "kind" else float, f"graphon.{k}")
    return GraphonKernel.from_dict(d)


def _grid(data):
    d = _sub(data, ("T", "n_star"), "grid")
    kw = {}
    if "T" in d:
        kw["T"] = _typed(d["T"], float, "grid.T")
    if "n_star" in d:
        kw["n_star"] = _typed(d["n_star"], int, "grid.n_star")
    return TimeGrid(**kw)


TOP_KEYS = ("mode", "seed", "out", "plots", "checkpoint", "model", "graphon", "grid", "train",
            "evaluate", "exploitability", "sweep")


def from_dict(data):
    """Validate a parsed mapping; errors carry the offending field path."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    for key in data:
        if key not in TOP_KEYS:
            raise ConfigError("unknown key", key)
    mode = data.get("mode", "train")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}", "mode")
    if "seed" not in data:
        raise ConfigError("seed is mandatory", "seed")
    seed = _typed(data["seed"], int, "seed")
    try:
        cfg = RunConfig(
            mode=mode, seed=seed, model=_model(data.get("model")), graphon=_graphon(data.get("graphon")),
            grid=_grid(data.get("grid")),
            train=_block(TrainBlock, data.get("train"), "train"),
            evaluate=_block(EvaluateBlock, data.get("evaluate"), "evaluate"),
            exploitability=_block(ExploitabilityBlock, data.get("exploitability"), "exploitability"),
            sweep=_block(SweepBlock, data.get("sweep"), "sweep"),
            out=_typed(data.get("out", "runs/out"), str, "out"),
            plots=_typed(data.get("plots", True), bool, "plots"),
            checkpoint=(None if data.get("checkpoint") is None
                        else _typed(data["checkpoint"], str, "checkpoint")))
    except GraphonFbsdeError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.train_config()  # validates the train block against the model
    return cfg


def to_dict(cfg):
    out = {"mode": cfg.mode, "seed": cfg.seed, "out": cfg.out, "plots": cfg.plots}
    if cfg.checkpoint is not None:
        out["checkpoint"] = cfg.checkpoint
    m = cfg.model
    out["model"] = {"kind": m.kind, "sigma": m.sigma, "theta": m.theta, "rho": m.rho,
                    "eta": dataclasses.asdict(m.eta), "xi": dataclasses.asdict(m.xi)}
    out["graphon"] = cfg.graphon.to_dict()
    out["grid"] = {"T": cfg.grid.T, "n_star": cfg.grid.n_star}
    for name in ("train", "evaluate", "exploitability", "sweep"):
        block = dataclasses.asdict(getattr(cfg, name))
        out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in block.items()}
    return out


def loads(text):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    return from_dict(data if data is not None else {})


def dumps(cfg):
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def dump(cfg, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))
