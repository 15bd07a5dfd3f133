"""Stochastic-gradient training of the y0/z networks on the shooting loss."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import fbsde, nn
from .errors import ConfigError, OptimizerError, SimulationBlowUpError, TrainingError
from .graphon import GraphonKernel
from .market import LABEL_SCHEMES, MarketModel, TimeGrid, label_grid, sample_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    graphon: GraphonKernel
    model: MarketModel
    grid: TimeGrid
    K: int = 10_000
    M: int = 512
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay_every: int = 0  # 0 disables step decay
    lr_decay_factor: float = 0.5
    eval_every: int = 100
    M_val: int = 4096
    val_seed: int = 0
    seed: int = 0
    hidden: tuple = (64, 64, 64)
    z_mode: str = "shared"
    label_scheme: str = "iid"

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1", "train.K")
        if self.M < 2:
            raise ConfigError("M must be >= 2", "train.M")
        if self.M_val < 1:
            raise ConfigError("M_val must be >= 1", "train.M_val")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1", "train.eval_every")
        if not self.lr > 0:
            raise ConfigError("lr must be positive", "train.lr")
        if self.label_scheme not in LABEL_SCHEMES:
            raise ConfigError(f"unknown label scheme {self.label_scheme!r}", "train.label_scheme")

    def lr_at(self, k):
        if self.lr_decay_every:
            return self.lr * self.lr_decay_factor ** (k // self.lr_decay_every)
        return self.lr


@dataclass
class TrainReport:
    controls: fbsde.Controls
    iterations: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_rel_error: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def final_val_loss(self):
        return self.val_loss[-1]

    @property
    def final_val_rel_error(self):
        return self.val_rel_error[-1]


def validation_batch(cfg):
    """Fixed batch on the label grid ``(k + 1/2)/M_val`` with seed ``val_seed``."""
    rng = np.random.default_rng(cfg.val_seed)
    return sample_batch(cfg.model, cfg.grid, cfg.M_val, rng, labels=label_grid(cfg.M_val),
                        seed=cfg.val_seed)


def y0_values(controls, labels, x0=0.0):
    labels = np.asarray(labels, dtype=np.float64)
    x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), labels.shape)
    return nn.forward(controls.y0, np.column_stack((labels, x0)))[:, 0]


def validation_relative_error(controls, oracle, labels, x0=0.0):
    """Mean of ``|y0(u) - oracle(u)| / |oracle(u)|`` in percent.

    Labels where the oracle is (numerically) zero are skipped.
    """
    if oracle is None:
        raise ConfigError("no closed-form oracle for this configuration")
    labels = np.asarray(labels, dtype=np.float64)
    ref = np.asarray(oracle(labels), dtype=np.float64)
    keep = np.abs(ref) >= 1e-12
    if not np.any(keep):
        return float("nan")
    got = y0_values(controls, labels[keep], x0)
    return float(100.0 * np.mean(np.abs(got - ref[keep]) / np.abs(ref[keep])))


def _streams(seed):
    init_ss, batch_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(batch_ss)


def train(cfg, init=None, oracle=None, frozen=None, callback=None):
    """Run ``cfg.K`` Adam steps on freshly sampled batches.

    ``oracle`` maps labels to reference Y0 values and adds the validation
    relative error to the history.  ``frozen`` (labels, mean-field array)
    switches to best-response training: labels stay fixed and the
    interaction term is read from the array instead of being recomputed.
    """
    init_rng, batch_rng = _streams(cfg.seed)
    controls = init.copy() if init is not None else fbsde.init_controls(
        cfg.grid, init_rng, cfg.hidden, cfg.z_mode)
    adam = {name: nn.AdamState.for_params(p, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
                                          eps=cfg.eps)
            for name, p in controls.networks().items()}
    if frozen is None:
        val_batch = validation_batch(cfg)
        val_mf = None
    else:
        labels, mf = frozen
        val_batch = sample_batch(cfg.model, cfg.grid, len(labels), np.random.default_rng(cfg.val_seed),
                                 labels=labels, seed=cfg.val_seed)
        val_mf = mf
    report = TrainReport(controls)
    start = time.perf_counter()
    for k in range(cfg.K):
        if frozen is None:
            batch = sample_batch(cfg.model, cfg.grid, cfg.M, batch_rng,
                                     label_scheme=cfg.label_scheme)
            mf = None
        else:
            batch = sample_batch(cfg.model, cfg.grid, len(frozen[0]), batch_rng, labels=frozen[0])
            mf = frozen[1]
        try:
            loss, grads, _ = fbsde.rollout_backward(controls, cfg.graphon, cfg.model, cfg.grid,
                                                    batch, frozen_mf=mf)
        except SimulationBlowUpError as exc:
            raise TrainingError(str(exc), k) from exc
        if not math.isfinite(loss):
            raise TrainingError("non-finite training loss", k)
        lr = cfg.lr_at(k)
        nets = controls.networks()
        gnets = grads.networks()
        new = {}
        for name, p in nets.items():
            adam[name].lr = lr
            try:
                new[name], adam[name] = nn.adam_step(p, gnets[name], adam[name])
            except OptimizerError as exc:
                raise TrainingError(f"{name}: {exc}", k) from exc
        controls = fbsde.Controls.from_networks(new)
        if (k + 1) % cfg.eval_every == 0 or k + 1 == cfg.K:
            try:
                vtraj = fbsde.rollout(controls, cfg.graphon, cfg.model, cfg.grid, val_batch,
                                      frozen_mf=val_mf)
            except SimulationBlowUpError as exc:
                raise TrainingError(f"validation: {exc}", k) from exc
            vloss = fbsde.shooting_loss(vtraj)
            if not math.isfinite(vloss):
                raise TrainingError("non-finite validation loss", k)
            rel = (validation_relative_error(controls, oracle, val_batch.labels)
                   if oracle is not None else float("nan"))
            report.iterations.append(k + 1)
            report.train_loss.append(loss)
            report.val_loss.append(vloss)
            report.val_rel_error.append(rel)
            log.info("iter %6d  loss %.3e  val %.3e  rel %.3e%%", k + 1, loss, vloss, rel)
            if callback is not None:
                callback(k + 1, controls, report)
    report.controls = controls
    report.wall_time = time.perf_counter() - start
    return report


HISTORY_SCHEMA = "graphon_fbsde.train_history/v1"


def write_history_csv(report, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {HISTORY_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "train_loss", "val_loss", "val_rel_error"))
        for row in zip(report.iterations, report.train_loss, report.val_loss, report.val_rel_error):
            w.writerow([row[0], *(repr(float(x)) for x in row[1:])])
