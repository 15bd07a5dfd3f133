"""Exploitability of trained controls against a frozen graphon mean field.

Procedure: simulate the trained population once and record the interaction
term felt by every particle at every node; train fresh networks against that
frozen term; compare the utility each label obtains with the equilibrium
controls to the utility it obtains with its best response.

Utilities are estimated by simulating the realized terminal utility
``-exp(-(X_T - benchmark_T) / eta)`` of a control under a Gaussian change of
measure.  With ``a = z + eta * theta`` (the amount ``sigma * pi``) and the
frozen term ``m``, the exponent becomes

    -(xi - rho * E[xi] * deg(u)) / eta + sum_n (z^2 / (2 eta) - eta theta^2 / 2 + m) dt / eta

along paths driven by ``dW = dW' - a / eta dt`` with ``dW'`` standard.  This is
exact for the Euler scheme and does not involve the trained y0-network.  The
y0-based utilities are kept as a diagnostic.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fbsde, nn, trainer
from .errors import ShapeError
from .market import eta as eta_fn
from .market import sample_batch
from .metrics import equilibrium_utility
from .oracle import degree


class UnderTrainedBestResponseWarning(UserWarning):
    """A label's best response did worse than the equilibrium control."""


@dataclass
class FrozenMeanField:
    labels: np.ndarray  # (M,)
    values: np.ndarray  # (M, n_star)
    batch: object = None

    def __post_init__(self):
        if self.values.shape != (len(self.labels), self.values.shape[1]):
            raise ShapeError("frozen mean field rows must match labels")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("frozen mean field has non-finite entries")


def freeze_mean_field(controls, g, model, grid, batch):
    """Roll the trained population out once and record the interaction term."""
    traj = fbsde.rollout(controls, g, model, grid, batch)
    return FrozenMeanField(batch.labels.copy(), traj.mean_field.copy(), batch)


def best_response_train(frozen, cfg, init=None, oracle=None):
    """Train fresh networks against ``frozen`` (labels fixed, interaction read from it)."""
    return trainer.train(cfg, init=init, oracle=oracle, frozen=(frozen.labels, frozen.values))


def average_exploitability(V_eq, V_br):
    """``mean(max(V_br - V_eq, 0))``; negative terms raise a warning."""
    V_eq = np.asarray(V_eq, dtype=np.float64)
    V_br = np.asarray(V_br, dtype=np.float64)
    if V_eq.shape != V_br.shape:
        raise ShapeError(f"utility vectors differ in shape: {V_eq.shape} vs {V_br.shape}")
    gap = V_br - V_eq
    keep = np.isfinite(gap)
    if not np.any(keep):
        return float("nan")
    neg = np.flatnonzero(keep & (gap < 0))
    if len(neg):
        warnings.warn(f"{len(neg)} labels have a negative gap (min {gap[neg].min():.3e}); "
                      "the best response is under-trained there", UnderTrainedBestResponseWarning,
                      stacklevel=2)
    return float(np.mean(np.maximum(gap[keep], 0.0)))


def realized_utility(controls, g, model, grid, labels, mean_field, seed=0, n_paths=16):
    """Monte Carlo utility of ``controls`` for each label against a frozen term.

    Returns ``(mean, standard_error)`` per label.  Labels with non-positive
    risk aversion get NaN.
    """
    labels = np.asarray(labels, dtype=np.float64)
    mean_field = np.asarray(mean_field, dtype=np.float64)
    M, N = len(labels), grid.n_star
    if mean_field.shape != (M, N):
        raise ShapeError(f"mean field has shape {mean_field.shape}, expected {(M, N)}")
    et = np.asarray(eta_fn(model, labels, warn=False), dtype=np.float64)
    ok = et > 0
    safe_eta = np.where(ok, et, 1.0)
    R = int(n_paths)
    u = np.tile(labels, R)
    e = np.tile(safe_eta, R)
    mf = np.tile(mean_field, (R, 1))
    rng = np.random.default_rng(seed)
    x0 = model.xi.sample(rng, M * R)
    dWq = rng.standard_normal((M * R, N)) * np.sqrt(grid.dt)[None, :]
    bench0 = model.rho * model.xi.mean * degree(g, u)
    expo = -(x0 - bench0) / e
    X = x0.copy()
    W = np.zeros(M * R)
    dt = grid.dt
    for n in range(N):
        th = np.full(M * R, float(model.theta)) if model.kind == "constant_bs" else W
        feats = fbsde._z_features(controls, grid, n, u, X, th)
        z = nn.forward(controls.znet(n), feats)[:, 0]
        a = z + e * th
        expo += (z * z / (2.0 * e) - 0.5 * e * th * th + mf[:, n]) * dt[n] / e
        dW = dWq[:, n] - a / e * dt[n]
        X = X + a * (th * dt[n] + dW)
        W = W + dW
    samples = -np.exp(expo).reshape(R, M)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.full(M, np.nan)
    mean[~ok] = np.nan
    se[~ok] = np.nan
    return mean, se


@dataclass
class ExploitabilityReport:
    labels: np.ndarray
    V_eq: np.ndarray
    V_br: np.ndarray
    V_eq_se: np.ndarray
    V_br_se: np.ndarray
    average: float
    raw_average: float
    negative_labels: list
    V_eq_y0: np.ndarray
    V_br_y0: np.ndarray
    br_report: object = None
    frozen: object = None
    extras: dict = field(default_factory=dict)

    @property
    def gap(self):
        return self.V_br - self.V_eq

    @property
    def br_final_loss(self):
        return self.br_report.final_val_loss if self.br_report is not None else float("nan")


def _y0_utility(controls, model, g, labels, x0):
    et = eta_fn(model, labels, warn=False)
    out = np.full(len(labels), np.nan)
    ok = et > 0
    if np.any(ok):
        y0 = trainer.y0_values(controls, labels[ok], x0[ok])
        out[ok] = equilibrium_utility(model, g, labels[ok], y0)
    return out


def evaluate_exploitability(controls, g, model, grid, br_cfg, M=512, seed=0, n_paths=16,
                            init=None, br_controls=None):
    """Full procedure on a fresh evaluation batch of ``M`` particles.

    ``br_controls`` skips best-response training (its report is then None).
    """
    batch = sample_batch(model, grid, M, np.random.default_rng(seed), seed=seed)
    frozen = freeze_mean_field(controls, g, model, grid, batch)
    br_report = None
    if br_controls is None:
        br_report = best_response_train(frozen, br_cfg, init=init)
        br_controls = br_report.controls
    util_seed = np.random.SeedSequence(seed).spawn(1)[0].generate_state(1)[0]
    V_eq, se_eq = realized_utility(controls, g, model, grid, frozen.labels, frozen.values,
                                   util_seed, n_paths)
    V_br, se_br = realized_utility(br_controls, g, model, grid, frozen.labels, frozen.values,
                                   util_seed, n_paths)
    gap = V_br - V_eq
    avg = average_exploitability(V_eq, V_br)
    keep = np.isfinite(gap)
    raw = float(np.mean(gap[keep])) if np.any(keep) else float("nan")
    neg = [int(i) for i in np.flatnonzero(keep & (gap < 0))]
    return ExploitabilityReport(
        labels=frozen.labels, V_eq=V_eq, V_br=V_br, V_eq_se=se_eq, V_br_se=se_br,
        average=avg, raw_average=raw, negative_labels=neg,
        V_eq_y0=_y0_utility(controls, model, g, frozen.labels, batch.x0),
        V_br_y0=_y0_utility(br_controls, model, g, frozen.labels, batch.x0),
        br_report=br_report, frozen=frozen)


EXPLOITABILITY_SCHEMA = "graphon_fbsde.exploitability/v1"


def write_exploitability_csv(report, path):
    """Per-label rows, then a final ``average`` row carrying the scalar in ``gap``."""
    def fmt(v):
        return "" if not np.isfinite(v) else repr(float(v))

    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {EXPLOITABILITY_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("label", "V_eq", "V_br", "gap"))
        for u, a, b in zip(report.labels, report.V_eq, report.V_br):
            w.writerow([repr(float(u)), fmt(a), fmt(b), fmt(b - a)])
        w.writerow(["average", "", "", fmt(report.average)])
