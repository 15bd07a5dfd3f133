"""Black-Scholes market coefficients, time grid and Brownian batches."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DomainError

MODEL_KINDS = ("constant_bs", "markovian_bs")
ETA_KINDS = ("constant", "bump", "linear")
XI_KINDS = ("constant", "normal")


class DegenerateLabelWarning(UserWarning):
    """Risk aversion evaluated to a non-positive value at some label."""


@dataclass(frozen=True)
class TimeGrid:
    T: float = 1.0
    n_star: int = 40

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigError("horizon T must be positive", "grid.T")
        if int(self.n_star) != self.n_star or self.n_star < 1:
            raise ConfigError("n_star must be a positive integer", "grid.n_star")

    @cached_property
    def nodes(self):
        out = np.linspace(0.0, self.T, self.n_star + 1)
        out.flags.writeable = False
        return out

    @cached_property
    def dt(self):
        out = np.diff(self.nodes)
        out.flags.writeable = False
        return out

    def index(self, t):
        """Grid index of node ``t``; raises for off-grid times."""
        nodes = self.nodes
        n = int(np.argmin(np.abs(nodes - t)))
        if abs(nodes[n] - t) > 1e-12 * max(1.0, self.T):
            raise DomainError(f"time {t} is not a grid node")
        return n


@dataclass(frozen=True)
class EtaSpec:
    """Risk aversion per label: constant, ``beta u (1-u)`` (bump) or ``beta u`` (linear)."""

    kind: str = "constant"
    value: float = 3.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ETA_KINDS:
            raise ConfigError(f"unknown eta kind {self.kind!r}", "model.eta.kind")
        if self.kind == "constant" and not self.value > 0:
            raise ConfigError("constant eta must be positive", "model.eta.value")

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "constant":
            out = np.full(u.shape, float(self.value))
        elif self.kind == "bump":
            out = self.beta * u * (1.0 - u)
        else:
            out = self.beta * u
        return out[()] if out.ndim == 0 else out

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": self.kind, "beta": self.beta}


@dataclass(frozen=True)
class XiSpec:
    """Law of the initial wealth (same for every label)."""

    kind: str = "constant"
    value: float = 0.0
    std: float = 0.0

    def __post_init__(self):
        if self.kind not in XI_KINDS:
            raise ConfigError(f"unknown xi kind {self.kind!r}", "model.xi.kind")
        if self.std < 0:
            raise ConfigError("xi std must be >= 0", "model.xi.std")

    @property
    def mean(self):
        return self.value

    def sample(self, rng, size):
        if self.kind == "constant":
            return np.full(size, float(self.value))
        return self.value + self.std * rng.standard_normal(size)

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "normal", "value": self.value, "std": self.std}


@dataclass(frozen=True)
class MarketModel:
    kind: str = "constant_bs"
    sigma: float = 0.1
    theta: float = 1.0
    eta: EtaSpec = EtaSpec()
    rho: float = 1.0
    xi: XiSpec = XiSpec()
    d: int = 1

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}", "model.kind")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive", "model.sigma")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0,1]", "model.rho")
        if self.d != 1:
            raise ConfigError("only one asset per player is supported", "model.d")

    @property
    def deterministic(self):
        return self.kind == "constant_bs"

    def to_dict(self):
        out = {"kind": self.kind, "sigma": self.sigma}
        if self.kind == "constant_bs":
            out["theta"] = self.theta
        out.update({"eta": self.eta.to_dict(), "rho": self.rho, "xi": self.xi.to_dict()})
        return out


@dataclass
class BatchEntry:
    label: float
    x0: float
    W: np.ndarray
    grid: TimeGrid


@dataclass
class Batch:
    """Labels, initial wealths and Brownian increments for M particles."""

    labels: np.ndarray  # (M,)
    x0: np.ndarray  # (M,)
    dW: np.ndarray  # (M, n_star)
    grid: TimeGrid
    seed: object = None

    @property
    def M(self):
        return len(self.labels)

    @property
    def W(self):
        """Cumulative Brownian path at the nodes, shape ``(M, n_star + 1)``."""
        W = np.zeros((self.M, self.dW.shape[1] + 1))
        np.cumsum(self.dW, axis=1, out=W[:, 1:])
        return W

    def entry(self, i):
        return BatchEntry(float(self.labels[i]), float(self.x0[i]), self.W[i], self.grid)

    def subset(self, idx):
        return Batch(self.labels[idx], self.x0[idx], self.dW[idx], self.grid, self.seed)


LABEL_SCHEMES = ("iid", "stratified")


def sample_batch(model, grid, M, rng, labels=None, seed=None, label_scheme="iid"):
    """Draw labels ~ U[0,1], initial wealths from ``model.xi`` and N(0, dt) increments.

    The three families are drawn in this fixed order from ``rng``.  Passing
    ``labels`` skips the label draw (used for fixed validation grids);
    ``seed`` is only recorded on the batch.  ``label_scheme="stratified"``
    draws one uniform label inside each cell ``[k/M, (k+1)/M)``.
    """
    if M < 1:
        raise ConfigError("batch size M must be >= 1", "train.M")
    if label_scheme not in LABEL_SCHEMES:
        raise ConfigError(f"unknown label scheme {label_scheme!r}", "train.label_scheme")
    if labels is None:
        labels = rng.random(M)
        if label_scheme == "stratified":
            labels = (np.arange(M) + labels) / M
    else:
        labels = np.asarray(labels, dtype=np.float64)
        if labels.shape != (M,):
            raise ConfigError("labels must have length M")
    x0 = model.xi.sample(rng, M)
    dW = rng.standard_normal((M, grid.n_star)) * np.sqrt(grid.dt)[None, :]
    return Batch(labels, x0, dW, grid, seed)


def label_grid(M):
    """Equispaced cell-midpoint labels ``(k + 1/2)/M``."""
    return (np.arange(M) + 0.5) / M


def theta(model, t, entry):
    """Market price of risk at grid node ``t`` for one batch entry."""
    n = entry.grid.index(t)
    if model.kind == "constant_bs":
        return float(model.theta)
    return float(entry.W[n])


def theta_paths(model, batch):
    """theta at every node for every particle, shape ``(M, n_star + 1)``."""
    if model.kind == "constant_bs":
        return np.full((batch.M, batch.grid.n_star + 1), float(model.theta))
    return batch.W


def eta(model, u, warn=True):
    """Risk aversion at label(s) ``u``; warns on non-positive values."""
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0) | (u > 1)):
        raise DomainError("label outside [0,1]")
    out = model.eta(u)
    if warn and np.any(np.asarray(out) <= 0):
        warnings.warn("risk aversion is non-positive at some labels; those labels are "
                      "excluded from utility reporting", DegenerateLabelWarning, stacklevel=2)
    return out
