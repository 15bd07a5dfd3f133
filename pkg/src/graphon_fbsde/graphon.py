"""Interaction kernels on [0,1]^2 and Bernoulli graph sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

KINDS = ("constant", "two_block", "star", "min_max", "power_law")


@dataclass(frozen=True)
class GraphonKernel:
    """One of the five kernels G1..G5.

    ``constant`` uses ``value`` (1 for G1), ``two_block`` uses ``a``/``b`` on
    the diagonal blocks ``[0,1/2)`` and ``[1/2,1]``, ``star`` puts ``c`` on the
    two off-diagonal blocks split at ``alpha``, ``power_law`` is
    ``(u v)^(-gamma)`` with ``gamma <= 0``.
    """

    kind: str
    value: float = 1.0
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    alpha: float = 0.5
    gamma: float = -0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown graphon kind {self.kind!r}; expected one of {KINDS}", "graphon.kind")
        if self.kind == "two_block" and (self.a < 0 or self.b < 0):
            raise ConfigError("two_block weights must be >= 0", "graphon.a")
        if self.kind == "star":
            if self.c < 0:
                raise ConfigError("star weight c must be >= 0", "graphon.c")
            if not 0.0 < self.alpha < 1.0:
                raise ConfigError("star fraction alpha must lie in (0,1)", "graphon.alpha")
        if self.kind == "power_law" and self.gamma > 0:
            raise ConfigError("power_law requires gamma <= 0 (kernel unbounded at 0 otherwise)",
                              "graphon.gamma")

    def __call__(self, u, v):
        return evaluate(self, u, v)

    def to_dict(self):
        out = {"kind": self.kind}
        out.update({k: getattr(self, k) for k in PARAMS[self.kind]})
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in KINDS:
            raise ConfigError(f"unknown graphon kind {kind!r}; expected one of {KINDS}", "graphon.kind")
        allowed = PARAMS[kind]
        for key in d:
            if key not in allowed:
                raise ConfigError(f"unexpected parameter for {kind} graphon", f"graphon.{key}")
        return cls(kind, **{k: float(v) for k, v in d.items()})


PARAMS = {
    "constant": ("value",),
    "two_block": ("a", "b"),
    "star": ("c", "alpha"),
    "min_max": (),
    "power_law": ("gamma",),
}


def constant(value=1.0):
    return GraphonKernel("constant", value=value)


def two_block(a, b):
    return GraphonKernel("two_block", a=a, b=b)


def star(c=1.0, alpha=0.2):
    return GraphonKernel("star", c=c, alpha=alpha)


def min_max():
    return GraphonKernel("min_max")


def power_law(gamma=-0.5):
    return GraphonKernel("power_law", gamma=gamma)


def _check_labels(x, name):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise DomainError(f"label {name} outside [0,1]")
    return x


def evaluate(g, u, v):
    """Kernel value ``G(u, v)``; broadcasts over array arguments."""
    u = _check_labels(u, "u")
    v = _check_labels(v, "v")
    u, v = np.broadcast_arrays(u, v)
    if g.kind == "constant":
        out = np.full(u.shape, float(g.value))
    elif g.kind == "two_block":
        lo_u, lo_v = u < 0.5, v < 0.5
        out = np.where(lo_u & lo_v, g.a, np.where(~lo_u & ~lo_v, g.b, 0.0))
    elif g.kind == "star":
        major_u, major_v = u < g.alpha, v < g.alpha
        out = np.where(major_u != major_v, g.c, 0.0)
    elif g.kind == "min_max":
        out = np.minimum(u, v) * (1.0 - np.maximum(u, v))
    else:
        if g.gamma == 0.0:
            out = np.ones(u.shape)
        else:
            out = (u * v) ** (-g.gamma)
    out = np.asarray(out, dtype=np.float64)
    return out[()] if out.ndim == 0 else out


def kernel_matrix(g, u, v=None):
    """Matrix ``[G(u_i, v_j)]``; ``v`` defaults to ``u``."""
    u = np.asarray(u, dtype=np.float64)
    v = u if v is None else np.asarray(v, dtype=np.float64)
    return evaluate(g, u[:, None], v[None, :])


def mean_field_weights(g, u, labels):
    """Weights ``[G(u, v_j)]_j`` used in the in-batch graphon average."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size == 0:
        return np.zeros(0)
    return np.atleast_1d(evaluate(g, u, labels))


def adjacency_labels(n):
    """Cell midpoints ``(i - 1/2)/n`` at which the sampled graph is evaluated."""
    return (np.arange(1, n + 1) - 0.5) / n


def sample_adjacency(g, n, rng):
    """Symmetric 0/1 matrix with ``lambda_ij ~ Bernoulli(G(x_i, x_j))``.

    One draw per unordered pair, diagonal included.  Kernel values above 1
    saturate at probability 1.
    """
    if n < 1:
        raise DomainError("population size must be >= 1")
    x = adjacency_labels(n)
    p = np.clip(kernel_matrix(g, x), 0.0, 1.0)
    iu = np.triu_indices(n)
    draws = rng.random(len(iu[0])) < p[iu]
    lam = np.zeros((n, n), dtype=np.int8)
    lam[iu] = draws
    lam = lam | lam.T
    return lam
