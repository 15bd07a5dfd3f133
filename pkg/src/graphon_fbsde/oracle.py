"""Closed-form equilibrium for deterministic coefficients and independent cross-checks.

With constant (sigma, theta, eta) the equilibrium has ``Z = 0``,
``sigma * pi = eta * theta`` and a Y path that is linear in time:

    Y_t(u) = (T - t) * theta^2 * (rho * eta * deg(u) - eta / 2),

where ``deg(u) = int_0^1 G(u, v) dv``.  The sign convention is the one of the
forward recursion in :mod:`graphon_fbsde.fbsde`, so that ``Y_T = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, UnsupportedConfigurationError
from .graphon import GraphonKernel, evaluate


@dataclass(frozen=True)
class ClosedFormParams:
    eta: float = 3.0
    theta: float = 1.0
    sigma: float = 0.1
    rho: float = 1.0
    T: float = 1.0
    graphon: GraphonKernel = GraphonKernel("constant")

    @classmethod
    def from_model(cls, model, grid, g):
        if model.kind != "constant_bs":
            raise UnsupportedConfigurationError(
                "closed-form oracle needs deterministic coefficients (constant_bs)", "model.kind")
        if model.eta.kind != "constant":
            raise UnsupportedConfigurationError(
                "closed-form oracle needs a constant risk aversion", "model.eta.kind")
        if model.xi.mean != 0.0:
            raise UnsupportedConfigurationError(
                "closed-form Y0 oracle assumes zero initial wealth", "model.xi")
        return cls(model.eta.value, model.theta, model.sigma, model.rho, grid.T, g)


def degree(g, u):
    """``int_0^1 G(u, v) dv`` in closed form."""
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0) | (u > 1)):
        raise DomainError("label outside [0,1]")
    if g.kind == "constant":
        out = np.full(u.shape, float(g.value))
    elif g.kind == "two_block":
        out = np.where(u < 0.5, 0.5 * g.a, 0.5 * g.b)
    elif g.kind == "star":
        out = np.where(u < g.alpha, g.c * (1.0 - g.alpha), g.c * g.alpha)
    elif g.kind == "min_max":
        out = 0.5 * u * (1.0 - u)
    else:
        out = u ** (-g.gamma) / (1.0 - g.gamma)
    return out[()] if out.ndim == 0 else out


def _breakpoints(g):
    if g.kind == "two_block":
        return [0.5]
    if g.kind == "star":
        return [g.alpha]
    return []


def degree_quadrature(g, u, weight=None):
    """Adaptive quadrature of ``int_0^1 weight(v) G(u, v) dv`` (scalar ``u``)."""
    weight = weight or (lambda v: 1.0)
    pts = sorted(set(_breakpoints(g) + ([u] if g.kind == "min_max" else [])) - {0.0, 1.0})
    val, _ = integrate.quad(lambda v: weight(v) * float(evaluate(g, u, v)), 0.0, 1.0,
                            points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def closed_form_Y(p, t, u, mode="general"):
    """Equilibrium Y at time ``t`` for label(s) ``u``.

    ``mode="specialized"`` uses the per-kernel expressions (G1-G3 only);
    ``mode="general"`` uses the analytic degree and works for every kernel.
    """
    u = np.asarray(u, dtype=np.float64)
    g = p.graphon
    rem = p.T - t
    th2 = p.theta ** 2
    if mode == "general":
        out = rem * th2 * (p.rho * p.eta * degree(g, u) - 0.5 * p.eta)
    elif mode == "specialized":
        if g.kind == "constant":
            out = np.full(u.shape, (p.rho * g.value - 0.5) * p.eta * th2 * rem)
        elif g.kind == "two_block":
            out = np.where(u < 0.5, 0.5 * p.eta * (p.rho * g.a - 1.0),
                           0.5 * p.eta * (p.rho * g.b - 1.0)) * th2 * rem
        elif g.kind == "star":
            out = np.where(u < g.alpha, (1.0 - g.alpha) * g.c * p.rho * p.eta - 0.5 * p.eta,
                           g.alpha * g.c * p.rho * p.eta - 0.5 * p.eta) * th2 * rem
        else:
            raise UnsupportedConfigurationError(
                f"no specialized closed form for {g.kind} graphon", "graphon.kind")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = np.asarray(out, dtype=np.float64)
    return out[()] if out.ndim == 0 else out


def closed_form_Y0_fn(p):
    return lambda u: closed_form_Y(p, 0.0, u)


def closed_form_strategy(p, u=None, eta=None):
    """Graphon equilibrium amount invested, ``eta * theta / sigma``."""
    if p.sigma == 0:
        raise DomainError("sigma must be non-zero")
    e = p.eta if eta is None else eta(u)
    return e * p.theta / p.sigma


def finite_N_strategy(p, N, lambda_ii):
    """N-player equilibrium ``N / (N - rho*lambda_ii) * eta * theta / sigma``."""
    _check_N(p, N, lambda_ii)
    return N / (N - p.rho * lambda_ii) * closed_form_strategy(p)


def error_bound(p, N, lambda_ii):
    """Bound ``rho*lambda_ii / (N - rho*lambda_ii) * |eta*theta|`` on ``|sigma(pi_N - pi)|``."""
    _check_N(p, N, lambda_ii)
    return p.rho * lambda_ii / (N - p.rho * lambda_ii) * abs(p.eta * p.theta)


def _check_N(p, N, lambda_ii):
    if N < 1:
        raise DomainError("N must be >= 1")
    if N <= p.rho * lambda_ii:
        raise DomainError("need N > rho * lambda_ii")
    if p.sigma == 0:
        raise DomainError("sigma must be non-zero")


def ode_integrate_Y(g, model, grid, u, degree_fn=None):
    """Y path on the grid for label ``u`` by backward quadrature of the Z = 0 driver.

    The interaction ``rho * theta^2 * int eta(v) G(u,v) dv`` is obtained by
    adaptive numerical quadrature (``degree_fn`` overrides it), so the result
    is independent of :func:`closed_form_Y`.
    """
    if model.kind != "constant_bs":
        raise UnsupportedConfigurationError("deterministic coefficients required", "model.kind")
    u = float(u)
    th2 = model.theta ** 2
    eta_u = float(model.eta(u))
    if degree_fn is None:
        weighted = degree_quadrature(g, u, weight=lambda v: float(model.eta(v)))
    else:
        weighted = degree_fn(u)
    driver = 0.5 * eta_u * th2 - model.rho * th2 * weighted
    dt = grid.dt
    Y = np.zeros(grid.n_star + 1)
    for n in range(grid.n_star - 1, -1, -1):
        Y[n] = Y[n + 1] - driver * dt[n]
    return Y


def oracle_trajectory(p, grid, batch):
    """Closed-form equilibrium along the Brownian paths of ``batch``.

    Z = 0, ``sigma * pi = eta * theta``, X by the exact Euler sum and Y from
    :func:`closed_form_Y`.  The result has the layout of a simulated
    trajectory so both can be written with the same CSV schema.
    """
    from .fbsde import Trajectory

    M, N = batch.M, grid.n_star
    a = p.eta * p.theta
    X = np.zeros((M, N + 1))
    X[:, 0] = batch.x0
    X[:, 1:] = batch.x0[:, None] + np.cumsum(a * (p.theta * grid.dt[None, :] + batch.dW), axis=1)
    Y = np.stack([np.broadcast_to(closed_form_Y(p, t, batch.labels), (M,)) for t in grid.nodes], axis=1)
    mf = p.rho * p.eta * p.theta ** 2 * np.asarray(degree(p.graphon, batch.labels))
    return Trajectory(batch.labels.copy(), X, Y, np.zeros((M, N)), np.full((M, N), a / p.sigma),
                      np.tile(np.reshape(mf, (M, 1)), (1, N)), np.full((M, N + 1), float(p.theta)), grid)
