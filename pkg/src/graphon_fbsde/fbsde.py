"""Euler-Maruyama rollout of the controlled (X, Y) system and its exact gradient.

For particle i with label u_i, at node n::

    a      = z + eta(u_i) * theta                      (sigma * pi)
    mf_i   = rho/M * sum_j G(u_i, u_j) * a_j * theta_j
    X_n+1  = X_n + a * (theta * dt + dW)
    Y_n+1  = Y_n + (z * theta + eta/2 * theta^2 - mf_i) * dt + z * dW

with ``Y_0 = y0(u, X_0)`` and ``z = z(t, u, X, theta)``.  The shooting loss is
``mean(Y_T^2)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ShapeError, SimulationBlowUpError
from .graphon import kernel_matrix, mean_field_weights
from .market import eta as eta_fn
from .market import theta_paths

BLOW_UP = 1e6

Y0_INPUTS = ("u", "x0")
Z_INPUTS_SHARED = ("t", "u", "x", "theta")
Z_INPUTS_PER_STEP = ("u", "x", "theta")


@dataclass
class Controls:
    """The y0-network and the z-network(s).

    ``z_mode == "shared"`` holds one network fed with normalised time;
    ``"per_step"`` holds one network per time step.
    """

    y0: nn.NetworkParams
    z: list
    z_mode: str = "shared"

    def znet(self, n):
        return self.z[0] if self.z_mode == "shared" else self.z[n]

    def networks(self):
        out = {"y0": self.y0}
        if self.z_mode == "shared":
            out["z"] = self.z[0]
        else:
            out.update({f"z{n}": p for n, p in enumerate(self.z)})
        return out

    @classmethod
    def from_networks(cls, networks):
        if "z" in networks:
            return cls(networks["y0"], [networks["z"]], "shared")
        n = sum(1 for k in networks if k.startswith("z"))
        return cls(networks["y0"], [networks[f"z{i}"] for i in range(n)], "per_step")

    def map(self, fn):
        return Controls(fn(self.y0), [fn(p) for p in self.z], self.z_mode)

    def copy(self):
        return self.map(lambda p: p.copy())

    def with_z_scaled(self, factor):
        return Controls(self.y0, [p.scaled(factor) for p in self.z], self.z_mode)


def init_controls(grid, rng, hidden=(64, 64, 64), z_mode="shared", activation="tanh"):
    y0_spec = nn.MlpSpec(len(Y0_INPUTS), tuple(hidden), 1, activation)
    y0 = nn.init_params(y0_spec, rng)
    if z_mode == "shared":
        z = [nn.init_params(nn.MlpSpec(len(Z_INPUTS_SHARED), tuple(hidden), 1, activation), rng)]
    elif z_mode == "per_step":
        spec = nn.MlpSpec(len(Z_INPUTS_PER_STEP), tuple(hidden), 1, activation)
        z = [nn.init_params(spec, rng) for _ in range(grid.n_star)]
    else:
        raise ValueError(f"unknown z_mode {z_mode!r}")
    return Controls(y0, z, z_mode)


def zero_controls(grid, hidden=(8,), z_mode="shared"):
    """Networks with all parameters zero (y0 = 0, z = 0)."""
    rng = np.random.default_rng(0)
    return init_controls(grid, rng, hidden, z_mode).map(lambda p: nn.zeros(p.spec))


def constant_y0_controls(grid, y0_value, hidden=(8,), z_mode="shared"):
    """z = 0 and y0 returning ``y0_value`` everywhere (via the output bias)."""
    c = zero_controls(grid, hidden, z_mode)
    c.y0.biases[-1][:] = y0_value
    return c


def _z_features(controls, grid, n, labels, x, th):
    if controls.z_mode == "shared":
        t = np.full(len(labels), grid.nodes[n] / grid.T)
        return np.column_stack((t, labels, x, th))
    return np.column_stack((labels, x, th))


_X_COL = {"shared": 2, "per_step": 1}


@dataclass
class Trajectory:
    labels: np.ndarray
    X: np.ndarray  # (M, n*+1)
    Y: np.ndarray  # (M, n*+1)
    Z: np.ndarray  # (M, n*)
    pi: np.ndarray  # (M, n*)
    mean_field: np.ndarray  # (M, n*)
    theta: np.ndarray  # (M, n*+1)
    grid: object

    @property
    def M(self):
        return len(self.labels)


def mean_field_term(g, model, t, batch, z_values, u):
    """In-batch graphon interaction felt by label ``u`` at node ``t``."""
    z_values = np.asarray(z_values, dtype=np.float64)
    if z_values.shape != (batch.M,):
        raise ShapeError(f"z_values has shape {z_values.shape}, expected ({batch.M},)")
    n = batch.grid.index(t)
    th = theta_paths(model, batch)[:, n]
    et = eta_fn(model, batch.labels, warn=False)
    w = mean_field_weights(g, u, batch.labels)
    if batch.M == 0:
        return 0.0
    return float(np.mean(model.rho * (z_values + et * th) * th * w))


def _check(arr, name, n, node_offset=0):
    if np.abs(arr).max(initial=0.0) <= BLOW_UP:
        return
    bad = ~(np.abs(arr) <= BLOW_UP)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SimulationBlowUpError(i, n + node_offset, name, float(arr[i]))


def _simulate(controls, g, model, grid, batch, frozen_mf, update_x, keep_cache):
    M, N = batch.M, grid.n_star
    if batch.dW.shape != (M, N):
        raise ShapeError(f"batch increments have shape {batch.dW.shape}, expected {(M, N)}")
    if frozen_mf is not None and np.shape(frozen_mf) != (M, N):
        raise ShapeError(f"frozen mean field has shape {np.shape(frozen_mf)}, expected {(M, N)}")
    dt = grid.dt
    labels = batch.labels
    th = theta_paths(model, batch)
    et = eta_fn(model, labels, warn=False)
    couple = frozen_mf is None and model.rho != 0.0
    Gm = kernel_matrix(g, labels) if couple else None

    X = np.empty((M, N + 1))
    Y = np.empty((M, N + 1))
    Z = np.empty((M, N))
    MF = np.zeros((M, N))
    X[:, 0] = batch.x0
    y0_out, y0_acts = nn.forward_cached(controls.y0, np.column_stack((labels, batch.x0)))
    Y[:, 0] = y0_out[:, 0]
    _check(Y[:, 0], "Y", 0)
    caches = []
    for n in range(N):
        feats = _z_features(controls, grid, n, labels, X[:, n], th[:, n])
        z_out, acts = nn.forward_cached(controls.znet(n), feats)
        z = z_out[:, 0]
        _check(z, "Z", n)
        if keep_cache:
            caches.append(acts)
        a = z + et * th[:, n]
        if frozen_mf is not None:
            MF[:, n] = frozen_mf[:, n]
        elif couple:
            MF[:, n] = model.rho * (Gm @ (a * th[:, n])) / M
        Z[:, n] = z
        X[:, n + 1] = X[:, n] + a * (th[:, n] * dt[n] + batch.dW[:, n]) if update_x else X[:, n]
        Y[:, n + 1] = (Y[:, n] + (z * th[:, n] + 0.5 * et * th[:, n] ** 2 - MF[:, n]) * dt[n]
                       + z * batch.dW[:, n])
        _check(X[:, n + 1], "X", n, 1)
        _check(Y[:, n + 1], "Y", n, 1)
    pi = (Z + et[:, None] * th[:, :-1]) / model.sigma
    traj = Trajectory(labels.copy(), X, Y, Z, pi, MF, th, grid)
    return traj, (y0_acts, caches, Gm, et)


def rollout(controls, g, model, grid, batch, frozen_mf=None, update_x=True):
    """Simulate all particles of ``batch`` forward in time.

    ``frozen_mf`` (shape ``(M, n_star)``) replaces the in-batch interaction
    term; ``update_x=False`` keeps X at its initial value.
    """
    traj, _ = _simulate(controls, g, model, grid, batch, frozen_mf, update_x, False)
    return traj


def shooting_loss(traj):
    """Mean squared terminal value ``(1/M) sum_i Y_T^2``."""
    yT = traj.Y[:, -1]
    return float(np.mean(yT * yT))


def rollout_backward(controls, g, model, grid, batch, frozen_mf=None, update_x=True):
    """Loss, its gradient w.r.t. every network parameter, and the trajectory.

    The gradient is exact for the discrete recursion, including the
    dependence of every particle's interaction term on the other particles'
    z outputs and the path dependence through X.
    """
    traj, (y0_acts, caches, Gm, et) = _simulate(controls, g, model, grid, batch,
                                                 frozen_mf, update_x, True)
    M, N = batch.M, grid.n_star
    dt = grid.dt
    th = traj.theta
    gY = 2.0 * traj.Y[:, -1] / M
    gX = np.zeros(M)
    xcol = _X_COL[controls.z_mode]
    z_grads = [None] * len(controls.z)
    GtgY = None
    if Gm is not None:
        GtgY = Gm.T @ gY
    for n in range(N - 1, -1, -1):
        incr = th[:, n] * dt[n] + batch.dW[:, n]
        gz = gY * incr
        if GtgY is not None:
            gz = gz - dt[n] * model.rho * th[:, n] * GtgY / M
        if update_x:
            gz = gz + gX * incr
        k = 0 if controls.z_mode == "shared" else n
        pg, gin = nn.backward_cached(controls.znet(n), caches[n], gz[:, None])
        z_grads[k] = nn.add_grads(z_grads[k], pg)
        gX = gX + gin[:, xcol]
    y0_grad, _ = nn.backward_cached(controls.y0, y0_acts, gY[:, None])
    loss = shooting_loss(traj)
    return loss, Controls(y0_grad, z_grads, controls.z_mode), traj


TRAJECTORY_SCHEMA = "graphon_fbsde.trajectory/v1"
TRAJECTORY_COLUMNS = ("particle", "label", "t", "X", "Y", "Z", "pi", "mean_field")


def write_trajectory_csv(traj, path):
    """One row per (particle, node); Z, pi and mean_field are blank at T."""
    nodes = traj.grid.nodes
    N = traj.grid.n_star
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {TRAJECTORY_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i in range(traj.M):
            for n in range(N + 1):
                if n < N:
                    tail = [repr(float(traj.Z[i, n])), repr(float(traj.pi[i, n])),
                            repr(float(traj.mean_field[i, n]))]
                else:
                    tail = ["", "", ""]
                w.writerow([i, repr(float(traj.labels[i])), repr(float(nodes[n])),
                            repr(float(traj.X[i, n])), repr(float(traj.Y[i, n])), *tail])
