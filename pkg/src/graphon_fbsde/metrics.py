"""Post-processing of equilibrium trajectories: utilities, wealth curves, label tests."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .graphon import kernel_matrix
from .oracle import degree, degree_quadrature


class UnderpoweredTestWarning(UserWarning):
    pass


def equilibrium_utility(model, g, u, Y0, xi_mean_fn=None):
    """``-exp(-(xi(u) - rho * int E[xi(v)] G(u,v) dv - Y0) / eta(u))``.

    With the default zero initial wealth this is ``-exp(Y0 / eta(u))``.
    """
    u = np.asarray(u, dtype=np.float64)
    Y0 = np.asarray(Y0, dtype=np.float64)
    eta_u = np.asarray(model.eta(u), dtype=np.float64)
    if np.any(eta_u <= 0):
        raise DomainError("degenerate label: risk aversion must be positive for utilities")
    if xi_mean_fn is None:
        xi_u = model.xi.mean
        bench = model.rho * model.xi.mean * degree(g, u)
    else:
        xi_u = xi_mean_fn(u)
        bench = model.rho * np.vectorize(lambda x: degree_quadrature(g, x, weight=xi_mean_fn))(u)
    out = -np.exp(-(xi_u - bench - Y0) / eta_u)
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LabelGroup:
    """Union of label intervals ``[lo, hi)`` (``hi = 1`` is inclusive).

    ``closed=True`` makes every upper end inclusive; ``negate=True`` takes the
    complement in [0, 1].
    """

    name: str
    intervals: tuple
    closed: bool = False
    negate: bool = False

    def contains(self, u):
        u = np.asarray(u, dtype=np.float64)
        inside = np.zeros(u.shape, dtype=bool)
        for lo, hi in self.intervals:
            upper = (u <= hi) if (self.closed or hi >= 1.0) else (u < hi)
            inside |= (u >= lo) & upper
        return ~inside if self.negate else inside


def default_groups(g):
    """Natural label groups of a kernel."""
    if g.kind == "two_block" or g.kind == "power_law":
        return [LabelGroup("lower", ((0.0, 0.5),)), LabelGroup("upper", ((0.5, 1.0),))]
    if g.kind == "star":
        return [LabelGroup("major", ((0.0, g.alpha),)), LabelGroup("minor", ((g.alpha, 1.0),))]
    if g.kind == "min_max":
        inner = ((0.25, 0.75),)
        return [LabelGroup("inner", inner, closed=True),
                LabelGroup("outer", inner, closed=True, negate=True)]
    return [LabelGroup("all", ((0.0, 1.0),))]


def _mean_se(values):
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n > 1:
        se = values.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        se = np.full(values.shape[1:], np.nan)
    return mean, se


@dataclass
class GroupCurve:
    name: str
    n: int
    mean_X: np.ndarray
    se_X: np.ndarray
    mean_benchmarked_X: np.ndarray
    se_benchmarked_X: np.ndarray
    mean_Z: np.ndarray
    se_Z: np.ndarray


@dataclass
class WealthCurves:
    t: np.ndarray
    groups: dict = field(default_factory=dict)
    absent: list = field(default_factory=list)


def benchmarked_wealth(traj, g):
    """``X_i - (1/M) sum_j G(u_i, u_j) X_j`` at every node."""
    Gm = kernel_matrix(g, traj.labels)
    return traj.X - (Gm @ traj.X) / traj.M


def wealth_curves(traj, g, groups):
    """Group averages of wealth, benchmarked wealth and Z with standard errors."""
    bench = benchmarked_wealth(traj, g)
    out = WealthCurves(traj.grid.nodes.copy())
    for grp in groups:
        mask = grp.contains(traj.labels)
        n = int(mask.sum())
        if n == 0:
            out.absent.append(grp.name)
            continue
        mx, sx = _mean_se(traj.X[mask])
        mb, sb = _mean_se(bench[mask])
        mz, sz = _mean_se(traj.Z[mask])
        # Z lives on the first n_star nodes only
        mz = np.append(mz, np.nan)
        sz = np.append(sz, np.nan)
        out.groups[grp.name] = GroupCurve(grp.name, n, mx, sx, mb, sb, mz, sz)
    return out


@dataclass
class PairComparison:
    first: str
    second: str
    diff_X: np.ndarray
    se_X: np.ndarray
    diff_Z: np.ndarray
    se_Z: np.ndarray
    flagged_X: list
    flagged_Z: list


@dataclass
class IndependenceReport:
    threshold: float
    pairs: list
    warnings: list = field(default_factory=list)

    @property
    def flagged_nodes(self):
        nodes = set()
        for p in self.pairs:
            nodes.update(p.flagged_X)
            nodes.update(p.flagged_Z)
        return sorted(nodes)

    @property
    def passed(self):
        return not self.flagged_nodes


def _flags(diff, se, threshold):
    out = []
    for n, (d, s) in enumerate(zip(diff, se)):
        if not np.isfinite(d):
            continue
        if abs(d) > threshold * s if s > 0 else d != 0:
            out.append(n)
    return out


def index_independence_test(traj, groups, threshold=3.0, min_group=30):
    """Two-sample comparison of group means of X and Z at every node.

    A node is flagged when the difference of means exceeds ``threshold``
    combined standard errors.
    """
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    stats = {}
    notes = []
    for grp in groups:
        mask = grp.contains(traj.labels)
        n = int(mask.sum())
        if n < min_group:
            msg = f"group {grp.name!r} has only {n} particles; test is underpowered"
            warnings.warn(msg, UnderpoweredTestWarning, stacklevel=2)
            notes.append(msg)
        if n == 0:
            continue
        stats[grp.name] = (_mean_se(traj.X[mask]), _mean_se(traj.Z[mask]))
    names = list(stats)
    pairs = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            (mxa, sxa), (mza, sza) = stats[names[i]]
            (mxb, sxb), (mzb, szb) = stats[names[j]]
            dx, ex = mxa - mxb, np.sqrt(sxa ** 2 + sxb ** 2)
            dz, ez = mza - mzb, np.sqrt(sza ** 2 + szb ** 2)
            pairs.append(PairComparison(names[i], names[j], dx, ex, dz, ez,
                                        _flags(dx, ex, threshold), _flags(dz, ez, threshold)))
    return IndependenceReport(threshold, pairs, notes)


METRICS_SCHEMA = "graphon_fbsde.metrics/v1"
UTILITIES_SCHEMA = "graphon_fbsde.utilities/v1"


def write_metrics_csv(curves, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {METRICS_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("group", "t", "mean_X", "se_X", "mean_benchmarked_X", "se_benchmarked_X",
                    "mean_Z", "se_Z"))
        for name, c in curves.groups.items():
            for n, t in enumerate(curves.t):
                vals = (c.mean_X[n], c.se_X[n], c.mean_benchmarked_X[n], c.se_benchmarked_X[n],
                        c.mean_Z[n], c.se_Z[n])
                w.writerow([name, repr(float(t)),
                            *("" if not np.isfinite(v) else repr(float(v)) for v in vals)])


def write_utilities_csv(labels, y0, utility, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {UTILITIES_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("label", "Y0", "utility"))
        for u, y, v in zip(labels, y0, utility):
            w.writerow([repr(float(u)), repr(float(y)), "" if not np.isfinite(v) else repr(float(v))])
