"""Mode dispatch: run a validated :class:`RunConfig` and write its artifacts."""
from __future__ import annotations

import csv
import datetime as _dt
import logging
import os
import time

import numpy as np

from . import __version__, config, fbsde, metrics, nn, oracle, plots, trainer
from .artifacts import RunManifest, file_entry
from .errors import ConfigError, UnsupportedConfigurationError
from .exploitability import evaluate_exploitability, write_exploitability_csv
from .market import eta as eta_fn
from .market import label_grid, sample_batch

log = logging.getLogger(__name__)

OUT_ENV = "GRAPHON_FBSDE_OUT"
CHECKPOINT = "checkpoint.gfb"
UTILITY_LABELS = 64


def resolve_out(cfg, override=None):
    """``override`` (command line) beats the environment variable, which beats the file."""
    return override or os.environ.get(OUT_ENV) or cfg.out


def closed_form_oracle(cfg):
    """Closed-form Y0 function, or None when the model has no closed form."""
    try:
        p = oracle.ClosedFormParams.from_model(cfg.model, cfg.grid, cfg.graphon)
    except UnsupportedConfigurationError:
        return None
    return oracle.closed_form_Y0_fn(p)


def load_controls(path, cfg):
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    networks, meta = nn.load_checkpoint(path)
    controls = fbsde.Controls.from_networks(networks)
    if controls.z_mode == "per_step" and len(controls.z) != cfg.grid.n_star:
        raise ConfigError(f"checkpoint has {len(controls.z)} z-networks but the grid has "
                          f"{cfg.grid.n_star} steps", "grid.n_star")
    return controls


def save_controls(path, controls, cfg):
    nn.save_checkpoint(path, controls.networks(), {"config": config.to_dict(cfg),
                                                   "version": __version__})


def _fmt(v):
    return "" if not np.isfinite(v) else repr(float(v))


def write_utilities(controls, cfg, path):
    labels = label_grid(UTILITY_LABELS)
    x0 = np.full(len(labels), cfg.model.xi.mean)
    y0 = trainer.y0_values(controls, labels, x0)
    util = np.full(len(labels), np.nan)
    ok = eta_fn(cfg.model, labels) > 0
    if np.any(ok):
        util[ok] = metrics.equilibrium_utility(cfg.model, cfg.graphon, labels[ok], y0[ok])
    metrics.write_utilities_csv(labels, y0, util, path)
    return labels, y0, util


def _trajectory_batch(cfg):
    P = cfg.evaluate.trajectory_particles
    rng = np.random.default_rng(cfg.evaluate.seed)
    return sample_batch(cfg.model, cfg.grid, P, rng, labels=label_grid(P), seed=cfg.evaluate.seed)


def _train_or_load(cfg, out, files, summary):
    if cfg.checkpoint:
        return load_controls(cfg.checkpoint, cfg)
    rep = trainer.train(cfg.train_config(), oracle=closed_form_oracle(cfg))
    save_controls(os.path.join(out, CHECKPOINT), rep.controls, cfg)
    trainer.write_history_csv(rep, os.path.join(out, "history.csv"))
    files += [CHECKPOINT, "history.csv"]
    summary.update(final_val_loss=rep.final_val_loss, final_val_rel_error=rep.final_val_rel_error)
    return rep.controls


def _mode_train(cfg, out, files, summary):
    tc = cfg.train_config()
    rep = trainer.train(tc, oracle=closed_form_oracle(cfg))
    save_controls(os.path.join(out, CHECKPOINT), rep.controls, cfg)
    trainer.write_history_csv(rep, os.path.join(out, "history.csv"))
    write_utilities(rep.controls, cfg, os.path.join(out, "utilities.csv"))
    traj = fbsde.rollout(rep.controls, cfg.graphon, cfg.model, cfg.grid, _trajectory_batch(cfg))
    fbsde.write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    files += [CHECKPOINT, "history.csv", "utilities.csv", "trajectory.csv"]
    summary.update(iterations=rep.iterations[-1], final_val_loss=rep.final_val_loss,
                   final_val_rel_error=rep.final_val_rel_error)
    return {"wall_time": rep.wall_time}


INDEPENDENCE_SCHEMA = "graphon_fbsde.independence/v1"


def _write_independence(report, t, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {INDEPENDENCE_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("pair", "t", "diff_X", "se_X", "diff_Z", "se_Z", "flagged"))
        for p in report.pairs:
            flagged = set(p.flagged_X) | set(p.flagged_Z)
            for n, tn in enumerate(t):
                dz = p.diff_Z[n] if n < len(p.diff_Z) else np.nan
                sz = p.se_Z[n] if n < len(p.se_Z) else np.nan
                w.writerow([f"{p.first}|{p.second}", repr(float(tn)), _fmt(p.diff_X[n]),
                            _fmt(p.se_X[n]), _fmt(dz), _fmt(sz), int(n in flagged)])


def _mode_evaluate(cfg, out, files, summary):
    if not cfg.checkpoint:
        raise FileNotFoundError("evaluate mode needs a checkpoint")
    controls = load_controls(cfg.checkpoint, cfg)
    ev = cfg.evaluate
    batch = sample_batch(cfg.model, cfg.grid, ev.M, np.random.default_rng(ev.seed), seed=ev.seed)
    traj = fbsde.rollout(controls, cfg.graphon, cfg.model, cfg.grid, batch)
    groups = metrics.default_groups(cfg.graphon)
    curves = metrics.wealth_curves(traj, cfg.graphon, groups)
    metrics.write_metrics_csv(curves, os.path.join(out, "metrics.csv"))
    write_utilities(controls, cfg, os.path.join(out, "utilities.csv"))
    small = fbsde.rollout(controls, cfg.graphon, cfg.model, cfg.grid, _trajectory_batch(cfg))
    fbsde.write_trajectory_csv(small, os.path.join(out, "trajectory.csv"))
    files += ["metrics.csv", "utilities.csv", "trajectory.csv"]
    summary["loss"] = fbsde.shooting_loss(traj)
    if len(groups) >= 2:
        rep = metrics.index_independence_test(traj, groups)
        _write_independence(rep, cfg.grid.nodes, os.path.join(out, "independence.csv"))
        files.append("independence.csv")
        summary["flagged_nodes"] = rep.flagged_nodes
    return {}


def _mode_exploitability(cfg, out, files, summary):
    controls = _train_or_load(cfg, out, files, summary)
    ex = cfg.exploitability
    br_cfg = cfg.train_config(K=ex.K, lr=ex.lr, lr_decay_every=ex.lr_decay_every,
                              eval_every=ex.eval_every, seed=cfg.seed + 1)
    rep = evaluate_exploitability(controls, cfg.graphon, cfg.model, cfg.grid, br_cfg, M=ex.M,
                                  seed=ex.seed, n_paths=ex.n_paths)
    write_exploitability_csv(rep, os.path.join(out, "exploitability.csv"))
    trainer.write_history_csv(rep.br_report, os.path.join(out, "best_response_history.csv"))
    files += ["exploitability.csv", "best_response_history.csv"]
    summary.update(average_exploitability=rep.average, raw_average=rep.raw_average,
                   negative_labels=len(rep.negative_labels), br_final_loss=rep.br_final_loss)
    return {}


ORACLE_SCHEMA = "graphon_fbsde.oracle_compare/v1"


def _mode_oracle_compare(cfg, out, files, summary):
    fn = closed_form_oracle(cfg)
    if fn is None:
        raise UnsupportedConfigurationError(
            "no closed-form oracle for this model (needs constant_bs, constant eta, zero xi)",
            "model")
    controls = _train_or_load(cfg, out, files, summary)
    labels = label_grid(UTILITY_LABELS)
    learned = trainer.y0_values(controls, labels)
    ref = fn(labels)
    with open(os.path.join(out, "oracle.csv"), "w", newline="") as fh:
        fh.write(f"# schema: {ORACLE_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("label", "y0_learned", "y0_oracle", "rel_error_pct"))
        for u, a, b in zip(labels, learned, ref):
            rel = 100.0 * abs(a - b) / abs(b) if abs(b) >= 1e-12 else np.nan
            w.writerow([repr(float(u)), repr(float(a)), repr(float(b)), _fmt(rel)])
    batch = _trajectory_batch(cfg)
    p = oracle.ClosedFormParams.from_model(cfg.model, cfg.grid, cfg.graphon)
    fbsde.write_trajectory_csv(oracle.oracle_trajectory(p, cfg.grid, batch),
                               os.path.join(out, "oracle_trajectory.csv"))
    fbsde.write_trajectory_csv(fbsde.rollout(controls, cfg.graphon, cfg.model, cfg.grid, batch),
                               os.path.join(out, "trajectory.csv"))
    files += ["oracle.csv", "oracle_trajectory.csv", "trajectory.csv"]
    summary["val_rel_error"] = trainer.validation_relative_error(controls, fn, labels)
    return {}


def _mode_sweep(cfg, out, files, summary):
    fn = closed_form_oracle(cfg)
    sw = cfg.sweep
    rows, times = [], []
    for M in sw.M_values:
        for seed in sw.seeds:
            rep = trainer.train(cfg.train_config(M=M, K=sw.K, seed=seed), oracle=fn)
            rows.append((M, seed, rep.final_val_loss, rep.final_val_rel_error))
            times.append((M, seed, rep.wall_time))
            log.info("sweep M=%d seed=%d rel=%.4g%% time=%.1fs", M, seed,
                     rep.final_val_rel_error, rep.wall_time)
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        fh.write("# schema: graphon_fbsde.sweep/v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("M", "seed", "final_val_loss", "final_val_rel_error"))
        for M, s, loss, rel in rows:
            w.writerow([M, s, _fmt(loss), _fmt(rel)])
    with open(os.path.join(out, "sweep_summary.csv"), "w", newline="") as fh:
        fh.write("# schema: graphon_fbsde.sweep_summary/v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("M", "runs", "mean_val_loss", "mean_val_rel_error", "se_val_rel_error"))
        for M in sw.M_values:
            r = np.array([x[3] for x in rows if x[0] == M])
            lo = np.array([x[2] for x in rows if x[0] == M])
            se = r.std(ddof=1) / np.sqrt(len(r)) if len(r) > 1 else np.nan
            w.writerow([M, len(r), _fmt(lo.mean()), _fmt(r.mean()), _fmt(se)])
    with open(os.path.join(out, "sweep_runtime.csv"), "w", newline="") as fh:
        fh.write("# schema: graphon_fbsde.sweep_runtime/v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("M", "seed", "runtime_s"))
        for M, s, t in times:
            w.writerow([M, s, repr(float(t))])
    files += ["sweep.csv", "sweep_summary.csv"]
    summary["mean_runtime_s"] = {str(M): float(np.mean([t for m, _, t in times if m == M]))
                                 for M in sw.M_values}
    return {"nondeterministic": ["sweep_runtime.csv"]}


MODES = {
    "train": _mode_train,
    "evaluate": _mode_evaluate,
    "exploitability": _mode_exploitability,
    "oracle-compare": _mode_oracle_compare,
    "sweep-M": _mode_sweep,
}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run(cfg, out=None):
    """Execute ``cfg.mode``; writes artifacts and ``manifest.json`` into the output directory."""
    out = resolve_out(cfg, out)
    os.makedirs(out, exist_ok=True)
    started, t0 = _now(), time.perf_counter()
    files, summary = [], {}
    extra = MODES[cfg.mode](cfg, out, files, summary)
    nondet = extra.get("nondeterministic", [])
    if cfg.plots:
        csvs = [os.path.join(out, f) for f in files if f.endswith(".csv")]
        for svg in plots.emit_plots(csvs, out):
            files.append(os.path.basename(svg))
    config.dump(cfg, os.path.join(out, "config.yaml"))
    files.append("config.yaml")
    entries = [file_entry(out, f) for f in files] + [file_entry(out, f, False) for f in nondet]
    manifest = RunManifest(config.to_dict(cfg), __version__, cfg.mode, started, _now(),
                           time.perf_counter() - t0, entries, _jsonable(summary))
    manifest.write(os.path.join(out, "manifest.json"))
    return manifest


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, float)):
            v = float(v) if np.isfinite(v) else None
        elif isinstance(v, np.integer):
            v = int(v)
        out[k] = v
    return out
