"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.
"""
from __future__ import annotations

import logging
import sys

import click

from . import config, plots
from .errors import ConfigError, GraphonFbsdeError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _options(fn):
    fn = click.option("--no-plots", is_flag=True, help="Skip SVG rendering.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None,
                      help="Output directory (overrides config and environment).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the config seed.")(fn)
    fn = click.option("--checkpoint", type=click.Path(dir_okay=False), default=None,
                      help="Override the config checkpoint path.")(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                      required=True, help="YAML run configuration.")(fn)
    return fn


def _execute(mode, config_path, seed, out, no_plots, checkpoint):
    from .runner import resolve_out, run

    try:
        cfg = config.load(config_path)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from exc
    kw = {"mode": mode}
    if seed is not None:
        kw["seed"] = seed
    if no_plots:
        kw["plots"] = False
    if checkpoint is not None:
        kw["checkpoint"] = checkpoint
    cfg = cfg.replace(**kw)
    manifest = run(cfg, out)
    click.echo(f"{mode}: wrote {len(manifest.files)} files to {resolve_out(cfg, out)}")
    for key, value in manifest.summary.items():
        click.echo(f"  {key}: {value}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log training progress.")
def cli(verbose):
    """Graphon equilibrium solver."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _mode_command(mode, help_text):
    @_options
    def command(config_path, seed, out, no_plots, checkpoint):
        _execute(mode, config_path, seed, out, no_plots, checkpoint)

    command.__doc__ = help_text
    return cli.command(mode)(command)


_mode_command("train", "Train the y0/z networks and write checkpoint, history and utilities.")
_mode_command("evaluate", "Roll a checkpoint out on a fresh batch and write wealth metrics.")
_mode_command("exploitability", "Freeze the mean field, train a best response, report the gap.")
_mode_command("oracle-compare", "Compare learned Y0 with the closed-form value.")
_mode_command("sweep-M", "Repeat training over batch sizes and seeds.")


@cli.command("plot")
@click.argument("csv_files", nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=".", help="SVG directory.")
def plot_command(csv_files, out):
    """Render SVG figures from CSV outputs."""
    for svg in plots.emit_plots(list(csv_files), out):
        click.echo(svg)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="graphon-fbsde", standalone_mode=False)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return EXIT_CONFIG
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_RUNTIME
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except (GraphonFbsdeError, OSError, ArithmeticError, ValueError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
