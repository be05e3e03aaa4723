"""Command-line entry points: run/compare/serve/synth/replay.

Exit codes: 0 success, 2 config error, 3 runtime error, 4 interrupted
feedback session.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from . import experiment
from .exceptions import ConfigError, ImilError


def _fail(code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _load(config_path: str, seed: int | None, port: int | None,
          feedback: str | None) -> experiment.ExperimentConfig:
    try:
        config = experiment.load_config(config_path)
        return experiment.apply_overrides(config, seed=seed, feedback=feedback,
                                          port=port)
    except ConfigError as exc:
        _fail(2, f"config error: {exc}")


def _execute(config: experiment.ExperimentConfig, out_dir: str,
             resume: bool) -> None:
    try:
        report = experiment.run_experiment(config, out_dir, resume=resume)
    except experiment.ExperimentInterrupted as exc:
        _fail(4, str(exc))
    except ConfigError as exc:
        _fail(2, f"config error: {exc}")
    except ImilError as exc:
        _fail(3, f"runtime error: {exc}")
    except OSError as exc:
        _fail(3, f"runtime error: {exc}")
    click.echo(f"report written to {report}")


@click.group()
def main():
    """Human-in-the-loop image-classifier training experiments."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="TOML or JSON experiment config.")
@click.option("--seed", type=int, default=None, help="Override the run seed.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory for run artifacts.")
@click.option("--resume", is_flag=True,
              help="Resume an interrupted feedback session in --out.")
@click.option("--port", type=int, default=None,
              help="Feedback service port (interactive mode).")
@click.option("--feedback", default=None,
              help="Override feedback source: interactive, scripted:PATH, "
                   "oracle, or random.")
def run(config_path, seed, out_dir, resume, port, feedback):
    """Train and evaluate one experiment."""
    config = _load(config_path, seed, port, feedback)
    _execute(config, out_dir, resume)


@main.command()
@click.argument("run_dirs", nargs=-1, required=True,
                type=click.Path(exists=False))
@click.option("--out", "csv_path", type=click.Path(), default=None,
              help="Also write the table as CSV to this path.")
def compare(run_dirs, csv_path):
    """Tabulate metrics across runs; deltas are against the first run."""
    try:
        table = experiment.compare_runs(list(run_dirs), csv_path=csv_path)
    except ConfigError as exc:
        _fail(2, f"config error: {exc}")
    click.echo(table)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--resume", is_flag=True,
              help="Serve the session of an interrupted run in --out.")
@click.option("--port", type=int, default=None)
def serve(config_path, seed, out_dir, resume, port):
    """Run with the feedback service attached (interactive review)."""
    config = _load(config_path, seed, port, feedback="interactive")
    _execute(config, out_dir, resume)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def synth(config_path, out_dir):
    """Write the configured synthetic dataset as manifest + PNG files."""
    try:
        config = experiment.load_config(config_path)
        experiment.synth_dataset(config, out_dir)
    except ConfigError as exc:
        _fail(2, f"config error: {exc}")
    except OSError as exc:
        _fail(3, f"runtime error: {exc}")
    click.echo(f"dataset written to {out_dir}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--session-log", "session_log", required=True,
              type=click.Path(), help="Session log to replay.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
def replay(config_path, seed, out_dir, session_log):
    """Re-run an experiment from a recorded session log."""
    log_path = str(Path(session_log).resolve())
    config = _load(config_path, seed, None, feedback=f"scripted:{log_path}")
    # replay must fail loudly if the log does not cover the session
    config = replace(config, feedback=replace(config.feedback,
                                              scripted_strict=True))
    _execute(config, out_dir, resume=False)


if __name__ == "__main__":
    main()
