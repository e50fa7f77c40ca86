"""Command-line front end for the experiment harness."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .harness import (
    ConfigError,
    ExperimentConfig,
    cmd_compare,
    cmd_edit,
    cmd_pivot,
    cmd_schedule,
    cmd_trace,
)


def _common_options(fn):
    fn = click.option("--quiet", is_flag=True, help="Suppress progress output.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the config's testbed seed.")(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="Override the config's output directory.")(fn)
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="Experiment config JSON.")(fn)
    return fn


def _load(config_path: str, out: str | None, seed: int | None) -> ExperimentConfig:
    config = ExperimentConfig.from_file(config_path)
    if out is not None or seed is not None:
        config = config.with_overrides(seed=seed, output_dir=out)
    return config


def _fail(exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": str(exc)}) + "\n")
    raise SystemExit(2)


def _echo_paths(paths, quiet: bool) -> None:
    if not quiet:
        for path in paths:
            click.echo(f"wrote {path}")


@click.group()
def main():
    """Deterministic latent-editing experiments over analytic score models."""


@main.command()
@_common_options
def schedule(config_path, out, seed, quiet):
    """Dump the noise schedule as CSV."""
    try:
        config = _load(config_path, out, seed)
        path = cmd_schedule(config, config.output_dir)
    except ConfigError as exc:
        _fail(exc)
    _echo_paths([path], quiet)


@main.command()
@_common_options
def pivot(config_path, out, seed, quiet):
    """Locate editing pivots across the seeded testbed."""
    try:
        config = _load(config_path, out, seed)
        echo = None if quiet else click.get_text_stream("stdout")
        paths = cmd_pivot(config, config.output_dir, echo=echo)
    except ConfigError as exc:
        _fail(exc)
    _echo_paths(paths, quiet)


@main.command()
@_common_options
def edit(config_path, out, seed, quiet):
    """Run the pivot-located editing pipeline on every instance."""
    try:
        config = _load(config_path, out, seed)
        path = cmd_edit(config, config.output_dir)
    except ConfigError as exc:
        _fail(exc)
    _echo_paths([path], quiet)


@main.command()
@_common_options
def compare(config_path, out, seed, quiet):
    """Score all configured methods; write the metrics table and summary."""
    try:
        config = _load(config_path, out, seed)
        paths = cmd_compare(config, config.output_dir)
    except ConfigError as exc:
        _fail(exc)
    _echo_paths(paths, quiet)


@main.command()
@_common_options
@click.option("--instance", "instance_id", type=int, default=0,
              help="Testbed instance to trace.")
def trace(config_path, out, seed, quiet, instance_id):
    """Write baseline and zzedit trajectory CSVs for one instance."""
    try:
        config = _load(config_path, out, seed)
        paths = cmd_trace(config, config.output_dir, instance_id)
    except ConfigError as exc:
        _fail(exc)
    _echo_paths(paths, quiet)


if __name__ == "__main__":
    main()
