"""Command-line entry point: ``elbowctl run|preset|list-presets``."""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .config import (
    PRESET_DESCRIPTIONS,
    ConfigError,
    load_documents,
    manifests_from_documents,
    override,
    preset_documents,
)
from .runner import ExitCode, run_experiments


def _parse_disturbance(ctx, param, value):
    if value is None:
        return None
    try:
        parts = [float(x) for x in value.split(",")]
    except ValueError:
        raise click.BadParameter("expected two numbers, e.g. 1,0.5") from None
    if len(parts) != 2:
        raise click.BadParameter("expected two comma-separated numbers")
    return tuple(parts)


def run_options(fn):
    options = [
        click.option("--out", type=click.Path(file_okay=False, path_type=Path),
                     help="Output directory (overrides [output] dir)."),
        click.option("--dt", type=float, help="Integration step in seconds."),
        click.option("--t-end", "t_end", type=float, help="Run length in seconds."),
        click.option("--disturbance", callback=_parse_disturbance, metavar="D1,D2",
                     help="Constant load torque on the two joints (N m)."),
        click.option("--seed", type=int, default=None,
                     help="Reserved; the dynamics are deterministic."),
        click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True),
        click.option("--strict-certificates", is_flag=True,
                     help="Exit with status 3 when a stability certificate fails."),
        click.option("--figures", is_flag=True, help="Also render a PNG per run."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _launch(docs, out, dt, t_end, disturbance, workers, strict_certificates, figures):
    try:
        docs = [override(d, dt=dt, t_end=t_end, disturbance=disturbance, out=out) for d in docs]
        manifests = manifests_from_documents(docs)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(ExitCode.CONFIG_ERROR)

    summary = (out or manifests[0].out_dir) / "summary.json"
    code, entries = run_experiments(manifests, workers=workers,
                                    strict_certificates=strict_certificates,
                                    figures=figures, summary_path=summary)
    for e in entries:
        if e["status"] == "ok":
            m = e["metrics"]
            cert = "pass" if e["certificates"]["passed"] else "FAIL"
            click.echo(f"{e['name']}: rms_error={m['rms_error']:.4g} "
                       f"terminal_error={m['terminal_error']:.4g} certificates={cert}")
        else:
            click.echo(f"{e['name']}: {e['status']} ({e['error']})")
    click.echo(f"summary: {summary}")
    sys.exit(int(code))


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose):
    """Simulate disturbance-rejecting tracking controllers on a two-link elbow arm."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@run_options
def run(config_file, out, dt, t_end, disturbance, seed, workers, strict_certificates, figures):
    """Run the experiment(s) described by a TOML config file."""
    try:
        docs = load_documents(config_file)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(ExitCode.CONFIG_ERROR)
    _launch(docs, out, dt, t_end, disturbance, workers, strict_certificates, figures)


@main.command()
@click.argument("name")
@run_options
def preset(name, out, dt, t_end, disturbance, seed, workers, strict_certificates, figures):
    """Run a built-in preset (fig2 ... fig7, or the whole 'all' batch)."""
    try:
        docs = preset_documents(name)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(ExitCode.CONFIG_ERROR)
    _launch(docs, out, dt, t_end, disturbance, workers, strict_certificates, figures)


@main.command("list-presets")
def list_presets():
    """Show the built-in presets."""
    for name in sorted(PRESET_DESCRIPTIONS):
        click.echo(f"{name:6s}  {PRESET_DESCRIPTIONS[name]}")


if __name__ == "__main__":
    main()
