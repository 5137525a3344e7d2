"""Command-line front end.

Exit status: 0 success, 1 input or validation error, 2 Poisson
non-convergence, 3 internal error.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .exceptions import CrcEvalError, EstimationError, InputError
from .report import (
    CONFIG_KEYS,
    RunConfig,
    _write_atomic,
    build_sections,
    dumps,
    load_model_panel,
    run_report,
    year_effects_csv,
)

_LOGGER = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_INTERNAL = 0, 1, 2, 3

_CONFIG_HELP = "\n".join(f"  {k}: {v}" for k, v in CONFIG_KEYS.items())


class _Ctx:
    def __init__(self, config, out, fmt, seed, fixed_clock):
        self.config_path = config
        self.out = out
        self.format = fmt
        self.seed = seed
        self.fixed_clock = fixed_clock

    def config(self) -> RunConfig:
        if self.config_path is None:
            raise click.UsageError("--config is required for this command")
        return RunConfig.load(self.config_path)

    def out_dir(self, cfg: RunConfig | None) -> Path:
        if self.out is not None:
            return Path(self.out)
        if cfg is not None and cfg.output_dir is not None:
            return cfg.output_dir
        return Path("out")


@click.group(
    help="Panel estimators, indicators and descriptive analytics for research-center evaluation.\n\n"
    "The config file is a flat JSON object with these keys:\n\n" + _CONFIG_HELP.replace("\n", "\n\n"),
)
@click.option("--config", "config", type=click.Path(dir_okay=False), help="Run config (flat JSON).")
@click.option("--out", "out", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None,
              help="File format for keyword and mosaic tables.")
@click.option("--seed", type=int, default=649, show_default=True, help="Seed for make-fixture.")
@click.option("--fixed-clock", is_flag=True, help="Pin report timestamps (test mode).")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx, config, out, fmt, seed, fixed_clock, verbose):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    ctx.obj = _Ctx(config, out, fmt, seed, fixed_clock)


@cli.command("ingest-check")
@click.pass_obj
def ingest_check(obj: _Ctx):
    """Validate the panel CSV and print a summary."""
    cfg = obj.config()
    if cfg.panel_csv is None:
        raise click.UsageError("config has no panel_csv")
    panel = load_model_panel(cfg)
    summary = {
        "n_obs": panel.n_obs,
        "n_units": len(panel.units),
        "years": list(panel.years),
        "life_spans": panel.life_spans(),
        "columns": list(panel.column_names),
    }
    click.echo(json.dumps(summary, indent=2))


def _fit_command(obj: _Ctx, section: str):
    cfg = obj.config()
    name = section + ("_lag" if cfg.lags else "")
    cfg.validate([name])
    docs, _, nonconverged = build_sections(cfg, [name])
    files = {f"fit_{section}.json": dumps(docs[name]), "year_effects.csv": year_effects_csv(docs)}
    out = obj.out_dir(cfg)
    _write_atomic(out, files)
    click.echo(str(out / f"fit_{section}.json"))
    return EXIT_NONCONVERGED if nonconverged else EXIT_OK


@cli.command("fit-fe")
@click.pass_obj
def fit_fe_cmd(obj):
    """Time fixed-effects (within) regression."""
    return _fit_command(obj, "fe")


@cli.command("fit-fep")
@click.pass_obj
def fit_fep_cmd(obj):
    """Fixed-effects Poisson regression."""
    return _fit_command(obj, "fep")


def _section_command(obj: _Ctx, section: str):
    cfg = obj.config()
    cfg.validate([section])
    _, files, _ = build_sections(cfg, [section], obj.format)
    out = obj.out_dir(cfg)
    _write_atomic(out, files)
    for name in files:
        click.echo(str(out / name))
    return EXIT_OK


@cli.command("indicators")
@click.pass_obj
def indicators_cmd(obj):
    """Indicator tables for the center and each sub-project."""
    return _section_command(obj, "indicators")


@cli.command("network")
@click.pass_obj
def network_cmd(obj):
    """DP-JEL network export and degree summary."""
    return _section_command(obj, "network")


@cli.command("keywords")
@click.pass_obj
def keywords_cmd(obj):
    """Top keywords of both corpora and their overlap."""
    return _section_command(obj, "keywords")


@cli.command("mosaic")
@click.pass_obj
def mosaic_cmd(obj):
    """Mosaic rectangles for gender x location x sector."""
    return _section_command(obj, "mosaic")


@cli.command("report")
@click.pass_obj
def report_cmd(obj):
    """Run every section listed in the config and write report.json."""
    cfg = obj.config()
    out = obj.out_dir(cfg)
    _, nonconverged = run_report(cfg, out, fixed_clock=obj.fixed_clock, table_format=obj.format)
    click.echo(str(out / "report.json"))
    if nonconverged:
        click.echo(f"warning: no convergence in {nonconverged}", err=True)
        return EXIT_NONCONVERGED
    return EXIT_OK


@cli.command("make-fixture")
@click.pass_obj
def make_fixture_cmd(obj):
    """Write the seeded synthetic fixture (CSV files, corpora, config.json)."""
    from .fixture import write_fixture

    path = write_fixture(obj.out_dir(None), obj.seed)
    click.echo(str(path))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="crceval", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_INPUT
    except click.exceptions.Abort:
        return EXIT_INPUT
    except (InputError, EstimationError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INPUT
    except CrcEvalError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        _LOGGER.exception("internal error")
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
