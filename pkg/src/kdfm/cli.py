"""Command line interface: kdfm run | sweep | report.

Exit codes: 0 success, 2 configuration error, 3 data/format error,
4 numerical failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import ConfigError, DataError, NumericalError
from .experiment import (
    METHODS,
    ExperimentConfig,
    dataset_spec_from_dict,
    load_report,
    parse_data_arg,
    report_table,
    run_experiment,
    ssl_config_from_dict,
)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def _experiment_from_config(raw: dict, method: str, labels_per_class: int,
                            seeds, alpha: float, beta: float) -> ExperimentConfig:
    data = dataset_spec_from_dict(raw.get("data", {}))
    ssl = ssl_config_from_dict(raw.get("ssl", {}))
    return ExperimentConfig(
        method=method,
        labels_per_class=labels_per_class,
        data=data,
        ssl=ssl,
        seeds=tuple(seeds),
        alpha=alpha,
        beta=beta,
    )


@click.group()
def cli():
    """Desk-scale semi-supervised learning experiments."""


@cli.command()
@click.option("--method", type=click.Choice(METHODS), required=True)
@click.option("--alpha", type=float, default=None, help="SCE alpha (kd-fixmatch-sce)")
@click.option("--beta", type=float, default=None, help="SCE beta (kd-fixmatch-sce)")
@click.option("--data", "data_arg", default=None,
              help="two-moons | blobs | csv:PATH | kdf1:PATH")
@click.option("--labels-per-class", type=int, default=None)
@click.option("--epochs-outer", type=int, default=None)
@click.option("--epochs-inner", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", default=None, help="JSON config; flags override")
@click.option("--out", "out_dir", required=True, type=click.Path())
def run(method, alpha, beta, data_arg, labels_per_class, epochs_outer, epochs_inner,
        seed, config_path, out_dir):
    """Train one method with one seed and write logs plus a report."""
    raw = _load_config_file(config_path)
    if data_arg is not None:
        raw["data"] = {**raw.get("data", {}), **_spec_overrides(data_arg)}
    ssl_raw = dict(raw.get("ssl", {}))
    if epochs_outer is not None:
        ssl_raw["outer_epochs"] = epochs_outer
    if epochs_inner is not None:
        ssl_raw["inner_epochs"] = epochs_inner
    raw["ssl"] = ssl_raw
    cfg = _experiment_from_config(
        raw,
        method=method,
        labels_per_class=labels_per_class
        if labels_per_class is not None
        else raw.get("labels_per_class", 4),
        seeds=[seed] if seed is not None else raw.get("seeds", [1]),
        alpha=alpha if alpha is not None else raw.get("alpha", 1.0),
        beta=beta if beta is not None else raw.get("beta", 0.1),
    )
    report = run_experiment(cfg, out_dir)
    click.echo(
        f"{cfg.method} @ {cfg.labels_per_class} labels/class: "
        f"{report.mean_accuracy_pct:.2f}±{report.std_accuracy_pct:.2f}%"
    )


def _spec_overrides(data_arg: str) -> dict:
    spec = parse_data_arg(data_arg)
    overrides = {"kind": spec.kind}
    if spec.path is not None:
        overrides["path"] = spec.path
    return overrides


@cli.command()
@click.option("--config", "config_path", required=True, help="JSON sweep config")
@click.option("--seeds", "seeds_arg", default=None, help="comma-separated, e.g. 1,2,3,4,5")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--parallel", type=int, default=1, show_default=True)
def sweep(config_path, seeds_arg, out_dir, parallel):
    """Run a grid of methods x label budgets, aggregating each over all seeds."""
    raw = _load_config_file(config_path)
    methods = raw.get("methods") or [raw.get("method", "fixmatch")]
    budgets = raw.get("labels_per_class", 4)
    if not isinstance(budgets, list):
        budgets = [budgets]
    if seeds_arg is not None:
        try:
            seeds = [int(s) for s in seeds_arg.split(",") if s]
        except ValueError as exc:
            raise ConfigError(f"bad --seeds value {seeds_arg!r}") from exc
    else:
        seeds = raw.get("seeds", [1, 2, 3, 4, 5])
    out_path = Path(out_dir)
    for method in methods:
        for budget in budgets:
            cfg = _experiment_from_config(
                raw,
                method=method,
                labels_per_class=int(budget),
                seeds=seeds,
                alpha=raw.get("alpha", 1.0),
                beta=raw.get("beta", 0.1),
            )
            cell_dir = out_path / f"{method}_L{budget}"
            report = run_experiment(cfg, cell_dir, parallel=parallel)
            click.echo(
                f"{method} @ {budget} labels/class: "
                f"{report.mean_accuracy_pct:.2f}±{report.std_accuracy_pct:.2f}%"
            )


@cli.command(name="report")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", default=None, type=click.Path())
def report_cmd(in_dir, out_file):
    """Collect report.json files under a directory into a summary CSV."""
    paths = sorted(Path(in_dir).rglob("report.json"))
    if not paths:
        raise DataError(f"no report.json files found under {in_dir}")
    table = report_table([load_report(p) for p in paths])
    if out_file:
        Path(out_file).write_text(table)
    click.echo(table, nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 3
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
