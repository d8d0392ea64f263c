"""Command-line entry points for the benchmark harness."""

import logging
import sys

import click

from .errors import SurvbenchError
from .harness import (
    emit_reports,
    load_config,
    load_data,
    resolve_output_dir,
    run_benchmark,
    run_window_grid,
)
from .ingest import write_cohort_tables
from .seeding import stage_seed
from .split import SplitSpec, audit_split, stratified_split


def _configure_logging(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


def _load(config_path):
    try:
        return load_config(config_path)
    except (SurvbenchError, OSError, ValueError) as exc:
        raise click.ClickException(str(exc))


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(exists=True, dir_okay=False),
                             help="Path to the JSON benchmark configuration.")
out_option = click.option("--out", "out_dir", default=None,
                          help="Output directory (overrides config and "
                               "SURVBENCH_OUTPUT_DIR).")


@click.group()
@click.option("--verbose", is_flag=True, default=False)
def main(verbose):
    """Survival benchmarking toolkit for weekly dropout-risk models."""
    _configure_logging(verbose)


@main.command()
@config_option
@out_option
def run(config_path, out_dir):
    """Run the full two-arm benchmark and write all report files."""
    config = _load(config_path)
    try:
        report = run_benchmark(config, output_dir=out_dir)
    except SurvbenchError as exc:
        raise click.ClickException(str(exc))
    outdir = resolve_output_dir(config, out_dir)
    click.echo(f"report written to {outdir}")
    if not report.complete:
        for failure in report.failures:
            click.echo(f"FAILED {failure['stage']}: {failure['error']}", err=True)
        sys.exit(1)


@main.command("window-grid")
@config_option
@out_option
def window_grid(config_path, out_dir):
    """Re-run the comparable arm across the early-window sensitivity grid."""
    config = _load(config_path)
    try:
        rows = run_window_grid(config, output_dir=out_dir)
    except SurvbenchError as exc:
        raise click.ClickException(str(exc))
    for row in rows:
        click.echo(f"w={row['window_weeks']:>2} {row['model']:<22} "
                   f"ibs={row['ibs']:.4f} td={row['td_concordance']:.4f}")


@main.command()
@config_option
@out_option
def synth(config_path, out_dir):
    """Generate the configured synthetic cohort tables as CSV."""
    config = _load(config_path)
    if config.data.get("kind") != "synthetic":
        raise click.ClickException("config data kind must be 'synthetic'")
    cohort = load_data(config)
    outdir = resolve_output_dir(config, out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_cohort_tables(cohort, outdir / "enrollments.csv", outdir / "activity.csv")
    click.echo(f"wrote {outdir / 'enrollments.csv'} ({cohort.n_enrollments} enrollments, "
               f"event rate {cohort.event_rate:.4f})")


@main.command("audit-split")
@config_option
@out_option
def audit_split_cmd(config_path, out_dir):
    """Split the cohort and print/write the split and context audit."""
    config = _load(config_path)
    cohort = load_data(config)
    spec = SplitSpec(test_fraction=config.test_fraction,
                     seed=stage_seed(config.seed, "split"))
    train_ids, test_ids = stratified_split(cohort.enrollments, spec)
    audit = audit_split(cohort.enrollments, train_ids, test_ids)
    click.echo(audit.format_table())
    outdir = resolve_output_dir(config, out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "split_audit.json").write_text(audit.to_json() + "\n", encoding="utf-8")


def _analysis_command(config_path, out_dir, analysis, files):
    config = _load(config_path)
    config.analyses = [analysis]
    try:
        report = run_benchmark(config, output_dir=out_dir, emit=False)
    except SurvbenchError as exc:
        raise click.ClickException(str(exc))
    outdir = resolve_output_dir(config, out_dir)
    emit_reports(report, outdir)
    for name in files:
        click.echo(f"wrote {outdir / name}")
    click.echo(f"full report in {outdir}")
    if not report.complete:
        sys.exit(1)


@main.command()
@config_option
@out_option
def ablate(config_path, out_dir):
    """Run the feature-block ablation layer only."""
    _analysis_command(config_path, out_dir, "ablation", ["ablation.csv"])


@main.command()
@config_option
@out_option
def importance(config_path, out_dir):
    """Run grouped permutation importance only."""
    _analysis_command(config_path, out_dir, "importance", ["importance.csv"])


@main.command()
@config_option
@out_option
def bootstrap(config_path, out_dir):
    """Run the no-refit bootstrap rank-stability layer only."""
    _analysis_command(config_path, out_dir, "bootstrap", ["bootstrap.csv"])


@main.command("ph-audit")
@config_option
@out_option
def ph_audit_cmd(config_path, out_dir):
    """Run the proportional-hazards audit of the comparable Cox model."""
    _analysis_command(config_path, out_dir, "ph_audit", ["ph_audit.csv"])


if __name__ == "__main__":
    main()
