"""Command-line entry points: serve, ask, repl, eval."""

from __future__ import annotations

import logging
import sys
from datetime import date
from pathlib import Path

import click

from cohortql.catalog import (
    Catalog,
    CatalogError,
    load_catalog,
    load_default_catalog,
)
from cohortql.cohorts import materialize_cohort
from cohortql.config import AppConfig, ConfigError, load_config, make_provider
from cohortql.evaluation import (
    BenchmarkParseError,
    render_report_text,
    run_benchmark,
)
from cohortql.llm import Conversation, Provider
from cohortql.pipeline import (
    OUTCOME_SUCCESS,
    CorrectionTranscript,
    run_pipeline,
)
from cohortql.sqlengine import ResultTable

log = logging.getLogger(__name__)


def _cell_text(cell: object) -> str:
    if cell is None:
        return ""
    if isinstance(cell, date):
        return cell.isoformat()
    return str(cell)


def render_table_text(table: ResultTable, max_rows: int = 50) -> str:
    """Fixed-width text rendering of a result table."""
    header = list(table.column_names)
    body = [[_cell_text(c) for c in row] for row in table.rows[:max_rows]]
    widths = [len(h) for h in header]
    for row in body:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append(
            "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
        )
    if len(table.rows) > max_rows:
        lines.append(f"... ({len(table.rows) - max_rows} more rows)")
    return "\n".join(lines)


def _describe_transcript(transcript: CorrectionTranscript, max_attempts: int) -> str:
    lines = []
    for attempt in transcript.attempts:
        prefix = f"attempt {attempt.index}/{max_attempts}:"
        if attempt.result is not None:
            lines.append(
                f"{prefix} ok ({len(attempt.result.rows)} rows)\n"
                f"  {attempt.extracted_query}"
            )
        else:
            assert attempt.error is not None
            first_line = attempt.error.formatted.splitlines()[0]
            lines.append(f"{prefix} {first_line}")
    lines.append(f"outcome: {transcript.outcome}")
    if transcript.failure_detail:
        lines.append(f"detail: {transcript.failure_detail}")
    return "\n".join(lines)


def _load_chosen_catalog(
    catalog_schema: str | None, catalog_data: str | None
) -> Catalog:
    if catalog_schema and catalog_data:
        return load_catalog(catalog_schema, catalog_data)
    if catalog_schema or catalog_data:
        raise click.UsageError(
            "--catalog-schema and --catalog-data must be given together"
        )
    return load_default_catalog()


def _build(
    catalog_schema: str | None,
    catalog_data: str | None,
    config_path: str | None,
    provider_kind: str,
    responses: str | None,
) -> tuple[Catalog, Provider, AppConfig]:
    try:
        config = load_config(config_path)
        catalog = _load_chosen_catalog(catalog_schema, catalog_data)
        provider = make_provider(provider_kind, config, responses)
    except (ConfigError, CatalogError) as exc:
        raise click.ClickException(str(exc)) from None
    return catalog, provider, config


catalog_options = [
    click.option(
        "--catalog-schema",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Schema descriptor JSON (defaults to the bundled catalog).",
    ),
    click.option(
        "--catalog-data",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Row data, .jsonl or .csv.",
    ),
    click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="JSON config file.",
    ),
    click.option(
        "--provider",
        "provider_kind",
        type=click.Choice(["scripted", "replay", "http"]),
        default="http",
        show_default=True,
        help="Completion backend.",
    ),
    click.option(
        "--responses",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Canned responses for scripted (JSON array) or replay (JSONL).",
    ),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def cli(verbose: bool) -> None:
    """Query a cancer-imaging metadata catalog in plain language."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@_with_options(catalog_options)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
@click.option(
    "--store-dir",
    type=click.Path(file_okay=False),
    default="cohorts",
    show_default=True,
)
@click.option(
    "--ui-dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Static console bundle to serve under /ui (default: frontend/dist "
    "when present).",
)
def serve(
    catalog_schema,
    catalog_data,
    config_path,
    provider_kind,
    responses,
    host,
    port,
    store_dir,
    ui_dir,
):
    """Run the HTTP service."""
    import uvicorn

    from cohortql.service import create_app

    catalog, provider, config = _build(
        catalog_schema, catalog_data, config_path, provider_kind, responses
    )
    if ui_dir is None:
        candidate = Path("frontend") / "dist"
        ui_dir = str(candidate) if candidate.is_dir() else None
    app = create_app(
        catalog,
        provider,
        config.pipeline(),
        store_dir=store_dir,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host, port=port)


@cli.command()
@_with_options(catalog_options)
@click.option(
    "--store-dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Materialize successful results under this directory.",
)
@click.argument("user_input")
def ask(
    catalog_schema,
    catalog_data,
    config_path,
    provider_kind,
    responses,
    store_dir,
    user_input,
):
    """One-shot question: print the transcript and the result table."""
    catalog, provider, config = _build(
        catalog_schema, catalog_data, config_path, provider_kind, responses
    )
    transcript = run_pipeline(user_input, catalog, provider, config.pipeline())
    click.echo(_describe_transcript(transcript, config.max_attempts))
    if transcript.final_result is not None:
        click.echo(render_table_text(transcript.final_result))
        if store_dir and transcript.final_result.rows:
            manifest = materialize_cohort(
                transcript, store_dir, catalog_digest=catalog.digest
            )
            click.echo(f"cohort: {manifest.cohort_id}")
    if transcript.outcome != OUTCOME_SUCCESS:
        sys.exit(1)


@cli.command()
@_with_options(catalog_options)
@click.option(
    "--store-dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Materialize successful results under this directory.",
)
def repl(
    catalog_schema, catalog_data, config_path, provider_kind, responses, store_dir
):
    """Interactive loop sharing one conversation."""
    catalog, provider, config = _build(
        catalog_schema, catalog_data, config_path, provider_kind, responses
    )
    conversation = Conversation()
    click.echo("Ask about the catalog; empty line or Ctrl-D exits.")
    while True:
        try:
            user_input = input("? ").strip()
        except EOFError:
            break
        if not user_input:
            break
        transcript = run_pipeline(
            user_input,
            catalog,
            provider,
            config.pipeline(),
            conversation=conversation,
        )
        click.echo(_describe_transcript(transcript, config.max_attempts))
        if transcript.final_result is not None:
            click.echo(render_table_text(transcript.final_result))
            if store_dir and transcript.final_result.rows:
                manifest = materialize_cohort(
                    transcript, store_dir, catalog_digest=catalog.digest
                )
                click.echo(f"cohort: {manifest.cohort_id}")


@cli.command("eval")
@_with_options(catalog_options)
@click.option(
    "--benchmark",
    "benchmark_file",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    required=True,
    help="Directory for report.json, report.txt, transcripts.jsonl.",
)
def eval_command(
    catalog_schema,
    catalog_data,
    config_path,
    provider_kind,
    responses,
    benchmark_file,
    out_dir,
):
    """Replay a labeled benchmark and write the metric report."""
    catalog, provider, config = _build(
        catalog_schema, catalog_data, config_path, provider_kind, responses
    )
    try:
        report = run_benchmark(
            benchmark_file, catalog, provider, config.pipeline(), out_dir
        )
    except BenchmarkParseError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(render_report_text(report), nl=False)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
